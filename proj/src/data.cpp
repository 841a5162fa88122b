#include <rmr/csv.hpp>
#include <rmr/data.hpp>
#include <rmr/errors.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace rmr::data {

std::string_view to_string(ShapeKind kind) {
    switch (kind) {
    case ShapeKind::square: return "square";
    case ShapeKind::cross: return "cross";
    case ShapeKind::t_shape: return "t_shape";
    case ShapeKind::triangle: return "triangle";
    case ShapeKind::circle: return "circle";
    case ShapeKind::butterfly: return "butterfly";
    }
    return "unknown";
}

ShapeKind parse_shape(std::string_view name) {
    for (ShapeKind k : kAllShapes)
        if (to_string(k) == name) return k;
    throw ContractViolation("unknown shape '" + std::string(name) +
                            "' (expected square, cross, t_shape, triangle, circle, butterfly)");
}

Matrix generate_shape(ShapeKind kind, Eigen::Index size) {
    if (size < 8) throw ContractViolation("generate_shape: size must be >= 8");
    const Eigen::Index s = size;
    const Eigen::Index margin = s / 8;
    const Eigen::Index width = std::max<Eigen::Index>(1, s / 8);
    const Eigen::Index bar_lo = s / 2 - width / 2, bar_hi = bar_lo + width;
    const double centre = 0.5 * double(s);
    Matrix m = Matrix::Zero(s, s);

    auto fill = [&](auto &&inside) {
        for (Eigen::Index i = 0; i < s; ++i)
            for (Eigen::Index j = 0; j < s; ++j)
                if (inside(i, j)) m(i, j) = 1.0;
    };
    auto in = [](Eigen::Index v, Eigen::Index lo, Eigen::Index hi) { return v >= lo && v < hi; };

    switch (kind) {
    case ShapeKind::square:
        fill([&](Eigen::Index i, Eigen::Index j) {
            return in(i, s / 4, s / 4 + s / 2) && in(j, s / 4, s / 4 + s / 2);
        });
        break;
    case ShapeKind::cross:
        fill([&](Eigen::Index i, Eigen::Index j) {
            return (in(i, bar_lo, bar_hi) && in(j, margin, s - margin)) ||
                   (in(j, bar_lo, bar_hi) && in(i, margin, s - margin));
        });
        break;
    case ShapeKind::t_shape:
        fill([&](Eigen::Index i, Eigen::Index j) {
            return (in(i, margin, margin + width) && in(j, margin, s - margin)) ||
                   (in(j, bar_lo, bar_hi) && in(i, margin + width, s - margin));
        });
        break;
    case ShapeKind::triangle: {
        // Apex at the top centre, base on the bottom margin row.
        const double top = double(margin), bottom = double(s - margin - 1);
        const double half_base = 0.5 * double(s - 2 * margin);
        fill([&](Eigen::Index i, Eigen::Index j) {
            if (double(i) < top || double(i) > bottom) return false;
            const double half = (double(i) - top) / (bottom - top) * half_base;
            return std::abs(double(j) + 0.5 - centre) <= half + 0.5;
        });
        break;
    }
    case ShapeKind::circle: {
        const double r = double(s) / 3.0;
        fill([&](Eigen::Index i, Eigen::Index j) {
            const double di = double(i) + 0.5 - centre, dj = double(j) + 0.5 - centre;
            return di * di + dj * dj <= r * r;
        });
        break;
    }
    case ShapeKind::butterfly: {
        // Two horizontal triangles whose apexes meet at the centre.
        const double edge = double(margin);
        const double half_span = centre - double(margin);
        fill([&](Eigen::Index i, Eigen::Index j) {
            const double dj = std::abs(double(j) + 0.5 - centre);
            if (dj > centre - edge) return false;
            const double half = dj / (centre - edge) * half_span;
            return std::abs(double(i) + 0.5 - centre) <= half;
        });
        break;
    }
    }
    return m;
}

void validate(const NoiseSpec &noise) {
    if (!(noise.label_noise_scale >= 0) || !std::isfinite(noise.label_noise_scale))
        throw ContractViolation("noise.label_noise_scale must be finite and >= 0");
    if (!(noise.corrupt_fraction >= 0 && noise.corrupt_fraction <= 1))
        throw ContractViolation("noise.corrupt_fraction must be in [0, 1]");
    if (noise.corrupt_block < 1) throw ContractViolation("noise.corrupt_block must be >= 1");
}

double laplacian_from_uniform(double location, double scale, double u) {
    if (u == 0.0) return location;
    const double sgn = u > 0 ? 1.0 : -1.0;
    return location - scale * sgn * std::log(1.0 - 2.0 * std::abs(u));
}

double laplacian_sample(double location, double scale, Rng &rng) {
    std::uniform_real_distribution<double> uniform(-0.5, 0.5);
    double u = uniform(rng);
    while (u <= -0.5) u = uniform(rng);
    return laplacian_from_uniform(location, scale, u);
}

SyntheticSet generate_synthetic(const Matrix &w_true, double b_true, std::size_t n,
                                const NoiseSpec &noise) {
    if (n == 0) throw ContractViolation("generate_synthetic: n must be >= 1");
    validate(noise);
    const Eigen::Index p = w_true.rows(), q = w_true.cols();
    Rng rng(noise.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    SyntheticSet set;
    set.samples.resize(n);
    set.clean.resize(n);
    set.corrupted.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        Matrix x(p, q);
        for (Eigen::Index r = 0; r < p; ++r)
            for (Eigen::Index c = 0; c < q; ++c) x(r, c) = normal(rng);
        double y = trace_inner(w_true, x) + b_true;
        if (noise.label_noise_scale > 0) y += laplacian_sample(0.0, noise.label_noise_scale, rng);
        set.samples[i] = Sample{x, y};
        set.clean[i] = std::move(x);
    }

    const auto n_corrupt = static_cast<std::size_t>(std::floor(noise.corrupt_fraction * double(n)));
    if (n_corrupt > 0) {
        const Eigen::Index block = std::min({noise.corrupt_block, p, q});
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t(0));
        for (std::size_t i = n - 1; i > 0; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i);
            std::swap(order[i], order[pick(rng)]);
        }
        std::uniform_int_distribution<Eigen::Index> row0(0, p - block), col0(0, q - block);
        for (std::size_t k = 0; k < n_corrupt; ++k) {
            const std::size_t i = order[k];
            const Eigen::Index r = row0(rng), c = col0(rng);
            set.samples[i].x.block(r, c, block, block).setConstant(kCorruptionValue);
            set.corrupted[i] = true;
        }
    }
    return set;
}

double rae(const Vector &estimate, const Vector &truth) {
    if (estimate.size() != truth.size()) throw ContractViolation("rae: length mismatch");
    const double denom = truth.norm();
    if (!(denom > 0)) throw UndefinedMetric("rae: truth has zero norm");
    return (estimate - truth).norm() / denom;
}

double rae(const Matrix &estimate, const Matrix &truth) {
    require_same_shape(estimate, truth, "rae");
    return rae(Vector(vectorize(estimate)), Vector(vectorize(truth)));
}

double pcp(std::span<const double> predicted, std::span<const double> actual) {
    if (predicted.size() != actual.size() || predicted.empty())
        throw ContractViolation("pcp: inputs must be non-empty and of equal length");
    std::size_t hits = 0, days = 0;
    for (std::size_t t = 0; t < actual.size(); ++t) {
        if (actual[t] == 0.0) continue;
        ++days;
        const bool up = actual[t] > 0;
        if ((up && predicted[t] > 0) || (!up && predicted[t] < 0)) ++hits;
    }
    if (days == 0) throw UndefinedMetric("pcp: every actual return is zero");
    return double(hits) / double(days);
}

double d100(std::span<const double> predicted, std::span<const double> actual) {
    if (predicted.size() != actual.size()) throw ContractViolation("d100: length mismatch");
    double value = 100.0;
    for (std::size_t t = 0; t < actual.size(); ++t)
        if (predicted[t] > 0) value *= 1.0 + actual[t];
    return value;
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    for (;;) {
        const auto comma = line.find(',');
        cells.push_back(line.substr(0, comma));
        if (comma == std::string_view::npos) break;
        line = line.substr(comma + 1);
    }
    return cells;
}

std::string clean_name(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return std::string(s);
}

bool is_date_column(std::string_view name) {
    if (name.size() != 4) return false;
    std::string lower(name);
    for (auto &ch : lower) ch = char(std::tolower(static_cast<unsigned char>(ch)));
    return lower == "date";
}

} // namespace

ReturnsTable parse_returns_csv(std::string_view text) {
    ReturnsTable table;
    std::size_t line_no = 0;
    bool skip_first = false;
    std::size_t width = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        const auto cells = split_commas(line);
        if (table.names.empty()) {
            width = cells.size();
            skip_first = is_date_column(clean_name(cells.front()));
            for (std::size_t c = skip_first ? 1 : 0; c < cells.size(); ++c) {
                auto name = clean_name(cells[c]);
                if (name.empty()) throw ParseError("empty column name", line_no, c + 1);
                table.names.push_back(std::move(name));
            }
            if (table.names.empty()) throw ParseError("header names no index columns", line_no, 1);
            continue;
        }
        if (cells.size() != width)
            throw ParseError("expected " + std::to_string(width) + " columns, found " +
                                 std::to_string(cells.size()),
                             line_no, std::min(cells.size(), width) + 1);
        std::vector<double> row;
        row.reserve(table.names.size());
        for (std::size_t c = skip_first ? 1 : 0; c < cells.size(); ++c)
            row.push_back(parse_real(cells[c], line_no, c + 1));
        table.rows.push_back(std::move(row));
    }
    if (table.names.empty()) throw ParseError("missing header row", 1, 0);
    return table;
}

ReturnsTable read_returns_csv(const std::filesystem::path &path) {
    return parse_returns_csv(read_text(path));
}

std::string format_returns_csv(const ReturnsTable &table) {
    std::string out;
    for (std::size_t c = 0; c < table.names.size(); ++c) {
        if (c) out += ',';
        out += table.names[c];
    }
    out += '\n';
    for (const auto &row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += format_real(row[c]);
        }
        out += '\n';
    }
    return out;
}

void write_returns_csv(const std::filesystem::path &path, const ReturnsTable &table) {
    write_text(path, format_returns_csv(table));
}

FinancialSamples make_lag_samples(const ReturnsTable &table, std::size_t lag_window,
                                  std::string_view target) {
    if (lag_window == 0) throw ContractViolation("lag_window must be >= 1");
    const auto it = std::find(table.names.begin(), table.names.end(), target);
    if (it == table.names.end())
        throw ParseError("target column '" + std::string(target) + "' missing from header", 1, 0);
    const std::size_t tcol = std::size_t(it - table.names.begin());
    const auto k = Eigen::Index(table.names.size());
    const auto lag = Eigen::Index(lag_window);

    FinancialSamples fs;
    fs.table = table;
    for (std::size_t t = lag_window; t < table.rows.size(); ++t) {
        Matrix x(k, lag);
        for (Eigen::Index j = 0; j < lag; ++j) {
            const auto &day = table.rows[t - lag_window + std::size_t(j)];
            for (Eigen::Index r = 0; r < k; ++r) x(r, j) = day[std::size_t(r)];
        }
        const double y = table.rows[t][tcol];
        fs.samples.push_back(Sample{std::move(x), y});
        fs.labels.push_back(y);
        fs.label_day.push_back(t);
    }
    return fs;
}

FinancialSamples ingest_financial_csv(const std::filesystem::path &path, std::size_t lag_window,
                                      std::string_view target) {
    return make_lag_samples(read_returns_csv(path), lag_window, target);
}

std::string format_pgm(const Matrix &m) {
    std::string out = "P2\n" + std::to_string(m.cols()) + " " + std::to_string(m.rows()) + "\n255\n";
    const double lo = m.size() ? m.minCoeff() : 0.0, hi = m.size() ? m.maxCoeff() : 0.0;
    const double span = hi - lo;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double v = span > 0 ? (m(i, j) - lo) / span : 0.0;
            if (j) out += ' ';
            out += std::to_string(static_cast<int>(std::lround(255.0 * v)));
        }
        out += '\n';
    }
    return out;
}

void write_pgm(const std::filesystem::path &path, const Matrix &m) { write_text(path, format_pgm(m)); }

} // namespace rmr::data
