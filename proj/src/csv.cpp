#include <rmr/csv.hpp>
#include <rmr/errors.hpp>

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace rmr {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

} // namespace

std::string format_real(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_real(std::string_view cell, std::size_t row, std::size_t col) {
    cell = trim(cell);
    if (cell.empty()) throw ParseError("empty cell", row, col);
    if (cell.front() == '+') cell.remove_prefix(1);
    double v = 0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw ParseError("non-numeric cell '" + std::string(cell) + "'", row, col);
    if (!std::isfinite(v)) throw ParseError("non-finite cell", row, col);
    return v;
}

std::string format_csv(const Matrix &m) {
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_real(m(i, j));
        }
        out += '\n';
    }
    return out;
}

Matrix parse_csv(std::string_view text) {
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t col = 0;
        for (;;) {
            const auto comma = line.find(',');
            row.push_back(parse_real(line.substr(0, comma), line_no, ++col));
            if (comma == std::string_view::npos) break;
            line = line.substr(comma + 1);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError("ragged row: expected " + std::to_string(rows.front().size()) +
                                 " columns, found " + std::to_string(row.size()),
                             line_no, row.size());
        rows.push_back(std::move(row));
    }
    Matrix m(Eigen::Index(rows.size()), rows.empty() ? 0 : Eigen::Index(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(Eigen::Index(i), Eigen::Index(j)) = rows[i][j];
    return m;
}

std::string read_text(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path &path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out.write(text.data(), std::streamsize(text.size()));
    if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

void write_csv(const std::filesystem::path &path, const Matrix &m) { write_text(path, format_csv(m)); }

Matrix read_csv(const std::filesystem::path &path) { return parse_csv(read_text(path)); }

} // namespace rmr
