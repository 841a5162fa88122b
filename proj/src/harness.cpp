#include <rmr/csv.hpp>
#include <rmr/errors.hpp>
#include <rmr/harness.hpp>
#include <rmr/smo.hpp>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <set>
#include <sstream>

namespace rmr::harness {

using nlohmann::json;

std::string_view to_string(Solver s) {
    switch (s) {
    case Solver::svr: return "svr";
    case Solver::rmr: return "rmr";
    case Solver::grmr: return "grmr";
    }
    return "?";
}

Solver parse_solver(std::string_view name) {
    if (name == "svr") return Solver::svr;
    if (name == "rmr") return Solver::rmr;
    if (name == "grmr") return Solver::grmr;
    throw ContractViolation("solver must be one of svr, rmr, grmr (got '" + std::string(name) + "')");
}

// ---------------------------------------------------------------- validation

namespace {

[[noreturn]] void fail(const std::string &field, const std::string &range) {
    throw ContractViolation(field + " must be " + range);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0; }
bool open_unit(double v) { return v > 0 && v < 1; }

} // namespace

void validate(const RunConfig &cfg) {
    if (cfg.solvers.empty()) fail("solvers", "a non-empty list of svr, rmr, grmr");
    validate(cfg.rmr);
    if (!finite_nonneg(cfg.rho_tau_ratio)) fail("rho_tau_ratio", "finite and >= 0");
    {
        GrmrHyperParams g = cfg.grmr;
        g.rmr = cfg.rmr;
        validate(g);
    }
    for (double t : cfg.tau_grid)
        if (!finite_nonneg(t)) fail("tau_grid", "a list of finite values >= 0");
    if (!open_unit(cfg.validation_fraction)) fail("validation_fraction", "in (0, 1)");
    if (cfg.sweep_taus.empty()) fail("sweep_taus", "a non-empty list");
    for (double t : cfg.sweep_taus)
        if (!finite_nonneg(t)) fail("sweep_taus", "a list of finite values >= 0");

    const auto &d = cfg.data;
    if (d.shapes.empty()) fail("data.shapes", "a non-empty list of shape names");
    if (d.size < 8) fail("data.size", ">= 8");
    if (d.n < 2) fail("data.n", ">= 2");
    if (!std::isfinite(d.b_true)) fail("data.b_true", "finite");
    if (!open_unit(d.train_fraction)) fail("data.train_fraction", "in (0, 1)");
    const auto n_train = std::size_t(std::floor(d.train_fraction * double(d.n)));
    if (n_train < 1 || n_train >= d.n)
        fail("data.train_fraction", "such that train and test splits are both non-empty");
    if (!finite_nonneg(d.noise.label_noise_scale)) fail("data.noise.label_noise_scale", "finite and >= 0");
    if (!(d.noise.corrupt_fraction >= 0 && d.noise.corrupt_fraction <= 1))
        fail("data.noise.corrupt_fraction", "in [0, 1]");
    if (d.noise.corrupt_block < 1) fail("data.noise.corrupt_block", ">= 1");

    if (cfg.finance.lag_window < 1) fail("finance.lag_window", ">= 1");
    if (!open_unit(cfg.finance.train_fraction)) fail("finance.train_fraction", "in (0, 1)");
    if (cfg.finance.target.empty()) fail("finance.target", "a non-empty column name");

    if (cfg.rounds < 1) fail("rounds", ">= 1");
    if (cfg.threads < 1) fail("threads", ">= 1");
}

// ---------------------------------------------------------------- JSON

namespace {

json rmr_json(const RmrHyperParams &p) {
    return {{"box_c", p.box_c},         {"epsilon", p.epsilon},     {"tau", p.tau},
            {"rho", p.rho},             {"eta", p.eta},             {"max_iters", p.max_iters},
            {"primal_tol", p.primal_tol}, {"kkt_tol", p.kkt_tol}, {"smo_max_passes", p.smo_max_passes}};
}

json grmr_json(const GrmrHyperParams &p) {
    return {{"gamma", p.gamma},
            {"l1_lambda", p.l1_lambda},
            {"mu", p.mu},
            {"inner_max_iters", p.inner_max_iters},
            {"outer_max_iters", p.outer_max_iters},
            {"outer_tol", p.outer_tol},
            {"eta", p.eta}};
}

/// Every field that can influence a result; threads and output_dir are left out.
json experiment_json(const RunConfig &cfg) {
    json solvers = json::array();
    for (auto s : cfg.solvers) solvers.push_back(to_string(s));
    json shapes = json::array();
    for (auto s : cfg.data.shapes) shapes.push_back(data::to_string(s));
    return {{"solvers", solvers},
            {"rmr", rmr_json(cfg.rmr)},
            {"rho_tau_ratio", cfg.rho_tau_ratio},
            {"grmr", grmr_json(cfg.grmr)},
            {"tau_grid", cfg.tau_grid},
            {"validation_fraction", cfg.validation_fraction},
            {"sweep_taus", cfg.sweep_taus},
            {"data",
             {{"shapes", shapes},
              {"size", cfg.data.size},
              {"n", cfg.data.n},
              {"b_true", cfg.data.b_true},
              {"train_fraction", cfg.data.train_fraction},
              {"noise",
               {{"label_noise_scale", cfg.data.noise.label_noise_scale},
                {"corrupt_fraction", cfg.data.noise.corrupt_fraction},
                {"corrupt_block", cfg.data.noise.corrupt_block}}}}},
            {"finance",
             {{"csv", cfg.finance.csv.generic_string()},
              {"lag_window", cfg.finance.lag_window},
              {"train_fraction", cfg.finance.train_fraction},
              {"target", cfg.finance.target}}},
            {"rounds", cfg.rounds},
            {"seed", cfg.seed}};
}

class Reader {
  public:
    Reader(const json &j, std::string path, std::initializer_list<const char *> keys)
        : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ContractViolation(where("") + " must be a JSON object");
        std::set<std::string> allowed(keys.begin(), keys.end());
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!allowed.count(it.key()))
                throw ContractViolation("config: unknown key '" + where(it.key()) + "'");
    }

    bool has(const char *key) const { return j_.contains(key); }
    const json &at(const char *key) const { return j_.at(key); }
    std::string where(const std::string &key) const {
        if (path_.empty()) return key.empty() ? "config" : key;
        return key.empty() ? path_ : path_ + "." + key;
    }

    void real(const char *key, double &out) const {
        if (!has(key)) return;
        const json &v = at(key);
        if (!v.is_number()) throw ContractViolation(where(key) + " must be a number");
        out = v.get<double>();
    }

    template <typename Int>
    void count(const char *key, Int &out) const {
        if (!has(key)) return;
        const json &v = at(key);
        if (v.is_number_unsigned()) {
            out = Int(v.get<std::uint64_t>());
        } else if (v.is_number_integer()) {
            if (v.get<std::int64_t>() < 0) throw ContractViolation(where(key) + " must be >= 0");
            out = Int(v.get<std::int64_t>());
        } else {
            throw ContractViolation(where(key) + " must be a non-negative integer");
        }
    }

    void text(const char *key, std::string &out) const {
        if (!has(key)) return;
        if (!at(key).is_string()) throw ContractViolation(where(key) + " must be a string");
        out = at(key).get<std::string>();
    }

    void reals(const char *key, std::vector<double> &out) const {
        if (!has(key)) return;
        const json &v = at(key);
        if (!v.is_array()) throw ContractViolation(where(key) + " must be a list of numbers");
        out.clear();
        for (const auto &e : v) {
            if (!e.is_number()) throw ContractViolation(where(key) + " must be a list of numbers");
            out.push_back(e.get<double>());
        }
    }

    std::vector<std::string> strings(const char *key) const {
        const json &v = at(key);
        if (!v.is_array()) throw ContractViolation(where(key) + " must be a list of strings");
        std::vector<std::string> out;
        for (const auto &e : v) {
            if (!e.is_string()) throw ContractViolation(where(key) + " must be a list of strings");
            out.push_back(e.get<std::string>());
        }
        return out;
    }

  private:
    const json &j_;
    std::string path_;
};

void read_rmr(const Reader &r, RmrHyperParams &p) {
    r.real("box_c", p.box_c);
    r.real("epsilon", p.epsilon);
    r.real("tau", p.tau);
    r.real("rho", p.rho);
    r.real("eta", p.eta);
    r.count("max_iters", p.max_iters);
    r.real("primal_tol", p.primal_tol);
    r.real("kkt_tol", p.kkt_tol);
    r.count("smo_max_passes", p.smo_max_passes);
}

void read_grmr(const Reader &r, GrmrHyperParams &p) {
    r.real("gamma", p.gamma);
    r.real("l1_lambda", p.l1_lambda);
    r.real("mu", p.mu);
    r.count("inner_max_iters", p.inner_max_iters);
    r.count("outer_max_iters", p.outer_max_iters);
    r.real("outer_tol", p.outer_tol);
    r.real("eta", p.eta);
}

} // namespace

json to_json(const RunConfig &cfg) {
    json j = experiment_json(cfg);
    j["threads"] = cfg.threads;
    j["output_dir"] = cfg.output_dir.generic_string();
    return j;
}

RunConfig config_from_json(const json &j, RunConfig cfg) {
    const Reader top(j, "",
                     {"solvers", "rmr", "rho_tau_ratio", "grmr", "tau_grid", "validation_fraction",
                      "sweep_taus", "data", "finance", "rounds", "seed", "threads", "output_dir"});
    if (top.has("solvers")) {
        cfg.solvers.clear();
        for (const auto &s : top.strings("solvers")) cfg.solvers.push_back(parse_solver(s));
    }
    if (top.has("rmr"))
        read_rmr(Reader(top.at("rmr"), "rmr",
                        {"box_c", "epsilon", "tau", "rho", "eta", "max_iters", "primal_tol",
                         "kkt_tol", "smo_max_passes"}),
                 cfg.rmr);
    top.real("rho_tau_ratio", cfg.rho_tau_ratio);
    if (top.has("grmr"))
        read_grmr(Reader(top.at("grmr"), "grmr",
                         {"gamma", "l1_lambda", "mu", "inner_max_iters", "outer_max_iters",
                          "outer_tol", "eta"}),
                  cfg.grmr);
    top.reals("tau_grid", cfg.tau_grid);
    top.real("validation_fraction", cfg.validation_fraction);
    top.reals("sweep_taus", cfg.sweep_taus);
    if (top.has("data")) {
        const Reader r(top.at("data"), "data",
                       {"shapes", "size", "n", "b_true", "train_fraction", "noise"});
        if (r.has("shapes")) {
            cfg.data.shapes.clear();
            for (const auto &s : r.strings("shapes")) cfg.data.shapes.push_back(data::parse_shape(s));
        }
        r.count("size", cfg.data.size);
        r.count("n", cfg.data.n);
        r.real("b_true", cfg.data.b_true);
        r.real("train_fraction", cfg.data.train_fraction);
        if (r.has("noise")) {
            const Reader nr(r.at("noise"), "data.noise",
                            {"label_noise_scale", "corrupt_fraction", "corrupt_block"});
            nr.real("label_noise_scale", cfg.data.noise.label_noise_scale);
            nr.real("corrupt_fraction", cfg.data.noise.corrupt_fraction);
            nr.count("corrupt_block", cfg.data.noise.corrupt_block);
        }
    }
    if (top.has("finance")) {
        const Reader r(top.at("finance"), "finance", {"csv", "lag_window", "train_fraction", "target"});
        std::string csv = cfg.finance.csv.string();
        r.text("csv", csv);
        cfg.finance.csv = csv;
        r.count("lag_window", cfg.finance.lag_window);
        r.real("train_fraction", cfg.finance.train_fraction);
        r.text("target", cfg.finance.target);
    }
    top.count("rounds", cfg.rounds);
    top.count("seed", cfg.seed);
    top.count("threads", cfg.threads);
    if (top.has("output_dir")) {
        std::string out;
        top.text("output_dir", out);
        cfg.output_dir = out;
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path &path, RunConfig base) {
    const std::string text = read_text(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error &e) {
        // byte offsets are more useful than nothing; report them as column 0
        throw ParseError("config " + path.string() + ": " + e.what(), 0, 0);
    }
    return config_from_json(j, std::move(base));
}

// ---------------------------------------------------------------- fitting

RmrHyperParams rmr_params_at(const RunConfig &cfg, double tau) {
    RmrHyperParams p = cfg.rmr;
    p.tau = tau;
    if (cfg.rho_tau_ratio > 0) p.rho = std::max(p.rho, cfg.rho_tau_ratio * tau);
    return p;
}

std::uint64_t round_seed(std::uint64_t seed, std::size_t round) {
    // splitmix64 finaliser over seed and round
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (std::uint64_t(round) + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

namespace {

Design<double> design_of(const std::vector<data::Sample> &samples, std::size_t begin, std::size_t end) {
    return make_design(std::vector<data::Sample>(samples.begin() + std::ptrdiff_t(begin),
                                                 samples.begin() + std::ptrdiff_t(end)));
}

Design<double> row_slice(const Design<double> &d, Eigen::Index begin, Eigen::Index count) {
    return make_design(Matrix(d.stacked.middleRows(begin, count)), d.rows, d.cols,
                       Vector(d.labels.segment(begin, count)));
}

Vector predictions(const RmrModel<double> &model, const Design<double> &d) {
    return (stacked_predictions(d.stacked, model.w).array() + model.b).matrix();
}

} // namespace

FitOutcome fit_solver(Solver solver, const Design<double> &train, const RunConfig &cfg,
                      std::optional<double> tau) {
    FitOutcome out;
    if (solver == Solver::svr) {
        smo::SmoOptions opt;
        opt.kkt_tol = cfg.rmr.kkt_tol;
        opt.max_passes = cfg.rmr.smo_max_passes;
        const auto fit = smo::fit_linear_svr(train, cfg.rmr.box_c, cfg.rmr.epsilon, opt);
        out.model = fit.model;
        out.iterations = fit.dual.pair_updates;
        out.converged = true;
        return out;
    }
    out.tau = tau ? *tau : select_tau(train, cfg);
    const RmrHyperParams rp = rmr_params_at(cfg, out.tau);
    if (solver == Solver::rmr) {
        const auto fit = rmr::fit(train, rp);
        out.model = fit.model;
        out.converged = fit.converged;
        out.iterations = fit.iterations;
        return out;
    }
    GrmrHyperParams gp = cfg.grmr;
    gp.rmr = rp;
    const auto fit = fit_grmr(train, gp);
    out.model = fit.model;
    out.converged = fit.converged && fit.rmr_converged;
    out.iterations = fit.history.size() - 1;
    return out;
}

double select_tau(const Design<double> &train, const RunConfig &cfg) {
    if (cfg.tau_grid.empty()) return cfg.rmr.tau;
    const Eigen::Index n = train.size();
    const auto n_val = Eigen::Index(std::floor(cfg.validation_fraction * double(n)));
    if (n_val < 1 || n_val >= n)
        throw ContractViolation("validation_fraction leaves an empty fit or validation split");
    const Design<double> fit_part = row_slice(train, 0, n - n_val);
    const Design<double> val_part = row_slice(train, n - n_val, n_val);
    double best_tau = cfg.tau_grid.front();
    double best = std::numeric_limits<double>::infinity();
    for (double t : cfg.tau_grid) {
        const auto fit = rmr::fit(fit_part, rmr_params_at(cfg, t));
        const double err = data::rae(predictions(fit.model, val_part), val_part.labels);
        if (err < best) {
            best = err;
            best_tau = t;
        }
    }
    return best_tau;
}

// ---------------------------------------------------------------- reports

std::string format_report(const json &report) { return report.dump(2) + "\n"; }

namespace {

struct MetricRow {
    bool ok = false;
    std::string error;
    double rae_w = 0, rae_y = 0, tau = 0;
    bool converged = false;
    std::size_t iterations = 0;
    Matrix w; ///< kept for artifact output
};

struct Stats {
    double mean = 0, std = 0;
};

Stats stats(const std::vector<double> &v) {
    Stats s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= double(v.size());
    if (v.size() > 1) {
        double ss = 0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / double(v.size() - 1));
    }
    return s;
}

json stat_json(const std::vector<double> &v) {
    if (v.empty()) return nullptr;
    const Stats s = stats(v);
    return {{"mean", s.mean}, {"std", s.std}};
}

/// Runs `body`; runtime solver failures become a recorded error.
template <typename Body>
MetricRow guarded(Body &&body) {
    try {
        return body();
    } catch (const ConvergenceFailure &e) {
        MetricRow r;
        r.error = e.what();
        return r;
    } catch (const NumericalFailure &e) {
        MetricRow r;
        r.error = e.what();
        return r;
    } catch (const NoFreeSupportVectors &e) {
        MetricRow r;
        r.error = e.what();
        return r;
    }
}

MetricRow evaluate(Solver solver, const Design<double> &train, const Design<double> &test,
                   const Matrix &w_true, const RunConfig &cfg, std::optional<double> tau = std::nullopt) {
    return guarded([&] {
        const FitOutcome f = fit_solver(solver, train, cfg, tau);
        MetricRow r;
        r.ok = true;
        r.rae_w = data::rae(f.model.w, w_true);
        r.rae_y = data::rae(predictions(f.model, test), test.labels);
        r.tau = f.tau;
        r.converged = f.converged;
        r.iterations = f.iterations;
        r.w = f.model.w;
        return r;
    });
}

json row_json(const MetricRow &r, std::size_t round, Solver solver) {
    json j = {{"round", round}};
    if (!r.ok) {
        j["error"] = r.error;
        return j;
    }
    j["rae_w"] = r.rae_w;
    j["rae_y"] = r.rae_y;
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    if (solver != Solver::svr) j["tau"] = r.tau;
    return j;
}

/// Aggregates one (shape or tau, solver) series of rounds into `result`.
json series_json(const std::vector<MetricRow> &rows, Solver solver, ExperimentResult &result) {
    json rounds = json::array();
    std::vector<double> w, y;
    bool all_conv = true;
    std::size_t failed = 0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        rounds.push_back(row_json(rows[k], k, solver));
        if (!rows[k].ok) {
            ++failed;
            continue;
        }
        w.push_back(rows[k].rae_w);
        y.push_back(rows[k].rae_y);
        all_conv = all_conv && rows[k].converged;
    }
    result.all_converged = result.all_converged && all_conv && failed == 0;
    result.any_failed = result.any_failed || failed > 0;
    return {{"solver", to_string(solver)},
            {"rounds", rounds},
            {"completed", rows.size() - failed},
            {"failed", failed},
            {"all_converged", all_conv && failed == 0},
            {"rae_w", stat_json(w)},
            {"rae_y", stat_json(y)}};
}

struct RoundData {
    Design<double> train, test;
};

RoundData shape_round(const RunConfig &cfg, const Matrix &w_true, std::size_t round) {
    data::NoiseSpec noise = cfg.data.noise;
    noise.seed = round_seed(cfg.seed, round);
    const auto set = data::generate_synthetic(w_true, cfg.data.b_true, cfg.data.n, noise);
    const auto n_train = std::size_t(std::floor(cfg.data.train_fraction * double(cfg.data.n)));
    return {design_of(set.samples, 0, n_train), design_of(set.samples, n_train, set.samples.size())};
}

void finish(ExperimentResult &r) {
    r.report["all_converged"] = r.all_converged;
    r.report["any_failed"] = r.any_failed;
}

} // namespace

ExperimentResult cmd_shape_recovery(const RunConfig &cfg, bool write_files) {
    validate(cfg);
    const std::size_t n_shapes = cfg.data.shapes.size(), n_solvers = cfg.solvers.size();
    const std::size_t jobs = n_shapes * cfg.rounds;
    // job = (shape, round); every job fits all solvers on the same data
    auto rows = run_jobs<std::vector<MetricRow>>(jobs, cfg.threads, [&](std::size_t job) {
        const std::size_t shape = job / cfg.rounds, round = job % cfg.rounds;
        const Matrix w_true = data::generate_shape(cfg.data.shapes[shape], cfg.data.size);
        const RoundData rd = shape_round(cfg, w_true, round);
        std::vector<MetricRow> out;
        for (Solver s : cfg.solvers) out.push_back(evaluate(s, rd.train, rd.test, w_true, cfg));
        return out;
    });

    ExperimentResult result;
    json shapes = json::array();
    for (std::size_t si = 0; si < n_shapes; ++si) {
        const auto kind = cfg.data.shapes[si];
        json solvers = json::array();
        for (std::size_t v = 0; v < n_solvers; ++v) {
            std::vector<MetricRow> series;
            for (std::size_t k = 0; k < cfg.rounds; ++k) series.push_back(rows[si * cfg.rounds + k][v]);
            solvers.push_back(series_json(series, cfg.solvers[v], result));
        }
        shapes.push_back({{"shape", data::to_string(kind)}, {"solvers", solvers}});
    }
    result.report = {{"command", "shape-recovery"}, {"config", experiment_json(cfg)}, {"shapes", shapes}};
    finish(result);

    if (write_files) {
        std::filesystem::create_directories(cfg.output_dir);
        for (std::size_t si = 0; si < n_shapes; ++si) {
            const std::string name(data::to_string(cfg.data.shapes[si]));
            data::write_pgm(cfg.output_dir / ("truth_" + name + ".pgm"),
                            data::generate_shape(cfg.data.shapes[si], cfg.data.size));
            for (std::size_t v = 0; v < n_solvers; ++v) {
                const MetricRow &r0 = rows[si * cfg.rounds][v];
                if (!r0.ok) continue;
                const std::string stem = "w_" + name + "_" + std::string(to_string(cfg.solvers[v]));
                write_csv(cfg.output_dir / (stem + ".csv"), r0.w);
                data::write_pgm(cfg.output_dir / (stem + ".pgm"), r0.w);
            }
        }
        write_text(cfg.output_dir / "shape_recovery.json", format_report(result.report));
    }
    return result;
}

ExperimentResult cmd_tau_sweep(const RunConfig &cfg, bool write_files) {
    validate(cfg);
    const auto kind = cfg.data.shapes.front();
    const Matrix w_true = data::generate_shape(kind, cfg.data.size);
    const std::size_t n_tau = cfg.sweep_taus.size();
    auto rows = run_jobs<MetricRow>(n_tau * cfg.rounds, cfg.threads, [&](std::size_t job) {
        const std::size_t ti = job / cfg.rounds, round = job % cfg.rounds;
        const RoundData rd = shape_round(cfg, w_true, round);
        return evaluate(Solver::rmr, rd.train, rd.test, w_true, cfg, cfg.sweep_taus[ti]);
    });

    ExperimentResult result;
    json path = json::array();
    std::string csv = "tau,mean_rae_w,std_rae_w,mean_rae_y,std_rae_y,completed\n";
    std::optional<double> best_tau, best_rae, rae_zero;
    for (std::size_t ti = 0; ti < n_tau; ++ti) {
        const std::vector<MetricRow> series(rows.begin() + std::ptrdiff_t(ti * cfg.rounds),
                                            rows.begin() + std::ptrdiff_t((ti + 1) * cfg.rounds));
        json entry = series_json(series, Solver::rmr, result);
        const double tau = cfg.sweep_taus[ti];
        entry.erase("solver");
        entry["tau"] = tau;
        path.push_back(entry);
        if (entry["rae_w"].is_null()) continue;
        const double mw = entry["rae_w"]["mean"].get<double>();
        csv += format_real(tau) + "," + format_real(mw) + "," +
               format_real(entry["rae_w"]["std"].get<double>()) + "," +
               format_real(entry["rae_y"]["mean"].get<double>()) + "," +
               format_real(entry["rae_y"]["std"].get<double>()) + "," +
               std::to_string(entry["completed"].get<std::size_t>()) + "\n";
        if (tau == 0) {
            rae_zero = mw;
        } else if (!best_rae || mw < *best_rae) {
            best_rae = mw;
            best_tau = tau;
        }
    }
    auto opt_json = [](std::optional<double> v) { return v ? json(*v) : json(nullptr); };
    result.report = {{"command", "tau-sweep"},
                     {"config", experiment_json(cfg)},
                     {"shape", data::to_string(kind)},
                     {"path", path},
                     {"best_tau", opt_json(best_tau)},
                     {"best_rae_w", opt_json(best_rae)},
                     {"rae_w_at_zero", opt_json(rae_zero)}};
    finish(result);

    if (write_files) {
        std::filesystem::create_directories(cfg.output_dir);
        write_text(cfg.output_dir / "tau_sweep.json", format_report(result.report));
        write_text(cfg.output_dir / "tau_sweep.csv", csv);
    }
    return result;
}

ExperimentResult cmd_finance(const RunConfig &cfg, bool write_files) {
    validate(cfg);
    if (cfg.finance.csv.empty()) fail("finance.csv", "a path to a returns CSV");
    const auto fs = data::ingest_financial_csv(cfg.finance.csv, cfg.finance.lag_window, cfg.finance.target);
    const std::size_t n = fs.samples.size();
    const auto n_train = std::size_t(std::floor(cfg.finance.train_fraction * double(n)));
    if (n_train < 1 || n_train >= n)
        throw ContractViolation("finance: " + std::to_string(n) +
                                " samples leave an empty train or test segment");
    {
        const auto [lo, hi] = std::minmax_element(fs.labels.begin(), fs.labels.end());
        if (*lo == *hi)
            throw UndefinedMetric("finance: target column " + cfg.finance.target + " has zero variance");
    }
    const Design<double> train = design_of(fs.samples, 0, n_train);
    const Design<double> test = design_of(fs.samples, n_train, n);
    const std::vector<double> actual(test.labels.data(), test.labels.data() + test.labels.size());

    ExperimentResult result;
    json solvers = json::array();
    for (Solver s : cfg.solvers) {
        json entry = {{"solver", to_string(s)}};
        try {
            const FitOutcome f = fit_solver(s, train, cfg);
            const Vector pred = predictions(f.model, test);
            const std::vector<double> p(pred.data(), pred.data() + pred.size());
            entry["rae_y"] = data::rae(pred, test.labels);
            entry["pcp"] = data::pcp(p, actual);
            entry["d100"] = data::d100(p, actual);
            entry["converged"] = f.converged;
            entry["iterations"] = f.iterations;
            if (s != Solver::svr) entry["tau"] = f.tau;
            result.all_converged = result.all_converged && f.converged;
        } catch (const ConvergenceFailure &e) {
            entry["error"] = e.what();
        } catch (const NumericalFailure &e) {
            entry["error"] = e.what();
        } catch (const NoFreeSupportVectors &e) {
            entry["error"] = e.what();
        }
        if (entry.contains("error")) {
            result.any_failed = true;
            result.all_converged = false;
        }
        solvers.push_back(entry);
    }
    result.report = {{"command", "finance"},
                     {"config", experiment_json(cfg)},
                     {"indices", fs.table.names},
                     {"n_train", n_train},
                     {"n_test", n - n_train},
                     {"solvers", solvers}};
    finish(result);
    if (write_files) {
        std::filesystem::create_directories(cfg.output_dir);
        write_text(cfg.output_dir / "finance.json", format_report(result.report));
    }
    return result;
}

// ---------------------------------------------------------------- fit / predict

std::vector<data::Sample> parse_samples_csv(std::string_view text, Eigen::Index rows, Eigen::Index cols) {
    if (rows < 1 || cols < 1) fail("rows and cols", ">= 1");
    const Matrix m = parse_csv(text);
    if (m.rows() == 0) throw ParseError("samples: no rows", 1, 0);
    if (m.cols() != 1 + rows * cols)
        throw ParseError("samples: expected " + std::to_string(1 + rows * cols) +
                             " columns (label + rows*cols), found " + std::to_string(m.cols()),
                         1, 0);
    std::vector<data::Sample> out;
    out.reserve(std::size_t(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        out.push_back({unvectorize(m.row(i).tail(rows * cols).transpose(), rows, cols), m(i, 0)});
    return out;
}

std::vector<Matrix> parse_predictors_csv(std::string_view text, Eigen::Index rows, Eigen::Index cols) {
    if (rows < 1 || cols < 1) fail("rows and cols", ">= 1");
    const Matrix m = parse_csv(text);
    if (m.rows() == 0) throw ParseError("predictors: no rows", 1, 0);
    if (m.cols() != rows * cols)
        throw ContractViolation("predictors: expected " + std::to_string(rows * cols) +
                                " columns to match the " + std::to_string(rows) + "x" +
                                std::to_string(cols) + " model, found " + std::to_string(m.cols()));
    return unstack(m, rows, cols);
}

FitArtifacts cmd_fit(const RunConfig &cfg, Solver solver, const std::vector<data::Sample> &samples,
                     bool want_trace) {
    validate(cfg);
    if (samples.empty()) throw ContractViolation("fit: no samples");
    const Design<double> design = make_design(samples);
    FitArtifacts out;
    out.file.solver = std::string(to_string(solver));
    std::ostringstream trace;

    if (solver == Solver::svr) {
        const FitOutcome f = fit_solver(solver, design, cfg);
        out.file.model = f.model;
        out.file.hyper = {{"box_c", cfg.rmr.box_c}, {"epsilon", cfg.rmr.epsilon}, {"kkt_tol", cfg.rmr.kkt_tol}};
        if (want_trace) trace << "pair_updates\n" << f.iterations << "\n";
    } else {
        const double tau = select_tau(design, cfg);
        const RmrHyperParams rp = rmr_params_at(cfg, tau);
        out.file.hyper = {{"rmr", rmr_json(rp)}};
        if (solver == Solver::rmr) {
            AdmmTraceSink<double> sink;
            if (want_trace) {
                trace << "iter,objective,primal_residual,combined_c,restarted\n";
                sink = [&](const AdmmTraceRow &r, const AdmmState<double> &) {
                    trace << r.iter << ',' << format_real(r.objective) << ','
                          << format_real(r.primal_residual) << ',' << format_real(r.combined_c) << ','
                          << int(r.restarted) << '\n';
                };
            }
            const auto fit = rmr::fit(design, rp, sink);
            out.file.model = fit.model;
            out.converged = fit.converged;
        } else {
            GrmrHyperParams gp = cfg.grmr;
            gp.rmr = rp;
            out.file.hyper["grmr"] = grmr_json(gp);
            DecompositionTraceSink sink;
            if (want_trace) {
                trace << "outer_iter,inner_iter,objective_relaxed,objective_full,constraint_residual,"
                         "combined_c,restarted\n";
                sink = [&](const DecompositionTraceRow &r) {
                    trace << r.outer_iter << ',' << r.inner_iter << ',' << format_real(r.objective_relaxed)
                          << ',' << format_real(r.objective_full) << ','
                          << format_real(r.constraint_residual) << ',' << format_real(r.combined_c) << ','
                          << int(r.restarted) << '\n';
                };
            }
            const auto fit = fit_grmr(design, gp, sink);
            out.file.model = fit.model;
            out.converged = fit.converged && fit.rmr_converged;
        }
    }
    if (want_trace) out.trace_csv = trace.str();
    return out;
}

Vector cmd_predict(const ModelFile &file, const std::vector<Matrix> &predictors) {
    Vector out(Eigen::Index(predictors.size()));
    for (std::size_t i = 0; i < predictors.size(); ++i) {
        if (predictors[i].rows() != file.model.w.rows() || predictors[i].cols() != file.model.w.cols())
            throw ContractViolation("predict: sample " + std::to_string(i) + " is " +
                                    std::to_string(predictors[i].rows()) + "x" +
                                    std::to_string(predictors[i].cols()) + ", model is " +
                                    std::to_string(file.model.w.rows()) + "x" +
                                    std::to_string(file.model.w.cols()));
        out(Eigen::Index(i)) = predict(file.model, predictors[i]);
    }
    return out;
}

std::string format_predictions(const Vector &predictions) {
    std::string out;
    for (Eigen::Index i = 0; i < predictions.size(); ++i) out += format_real(predictions(i)) + "\n";
    return out;
}

} // namespace rmr::harness
