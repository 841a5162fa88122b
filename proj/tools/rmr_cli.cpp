// rmr: run shape-recovery, tau-sweep and finance experiments, or fit and
// apply a model on user data.
//
// Exit status: 0 success, 1 invalid input (config, flags, files, undefined
// metric), 2 solver failure or non-convergence.

#include <rmr/csv.hpp>
#include <rmr/errors.hpp>
#include <rmr/harness.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

using namespace rmr;
using namespace rmr::harness;

/// Every overridable RunConfig field; unset flags leave the config untouched.
struct Overrides {
    std::optional<std::string> config;
    std::vector<std::string> solvers;
    std::optional<double> box_c, epsilon, tau, rho, eta, primal_tol, kkt_tol, rho_tau_ratio;
    std::optional<std::size_t> max_iters, smo_max_passes;
    std::optional<double> gamma, l1_lambda, mu, outer_tol, grmr_eta;
    std::optional<std::size_t> inner_max_iters, outer_max_iters;
    std::vector<double> tau_grid, sweep_taus;
    std::optional<double> validation_fraction;
    std::vector<std::string> shapes;
    std::optional<Eigen::Index> size, corrupt_block;
    std::optional<std::size_t> n, rounds, threads, lag_window;
    std::optional<std::uint64_t> seed;
    std::optional<double> b_true, train_fraction, noise_scale, corrupt_fraction, finance_train_fraction;
    std::optional<std::string> csv, target, output_dir;

    RunConfig apply() const {
        RunConfig cfg = config ? load_config(*config) : RunConfig{};
        auto set = [](auto &dst, const auto &src) {
            if (src) dst = *src;
        };
        if (!solvers.empty()) {
            cfg.solvers.clear();
            for (const auto &s : solvers) cfg.solvers.push_back(parse_solver(s));
        }
        set(cfg.rmr.box_c, box_c);
        set(cfg.rmr.epsilon, epsilon);
        set(cfg.rmr.tau, tau);
        set(cfg.rmr.rho, rho);
        set(cfg.rmr.eta, eta);
        set(cfg.rmr.max_iters, max_iters);
        set(cfg.rmr.primal_tol, primal_tol);
        set(cfg.rmr.kkt_tol, kkt_tol);
        set(cfg.rmr.smo_max_passes, smo_max_passes);
        set(cfg.rho_tau_ratio, rho_tau_ratio);
        set(cfg.grmr.gamma, gamma);
        set(cfg.grmr.l1_lambda, l1_lambda);
        set(cfg.grmr.mu, mu);
        set(cfg.grmr.inner_max_iters, inner_max_iters);
        set(cfg.grmr.outer_max_iters, outer_max_iters);
        set(cfg.grmr.outer_tol, outer_tol);
        set(cfg.grmr.eta, grmr_eta);
        if (!tau_grid.empty()) cfg.tau_grid = tau_grid;
        if (!sweep_taus.empty()) cfg.sweep_taus = sweep_taus;
        set(cfg.validation_fraction, validation_fraction);
        if (!shapes.empty()) {
            cfg.data.shapes.clear();
            for (const auto &s : shapes) cfg.data.shapes.push_back(data::parse_shape(s));
        }
        set(cfg.data.size, size);
        set(cfg.data.n, n);
        set(cfg.data.b_true, b_true);
        set(cfg.data.train_fraction, train_fraction);
        set(cfg.data.noise.label_noise_scale, noise_scale);
        set(cfg.data.noise.corrupt_fraction, corrupt_fraction);
        set(cfg.data.noise.corrupt_block, corrupt_block);
        if (csv) cfg.finance.csv = *csv;
        set(cfg.finance.lag_window, lag_window);
        set(cfg.finance.train_fraction, finance_train_fraction);
        set(cfg.finance.target, target);
        set(cfg.rounds, rounds);
        set(cfg.seed, seed);
        set(cfg.threads, threads);
        if (output_dir) cfg.output_dir = *output_dir;
        return cfg;
    }
};

void add_config_flags(CLI::App &app, Overrides &o) {
    app.add_option("--config", o.config, "JSON run configuration supplying defaults");
    app.add_option("--solver", o.solvers, "svr, rmr and/or grmr")->delimiter(',');
    app.add_option("--box-c", o.box_c, "rmr.box_c");
    app.add_option("--epsilon", o.epsilon, "rmr.epsilon");
    app.add_option("--tau", o.tau, "rmr.tau");
    app.add_option("--rho", o.rho, "rmr.rho");
    app.add_option("--eta", o.eta, "rmr.eta");
    app.add_option("--max-iters", o.max_iters, "rmr.max_iters");
    app.add_option("--primal-tol", o.primal_tol, "rmr.primal_tol");
    app.add_option("--kkt-tol", o.kkt_tol, "rmr.kkt_tol");
    app.add_option("--smo-max-passes", o.smo_max_passes, "rmr.smo_max_passes");
    app.add_option("--rho-tau-ratio", o.rho_tau_ratio, "rho = max(rho, ratio * tau)");
    app.add_option("--gamma", o.gamma, "grmr.gamma");
    app.add_option("--l1-lambda", o.l1_lambda, "grmr.l1_lambda");
    app.add_option("--mu", o.mu, "grmr.mu");
    app.add_option("--inner-max-iters", o.inner_max_iters, "grmr.inner_max_iters");
    app.add_option("--outer-max-iters", o.outer_max_iters, "grmr.outer_max_iters");
    app.add_option("--outer-tol", o.outer_tol, "grmr.outer_tol");
    app.add_option("--grmr-eta", o.grmr_eta, "grmr.eta");
    app.add_option("--tau-grid", o.tau_grid, "tau candidates for hold-out selection")->delimiter(',');
    app.add_option("--validation-fraction", o.validation_fraction, "hold-out share of the training rows");
    app.add_option("--rounds", o.rounds, "rounds");
    app.add_option("--seed", o.seed, "seed");
    app.add_option("--threads", o.threads, "worker threads across rounds");
    app.add_option("--output-dir", o.output_dir, "directory for reports and artifacts");
}

void add_data_flags(CLI::App &app, Overrides &o) {
    app.add_option("--shapes", o.shapes, "data.shapes")->delimiter(',');
    app.add_option("--size", o.size, "data.size");
    app.add_option("--n", o.n, "data.n");
    app.add_option("--b-true", o.b_true, "data.b_true");
    app.add_option("--train-fraction", o.train_fraction, "data.train_fraction");
    app.add_option("--noise-scale", o.noise_scale, "data.noise.label_noise_scale");
    app.add_option("--corrupt-fraction", o.corrupt_fraction, "data.noise.corrupt_fraction");
    app.add_option("--corrupt-block", o.corrupt_block, "data.noise.corrupt_block");
}

int experiment_status(const ExperimentResult &r) {
    return (r.any_failed || !r.all_converged) ? 2 : 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Robust matrix regression experiments and model fitting"};
    app.require_subcommand(1);
    Overrides o;

    auto *shape = app.add_subcommand("shape-recovery", "synthetic shape recovery over rounds");
    add_config_flags(*shape, o);
    add_data_flags(*shape, o);

    auto *sweep = app.add_subcommand("tau-sweep", "RMR error along a path of tau values");
    add_config_flags(*sweep, o);
    add_data_flags(*sweep, o);
    sweep->add_option("--sweep-taus", o.sweep_taus, "tau values of the path")->delimiter(',');

    auto *fin = app.add_subcommand("finance", "chronological split evaluation on a returns CSV");
    add_config_flags(*fin, o);
    fin->add_option("--csv", o.csv, "returns CSV");
    fin->add_option("--lag-window", o.lag_window, "finance.lag_window");
    fin->add_option("--finance-train-fraction", o.finance_train_fraction, "finance.train_fraction");
    fin->add_option("--target", o.target, "finance.target");

    std::string samples_path, predictors_path, model_path, trace_path, out_path;
    Eigen::Index rows = 0, cols = 0;
    auto *fit = app.add_subcommand("fit", "fit a model on a samples CSV (label, then p*q entries)");
    add_config_flags(*fit, o);
    fit->add_option("--samples", samples_path, "samples CSV")->required();
    fit->add_option("--rows", rows, "predictor rows p")->required();
    fit->add_option("--cols", cols, "predictor cols q")->required();
    fit->add_option("--model", model_path, "model file to write")->required();
    fit->add_option("--trace", trace_path, "optional iteration trace CSV");

    auto *pred = app.add_subcommand("predict", "apply a model file to a predictor CSV");
    pred->add_option("--model", model_path, "model file")->required();
    pred->add_option("--predictors", predictors_path, "predictor CSV (p*q entries per row)")->required();
    pred->add_option("--output", out_path, "predictions file; stdout when omitted");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*pred) {
            const ModelFile file = read_model(model_path);
            const auto xs = parse_predictors_csv(read_text(predictors_path), file.model.w.rows(),
                                                 file.model.w.cols());
            const std::string text = format_predictions(cmd_predict(file, xs));
            if (out_path.empty())
                std::cout << text;
            else
                write_text(out_path, text);
            return 0;
        }

        const RunConfig cfg = o.apply();
        validate(cfg);
        if (*shape) {
            const auto r = cmd_shape_recovery(cfg);
            std::cout << (cfg.output_dir / "shape_recovery.json").string() << '\n';
            return experiment_status(r);
        }
        if (*sweep) {
            const auto r = cmd_tau_sweep(cfg);
            std::cout << (cfg.output_dir / "tau_sweep.json").string() << '\n';
            return experiment_status(r);
        }
        if (*fin) {
            const auto r = cmd_finance(cfg);
            std::cout << (cfg.output_dir / "finance.json").string() << '\n';
            return experiment_status(r);
        }
        if (*fit) {
            // one solver; rmr unless the flags or the config name a single other one
            const Solver solver = cfg.solvers.size() == 1 ? cfg.solvers.front() : Solver::rmr;
            if (o.solvers.size() > 1) throw ContractViolation("fit: --solver must name exactly one solver");
            const auto samples = parse_samples_csv(read_text(samples_path), rows, cols);
            const auto art = cmd_fit(cfg, solver, samples, !trace_path.empty());
            write_model(model_path, art.file);
            if (!trace_path.empty()) write_text(trace_path, art.trace_csv);
            if (!art.converged) {
                std::cerr << "rmr: solver stopped at its iteration limit; model written anyway\n";
                return 2;
            }
            return 0;
        }
    } catch (const ContractViolation &e) {
        std::cerr << "rmr: invalid input: " << e.what() << '\n';
        return 1;
    } catch (const ParseError &e) {
        std::cerr << "rmr: parse error: " << e.what() << '\n';
        return 1;
    } catch (const UndefinedMetric &e) {
        std::cerr << "rmr: undefined metric: " << e.what() << '\n';
        return 1;
    } catch (const ConvergenceFailure &e) {
        std::cerr << "rmr: solver did not converge: " << e.what() << '\n';
        return 2;
    } catch (const NumericalFailure &e) {
        std::cerr << "rmr: numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const NoFreeSupportVectors &e) {
        std::cerr << "rmr: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "rmr: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
