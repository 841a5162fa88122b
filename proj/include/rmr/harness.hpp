#pragma once

// Experiment harness behind the command-line tool: run configuration,
// shape-recovery, tau-sweep and finance experiments, fit and predict.
// Reports are JSON and byte-identical for identical configurations.

#include <rmr/data.hpp>
#include <rmr/grmr.hpp>
#include <rmr/model_io.hpp>
#include <rmr/rmr.hpp>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rmr::harness {

enum class Solver { svr, rmr, grmr };

std::string_view to_string(Solver s);
Solver parse_solver(std::string_view name);

struct DatasetSpec {
    std::vector<data::ShapeKind> shapes{data::ShapeKind::square};
    Eigen::Index size = 32;
    std::size_t n = 400;
    double b_true = 0.0;
    double train_fraction = 0.5;
    data::NoiseSpec noise;
};

struct FinanceSpec {
    std::filesystem::path csv;
    std::size_t lag_window = 4;
    double train_fraction = 0.3;
    std::string target = "ISE100";
};

struct RunConfig {
    std::vector<Solver> solvers{Solver::svr, Solver::rmr};
    RmrHyperParams rmr;
    /// rho = max(rmr.rho, rho_tau_ratio * tau) when > 0.
    double rho_tau_ratio = 0.0;
    GrmrHyperParams grmr;
    /// Non-empty: tau picked per round by hold-out RAE_y on the training split.
    std::vector<double> tau_grid;
    double validation_fraction = 0.2;
    /// tau values of the solution path for the tau-sweep command.
    std::vector<double> sweep_taus{0, 0.1, 1, 10, 30, 100, 300, 1000};
    DatasetSpec data;
    FinanceSpec finance;
    std::size_t rounds = 10;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::filesystem::path output_dir = "out";
};

/// Throws ContractViolation naming the offending field and its legal range.
void validate(const RunConfig &cfg);

nlohmann::json to_json(const RunConfig &cfg);
/// Fields missing from `j` keep their value in `base`; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json &j, RunConfig base = {});
RunConfig load_config(const std::filesystem::path &path, RunConfig base = {});

/// Hyper-parameters of an RMR fit at a given tau, with the rho rule applied.
RmrHyperParams rmr_params_at(const RunConfig &cfg, double tau);

/// Per-round generator seed; a pure function of (seed, round).
std::uint64_t round_seed(std::uint64_t seed, std::size_t round);

struct FitOutcome {
    RmrModel<double> model;
    bool converged = true;
    std::size_t iterations = 0;
    double tau = 0; ///< tau used (RMR and G-RMR)
};

/// Fits one solver on a training design. Solver failures propagate.
FitOutcome fit_solver(Solver solver, const Design<double> &train, const RunConfig &cfg,
                      std::optional<double> tau = std::nullopt);

/// Tau from cfg.tau_grid by hold-out validation (the last validation_fraction
/// of the training rows), or cfg.rmr.tau when the grid is empty.
double select_tau(const Design<double> &train, const RunConfig &cfg);

/// Runs `jobs` independent jobs on up to `threads` threads; results land at
/// their job index so the join order never depends on scheduling.
template <typename Result, typename Fn>
std::vector<Result> run_jobs(std::size_t jobs, std::size_t threads, Fn &&fn);

struct ExperimentResult {
    nlohmann::json report;
    bool all_converged = true;
    bool any_failed = false;
};

std::string format_report(const nlohmann::json &report);

/// Writes <output_dir>/shape_recovery.json plus recovered-W CSV and PGM files
/// of round 0 for every shape and solver.
ExperimentResult cmd_shape_recovery(const RunConfig &cfg, bool write_files = true);
/// RMR RAE_W along cfg.sweep_taus on the first configured shape; writes
/// tau_sweep.json and tau_sweep.csv.
ExperimentResult cmd_tau_sweep(const RunConfig &cfg, bool write_files = true);
/// Chronological split, fit, RAE_y / PCP / D100 on the test segment; writes
/// finance.json.
ExperimentResult cmd_finance(const RunConfig &cfg, bool write_files = true);

/// Sample CSV: one row per sample, label first, then the p*q predictor
/// entries in row-major order.
std::vector<data::Sample> parse_samples_csv(std::string_view text, Eigen::Index rows,
                                            Eigen::Index cols);
/// Predictor CSV: one row per sample holding its p*q entries.
std::vector<Matrix> parse_predictors_csv(std::string_view text, Eigen::Index rows,
                                         Eigen::Index cols);

struct FitArtifacts {
    ModelFile file;
    bool converged = true;
    std::string trace_csv; ///< empty unless requested
};

FitArtifacts cmd_fit(const RunConfig &cfg, Solver solver, const std::vector<data::Sample> &samples,
                     bool want_trace = false);
Vector cmd_predict(const ModelFile &file, const std::vector<Matrix> &predictors);
std::string format_predictions(const Vector &predictions);

} // namespace rmr::harness

#include <rmr/detail/run_jobs.hpp>
