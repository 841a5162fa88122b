#pragma once

// Generalised RMR: every noisy predictor D_i is split into a clean low-rank
// part X_i and sparse outliers E_i, alternating with an RMR fit on X.
//
//   min  H(W, b; X) + tau ||W||_* + gamma ||X||_* + lambda ||E||_1
//   s.t. D = X + E
//
// D, X and E are stacked n x pq (row i = row-major vec of sample i). The
// decomposition subproblem relaxes the hinge loss to C ||X w + b - y||^2
// and is solved by proximal-gradient ADMM with restart.

#include <rmr/errors.hpp>
#include <rmr/linalg.hpp>
#include <rmr/rmr.hpp>
#include <rmr/sample.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace rmr {

struct GrmrHyperParams {
    RmrHyperParams rmr;
    double gamma = 0.0;     ///< nuclear weight on the stacked clean signals
    double l1_lambda = 1.0; ///< sparsity weight on the outliers
    double mu = 1.0;        ///< augmented-Lagrangian penalty
    std::size_t inner_max_iters = 300;
    std::size_t outer_max_iters = 20;
    double outer_tol = 1e-4;
    double eta = 0.999;
};

inline void validate(const GrmrHyperParams &p) {
    validate(p.rmr);
    auto fail = [](const std::string &field, const std::string &range) {
        throw ContractViolation("grmr." + field + " must be " + range);
    };
    if (!(p.gamma >= 0) || !std::isfinite(p.gamma)) fail("gamma", "finite and >= 0");
    if (!(p.l1_lambda >= 0) || !std::isfinite(p.l1_lambda)) fail("l1_lambda", "finite and >= 0");
    if (!(p.mu > 0) || !std::isfinite(p.mu)) fail("mu", "finite and > 0");
    if (p.inner_max_iters == 0) fail("inner_max_iters", ">= 1");
    if (!(p.outer_tol > 0)) fail("outer_tol", "> 0");
    if (!(p.eta > 0 && p.eta < 1)) fail("eta", "in (0, 1)");
}

template <typename Scalar>
struct DecompositionState {
    Mat<Scalar> d;
    Mat<Scalar> x_clean;
    Mat<Scalar> e_outliers;
    Mat<Scalar> gamma_dual;
    Mat<Scalar> x_hat;
    Mat<Scalar> gamma_hat;
    Mat<Scalar> e_hat;
    Mat<Scalar> x_prev;
    Mat<Scalar> gamma_prev;
    Scalar momentum_t = 1;
    Scalar combined_residual_c = std::numeric_limits<Scalar>::infinity();
    std::size_t iter = 0;
    bool restarted = false;

    /// X = D, E = Gamma = 0: feasible and the natural warm start.
    static DecompositionState from_noisy(Mat<Scalar> noisy) {
        DecompositionState s;
        s.d = std::move(noisy);
        s.x_clean = s.x_hat = s.x_prev = s.d;
        s.e_outliers = s.e_hat = s.gamma_dual = s.gamma_hat = s.gamma_prev =
            Mat<Scalar>::Zero(s.d.rows(), s.d.cols());
        return s;
    }
};

struct DecompositionTraceRow {
    std::size_t outer_iter;
    std::size_t inner_iter;
    double objective_relaxed;
    double objective_full;
    double constraint_residual;
    double combined_c;
    bool restarted;
};

using DecompositionTraceSink = std::function<void(const DecompositionTraceRow &)>;

/// grad of mu/2 ||D - X - Gamma/mu - E||^2 in E: mu (E + X + Gamma/mu - D).
template <typename Scalar>
Mat<Scalar> grad_e(const Mat<Scalar> &d, const Mat<Scalar> &x, const Mat<Scalar> &e,
                   const Mat<Scalar> &gamma_dual, Scalar mu) {
    require_same_shape(d, x, "grad_e");
    require_same_shape(d, e, "grad_e");
    require_same_shape(d, gamma_dual, "grad_e");
    return mu * (e + x - d) + gamma_dual;
}

/// Evaluated at the state's current iterate (X, E, Gamma).
template <typename Scalar>
Mat<Scalar> grad_e(const DecompositionState<Scalar> &s, Scalar mu) {
    return grad_e(s.d, s.x_clean, s.e_outliers, s.gamma_dual, mu);
}

/// grad of C ||X w + b - y||^2 + mu/2 ||D - X - E - Gamma/mu||^2 in X.
template <typename Scalar>
Mat<Scalar> grad_x(const Mat<Scalar> &d, const Mat<Scalar> &x, const Mat<Scalar> &e,
                   const Mat<Scalar> &gamma_dual, const Vec<Scalar> &w_vec, Scalar b,
                   const Vec<Scalar> &labels, Scalar box_c, Scalar mu) {
    require_same_shape(d, x, "grad_x");
    require_same_shape(d, e, "grad_x");
    require_same_shape(d, gamma_dual, "grad_x");
    if (w_vec.size() != d.cols()) throw ContractViolation("grad_x: w length must equal pq");
    if (labels.size() != d.rows()) throw ContractViolation("grad_x: one label per row required");
    const Vec<Scalar> r = (x * w_vec).array() + b - labels.array();
    return Scalar(2) * box_c * r * w_vec.transpose() + mu * (x + e - d) + gamma_dual;
}

template <typename Scalar>
Mat<Scalar> grad_x(const DecompositionState<Scalar> &s, const Vec<Scalar> &w_vec, Scalar b,
                   const Vec<Scalar> &labels, Scalar box_c, Scalar mu) {
    return grad_x(s.d, s.x_clean, s.e_outliers, s.gamma_dual, w_vec, b, labels, box_c, mu);
}

/// Lipschitz constant of grad_x: 2 C ||w||^2 + mu.
template <typename Scalar>
Scalar x_step_lipschitz(const Vec<Scalar> &w_vec, Scalar box_c, Scalar mu) {
    return Scalar(2) * box_c * w_vec.squaredNorm() + mu;
}

/// One E-step and one X-step from the accelerated point (E_hat, X_hat,
/// Gamma_hat). The X gradient uses the freshly updated E.
template <typename Scalar>
void prox_steps(DecompositionState<Scalar> &s, Scalar step_e, Scalar step_x, Scalar l1_lambda,
                Scalar gamma, const Vec<Scalar> &w_vec, Scalar b, const Vec<Scalar> &labels,
                Scalar box_c, Scalar mu) {
    if (!(step_e > 0) || !(step_x > 0)) throw ContractViolation("prox_steps: steps must be > 0");
    const Mat<Scalar> ge = grad_e(s.d, s.x_hat, s.e_hat, s.gamma_hat, mu);
    s.e_outliers = soft_threshold(Mat<Scalar>(s.e_hat - step_e * ge), step_e * l1_lambda);
    const Mat<Scalar> gx =
        grad_x(s.d, s.x_hat, s.e_outliers, s.gamma_hat, w_vec, b, labels, box_c, mu);
    s.x_clean = singular_value_shrink(Mat<Scalar>(s.x_hat - step_x * gx), step_x * gamma);
}

/// C ||X w + b - y||^2 + 1/2 ||W||^2 + tau ||W||_* + gamma ||X||_* + lambda ||E||_1.
template <typename Scalar>
Scalar relaxed_objective(const RmrModel<Scalar> &model, const Mat<Scalar> &x, const Mat<Scalar> &e,
                         const Vec<Scalar> &labels, const GrmrHyperParams &p) {
    const Vec<Scalar> r = (x * vectorize(model.w)).array() + model.b - labels.array();
    return Scalar(p.rmr.box_c) * r.squaredNorm() + Scalar(0.5) * model.w.squaredNorm() +
           Scalar(p.rmr.tau) * nuclear_norm(model.w) +
           (p.gamma > 0 ? Scalar(p.gamma) * nuclear_norm(x) : Scalar(0)) +
           Scalar(p.l1_lambda) * e.cwiseAbs().sum();
}

/// Hinge objective of RMR on X plus gamma ||X||_* + lambda ||E||_1.
template <typename Scalar>
Scalar full_objective(const RmrModel<Scalar> &model, const Mat<Scalar> &x, const Mat<Scalar> &e,
                      const Vec<Scalar> &labels, const GrmrHyperParams &p) {
    return objective(model, x, labels, p.rmr) +
           (p.gamma > 0 ? Scalar(p.gamma) * nuclear_norm(x) : Scalar(0)) +
           Scalar(p.l1_lambda) * e.cwiseAbs().sum();
}

template <typename Scalar>
struct DecompositionResult {
    DecompositionState<Scalar> state;
    bool converged = false;
    std::size_t iterations = 0;
    Scalar constraint_residual{}; ///< ||D - X - E||_F
    Scalar dual_residual{};       ///< mu ||X - X_hat||_F
};

/// Proximal-gradient ADMM with restart on the decomposition subproblem,
/// model fixed. Stops once ||D - X - E||_F and mu ||X - X_hat||_F are both
/// <= outer_tol max(1, ||D||_F).
template <typename Scalar>
DecompositionResult<Scalar> solve_decomposition(DecompositionState<Scalar> state,
                                                const RmrModel<Scalar> &model,
                                                const Vec<Scalar> &labels,
                                                const GrmrHyperParams &params,
                                                const DecompositionTraceSink &trace = {},
                                                std::size_t outer_iter = 0) {
    validate(params);
    auto &s = state;
    if (labels.size() != s.d.rows()) throw ContractViolation("solve_decomposition: label count");
    if (model.w.size() != s.d.cols()) throw ContractViolation("solve_decomposition: model shape");
    const Scalar mu = Scalar(params.mu), eta = Scalar(params.eta), box_c = Scalar(params.rmr.box_c);
    const Scalar lambda = Scalar(params.l1_lambda), gamma = Scalar(params.gamma);
    const Vec<Scalar> w_vec = vectorize(model.w);
    const Scalar step_e = Scalar(1) / mu;
    const Scalar step_x = Scalar(1) / x_step_lipschitz(w_vec, box_c, mu);
    const Scalar tol = Scalar(params.outer_tol) * std::max(Scalar(1), s.d.norm());

    // Restart bookkeeping starts fresh on every call; the iterates are kept.
    s.x_hat = s.x_prev = s.x_clean;
    s.gamma_hat = s.gamma_prev = s.gamma_dual;
    s.e_hat = s.e_outliers;
    s.momentum_t = Scalar(1);
    s.combined_residual_c = std::numeric_limits<Scalar>::infinity();

    DecompositionResult<Scalar> out;
    for (std::size_t k = 0; k < params.inner_max_iters; ++k) {
        const Mat<Scalar> x_hat = s.x_hat, gamma_hat = s.gamma_hat;
        prox_steps(s, step_e, step_x, lambda, gamma, w_vec, model.b, labels, box_c, mu);
        const Mat<Scalar> gap = s.d - s.x_clean - s.e_outliers;
        s.gamma_dual = gamma_hat - mu * gap;

        Scalar c = (s.gamma_dual - gamma_hat).squaredNorm() / mu + mu * (s.x_clean - x_hat).squaredNorm();
        const Scalar c_prev = s.combined_residual_c;
        if (c < eta * c_prev) {
            const Scalar t_next =
                (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * s.momentum_t * s.momentum_t)) / Scalar(2);
            const Scalar m = (s.momentum_t - Scalar(1)) / t_next;
            s.x_hat = s.x_clean + m * (s.x_clean - s.x_prev);
            s.gamma_hat = s.gamma_dual + m * (s.gamma_dual - s.gamma_prev);
            s.momentum_t = t_next;
            s.restarted = false;
        } else {
            s.momentum_t = Scalar(1);
            s.x_hat = s.x_prev;
            s.gamma_hat = s.gamma_prev;
            c = c_prev / eta;
            s.restarted = true;
        }
        s.e_hat = s.e_outliers;
        s.combined_residual_c = c;
        s.x_prev = s.x_clean;
        s.gamma_prev = s.gamma_dual;
        s.iter = k;

        out.iterations = k + 1;
        out.constraint_residual = gap.norm();
        out.dual_residual = mu * (s.x_clean - x_hat).norm();
        if (trace)
            trace(DecompositionTraceRow{
                outer_iter, k, double(relaxed_objective(model, s.x_clean, s.e_outliers, labels, params)),
                double(full_objective(model, s.x_clean, s.e_outliers, labels, params)),
                double(out.constraint_residual), double(c), s.restarted});
        if (out.constraint_residual <= tol && out.dual_residual <= tol) {
            out.converged = true;
            break;
        }
    }
    out.state = std::move(state);
    return out;
}

template <typename Scalar>
DecompositionResult<Scalar> solve_decomposition(const Mat<Scalar> &d, const RmrModel<Scalar> &model,
                                                const Vec<Scalar> &labels,
                                                const GrmrHyperParams &params,
                                                const DecompositionTraceSink &trace = {}) {
    return solve_decomposition(DecompositionState<Scalar>::from_noisy(d), model, labels, params, trace);
}

struct GrmrOuterRow {
    std::size_t outer_iter;
    double objective_full;
    bool rmr_converged;
    bool decomposition_converged;
    bool decomposition_accepted;
};

template <typename Scalar>
struct GrmrFit {
    RmrModel<Scalar> model;
    RmrModel<Scalar> rmr_model; ///< the first block solve: plain RMR on D
    Mat<Scalar> x_clean;    ///< stacked n x pq
    Mat<Scalar> e_outliers; ///< stacked n x pq, always D - X
    std::vector<GrmrOuterRow> history;
    bool converged = false;
    bool rmr_converged = true;
};

namespace detail {

/// Halvings tried when a decomposition step raises the full objective.
inline constexpr int kBacktrackSteps = 12;

} // namespace detail

/// Alternates the RMR fit on the clean signals with the decomposition.
/// The full objective is evaluated at the feasible point E = D - X and never
/// increases: a block update that would raise it is backtracked toward the
/// previous iterate and dropped if no fraction helps.
template <typename Scalar>
GrmrFit<Scalar> fit_grmr(const Design<Scalar> &noisy, const GrmrHyperParams &params,
                         const DecompositionTraceSink &trace = {}) {
    validate(params);
    const Mat<Scalar> &d = noisy.stacked;
    const Vec<Scalar> &y = noisy.labels;
    const Eigen::Index p = noisy.rows, q = noisy.cols;

    GrmrFit<Scalar> out;
    auto first = fit(noisy, params.rmr);
    out.rmr_converged = first.converged;
    out.model = out.rmr_model = first.model;
    out.x_clean = d;
    out.e_outliers = Mat<Scalar>::Zero(d.rows(), d.cols());
    Scalar f_cur = full_objective(out.model, out.x_clean, out.e_outliers, y, params);
    out.history.push_back({0, double(f_cur), first.converged, true, false});
    if (params.outer_max_iters == 0) {
        out.converged = first.converged;
        return out;
    }

    auto state = DecompositionState<Scalar>::from_noisy(d);
    for (std::size_t k = 1; k <= params.outer_max_iters; ++k) {
        const Scalar f_start = f_cur;

        auto dec = solve_decomposition(state, out.model, y, params, trace, k);
        const Mat<Scalar> x_new = dec.state.x_clean;
        bool accepted = false;
        Scalar theta = Scalar(1);
        for (int h = 0; h <= detail::kBacktrackSteps; ++h, theta /= Scalar(2)) {
            const Mat<Scalar> x_try = out.x_clean + theta * (x_new - out.x_clean);
            const Mat<Scalar> e_try = d - x_try;
            const Scalar f_try = full_objective(out.model, x_try, e_try, y, params);
            if (f_try <= f_cur) {
                out.x_clean = x_try;
                out.e_outliers = e_try;
                f_cur = f_try;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // (X, E) is already optimal for the current model up to the
            // decomposition's accuracy, so refitting W would change nothing.
            out.history.push_back({k, double(f_cur), true, dec.converged, false});
            out.converged = true;
            break;
        }
        state = std::move(dec.state);
        state.x_clean = out.x_clean;
        state.e_outliers = out.e_outliers;

        auto refit = fit(make_design(Mat<Scalar>(out.x_clean), p, q, Vec<Scalar>(y)), params.rmr);
        out.rmr_converged = out.rmr_converged && refit.converged;
        const Scalar f_refit = full_objective(refit.model, out.x_clean, out.e_outliers, y, params);
        if (f_refit <= f_cur) {
            out.model = refit.model;
            f_cur = f_refit;
        }

        out.history.push_back({k, double(f_cur), refit.converged, dec.converged, accepted});
        if (std::abs(f_start - f_cur) <= Scalar(params.outer_tol) * std::max(Scalar(1), std::abs(f_start))) {
            out.converged = true;
            break;
        }
    }
    return out;
}

template <typename Scalar>
GrmrFit<Scalar> fit_grmr(const std::vector<MatrixSample<Scalar>> &noisy_samples,
                         const GrmrHyperParams &params, const DecompositionTraceSink &trace = {}) {
    if (noisy_samples.empty()) throw ContractViolation("fit_grmr: no samples");
    return fit_grmr(make_design(noisy_samples), params, trace);
}

} // namespace rmr
