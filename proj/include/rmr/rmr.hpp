#pragma once

// Robust matrix regression: epsilon-insensitive loss plus the spectral
// elastic net 1/2 ||W||_F^2 + tau ||W||_*, fitted by ADMM on the split
// S = W with the fast-ADMM restart rule.

#include <rmr/errors.hpp>
#include <rmr/linalg.hpp>
#include <rmr/sample.hpp>
#include <rmr/smo.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace rmr {

struct RmrHyperParams {
    double box_c = 1e3;
    double epsilon = 1e-2;
    double tau = 1.0;
    double rho = 1.0;
    double eta = 0.999;
    std::size_t max_iters = 500;
    double primal_tol = 1e-5;
    double kkt_tol = 1e-6;
    /// SMO pair-update budget per QP solve; 0 means 10 n^2.
    std::size_t smo_max_passes = 0;
};

inline void validate(const RmrHyperParams &p) {
    auto fail = [](const std::string &field, const std::string &range) {
        throw ContractViolation("rmr." + field + " must be " + range);
    };
    if (!(p.box_c > 0) || !std::isfinite(p.box_c)) fail("box_c", "finite and > 0");
    if (!(p.epsilon >= 0) || !std::isfinite(p.epsilon)) fail("epsilon", "finite and >= 0");
    if (!(p.tau >= 0) || !std::isfinite(p.tau)) fail("tau", "finite and >= 0");
    if (!(p.rho > 0) || !std::isfinite(p.rho)) fail("rho", "finite and > 0");
    if (!(p.eta > 0 && p.eta < 1)) fail("eta", "in (0, 1)");
    if (p.max_iters == 0) fail("max_iters", ">= 1");
    if (!(p.primal_tol > 0)) fail("primal_tol", "> 0");
    if (!(p.kkt_tol > 0)) fail("kkt_tol", "> 0");
}

template <typename Scalar>
struct AdmmState {
    Mat<Scalar> w;
    Scalar b{};
    Mat<Scalar> s;           ///< S^(k)
    Mat<Scalar> lambda_dual; ///< Lambda^(k)
    Mat<Scalar> s_hat;       ///< accelerated S for iteration k+1
    Mat<Scalar> lambda_hat;  ///< accelerated Lambda for iteration k+1
    Mat<Scalar> s_prev;      ///< S^(k-1)
    Mat<Scalar> lambda_prev; ///< Lambda^(k-1)
    Vec<Scalar> beta;        ///< multipliers of the last (W, b) step
    Scalar momentum_t = 1;
    Scalar combined_residual_c = std::numeric_limits<Scalar>::infinity();
    std::size_t iter = 0;
    bool restarted = false;
};

struct AdmmTraceRow {
    std::size_t iter;
    double objective;
    double primal_residual;
    double combined_c;
    bool restarted;
};

template <typename Scalar>
using AdmmTraceSink = std::function<void(const AdmmTraceRow &, const AdmmState<Scalar> &)>;

template <typename Scalar>
struct RmrFit {
    RmrModel<Scalar> model;
    AdmmState<Scalar> state;
    bool converged = false;
    std::size_t iterations = 0;
    Scalar primal_residual{}; ///< ||W - S||_F
    Scalar dual_residual{};   ///< rho ||S - S_hat||_F, equal to ||W - (Lambda + sum beta_i X_i)||_F
};

/// (|tr(W^T X) + b - y| - eps)_+
template <typename Scalar>
Scalar hinge_residual(const RmrModel<Scalar> &model, const MatrixSample<Scalar> &sample,
                      Scalar epsilon) {
    return std::max(std::abs(predict(model, sample.x) - sample.y) - epsilon, Scalar(0));
}

/// 1/2 ||W||_F^2 + C sum_i (|r_i| - eps)_+ + tau ||W||_*, from stacked predictions.
template <typename Scalar>
Scalar objective(const RmrModel<Scalar> &model, const Mat<Scalar> &stacked,
                 const Vec<Scalar> &labels, const RmrHyperParams &params) {
    const Vec<Scalar> r = (stacked * vectorize(model.w)).array() + model.b - labels.array();
    const Scalar loss =
        (r.array().abs() - Scalar(params.epsilon)).cwiseMax(Scalar(0)).sum();
    return Scalar(0.5) * model.w.squaredNorm() + Scalar(params.box_c) * loss +
           Scalar(params.tau) * nuclear_norm(model.w);
}

template <typename Scalar>
Scalar objective(const RmrModel<Scalar> &model, const std::vector<MatrixSample<Scalar>> &samples,
                 const RmrHyperParams &params) {
    const Design<Scalar> d = make_design(samples);
    return objective(model, d.stacked, d.labels, params);
}

/// S = (1/rho) U D_tau(rho W - Lambda) V^T, the minimiser of
/// tau ||S||_* + tr(Lambda^T S) + rho/2 ||W - S||_F^2.
template <typename Scalar>
Mat<Scalar> update_s(const Mat<Scalar> &w, const Mat<Scalar> &lambda_dual, Scalar tau, Scalar rho) {
    require_same_shape(w, lambda_dual, "update_s");
    if (!(rho > Scalar(0))) throw ContractViolation("update_s: rho must be > 0");
    return singular_value_shrink(Mat<Scalar>(rho * w - lambda_dual), tau) / rho;
}

template <typename Scalar>
struct WStep {
    RmrModel<Scalar> model;
    smo::DualState<Scalar> dual;
};

/// (W, b) = argmin H(W, b) - tr(Lambda^T W) + rho/2 ||W - S||_F^2 via the dual QP.
template <typename Scalar>
WStep<Scalar> update_w_b(const Design<Scalar> &design, const Mat<Scalar> &s_hat,
                         const Mat<Scalar> &lambda_hat, const RmrHyperParams &params,
                         const std::optional<Vec<Scalar>> &warm_beta = std::nullopt,
                         bool check_psd = true) {
    const Scalar rho = Scalar(params.rho), eps = Scalar(params.epsilon);
    const auto qp = smo::build_rmr_qp(design, lambda_hat, s_hat, rho, eps, Scalar(params.box_c));
    smo::SmoOptions opt;
    opt.kkt_tol = params.kkt_tol;
    opt.max_passes = params.smo_max_passes;
    opt.check_psd = check_psd;
    WStep<Scalar> step;
    step.dual = smo::solve(qp, opt, warm_beta);
    const Vec<Scalar> wvec =
        (design.stacked.transpose() * step.dual.beta + vectorize(Mat<Scalar>(lambda_hat + rho * s_hat))) /
        (Scalar(1) + rho);
    step.model.w = unvectorize(wvec, design.rows, design.cols);
    const Vec<Scalar> f = design.stacked * wvec;
    step.model.b = smo::recover_bias_or_midpoint(step.dual, qp, f, design.labels, eps);
    return step;
}

template <typename Scalar>
WStep<Scalar> update_w_b(const std::vector<MatrixSample<Scalar>> &samples, const Mat<Scalar> &s_hat,
                         const Mat<Scalar> &lambda_hat, const RmrHyperParams &params) {
    return update_w_b(make_design(samples), s_hat, lambda_hat, params);
}

/// ADMM with restart. Starts from W = S = Lambda = 0, t = 1; stops once
/// ||W - S||_F and rho ||S - S_hat||_F are both <= primal_tol max(1, ||W||_F).
template <typename Scalar>
RmrFit<Scalar> fit(const Design<Scalar> &design, const RmrHyperParams &params,
                   const AdmmTraceSink<Scalar> &trace = {}) {
    validate(params);
    if (design.size() == 0) throw ContractViolation("rmr::fit: no samples");
    const Scalar rho = Scalar(params.rho), tau = Scalar(params.tau), eta = Scalar(params.eta);
    const Eigen::Index p = design.rows, q = design.cols;

    // PSD of the Gram matrix is checked once; every QP shares it up to scale.
    smo::validate(smo::DualQp<Scalar>{design.gram, Vec<Scalar>::Zero(design.size()),
                                      Vec<Scalar>::Zero(design.size()), Scalar(params.box_c)},
                  true);

    AdmmState<Scalar> st;
    st.w = Mat<Scalar>::Zero(p, q);
    st.s = st.lambda_dual = st.s_hat = st.lambda_hat = st.s_prev = st.lambda_prev = st.w;
    st.beta = Vec<Scalar>::Zero(design.size());

    RmrFit<Scalar> out;
    for (std::size_t k = 0; k < params.max_iters; ++k) {
        const Mat<Scalar> s_hat = st.s_hat, lambda_hat = st.lambda_hat;

        auto step = update_w_b(design, s_hat, lambda_hat, params,
                               std::optional<Vec<Scalar>>(st.beta), false);
        st.w = std::move(step.model.w);
        st.b = step.model.b;
        st.beta = std::move(step.dual.beta);

        st.s = update_s(st.w, lambda_hat, tau, rho);
        st.lambda_dual = lambda_hat - rho * (st.w - st.s);

        Scalar c = (st.lambda_dual - lambda_hat).squaredNorm() / rho +
                   rho * (st.s - s_hat).squaredNorm();
        const Scalar c_prev = st.combined_residual_c;
        if (c < eta * c_prev) {
            const Scalar t_next =
                (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * st.momentum_t * st.momentum_t)) / Scalar(2);
            const Scalar m = (st.momentum_t - Scalar(1)) / t_next;
            st.s_hat = st.s + m * (st.s - st.s_prev);
            st.lambda_hat = st.lambda_dual + m * (st.lambda_dual - st.lambda_prev);
            st.momentum_t = t_next;
            st.restarted = false;
        } else {
            st.momentum_t = Scalar(1);
            st.s_hat = st.s_prev;
            st.lambda_hat = st.lambda_prev;
            c = c_prev / eta;
            st.restarted = true;
        }
        st.combined_residual_c = c;
        st.s_prev = st.s;
        st.lambda_prev = st.lambda_dual;
        st.iter = k;

        const Scalar primal = (st.w - st.s).norm();
        const Scalar dual = rho * (st.s - s_hat).norm();
        const Scalar scale = std::max(Scalar(1), st.w.norm());
        out.iterations = k + 1;
        out.primal_residual = primal;
        out.dual_residual = dual;

        if (trace) {
            const RmrModel<Scalar> m{st.w, st.b};
            trace(AdmmTraceRow{k, double(objective(m, design.stacked, design.labels, params)),
                               double(primal), double(c), st.restarted},
                  st);
        }
        if (primal <= Scalar(params.primal_tol) * scale && dual <= Scalar(params.primal_tol) * scale) {
            out.converged = true;
            break;
        }
    }
    out.model = RmrModel<Scalar>{st.w, st.b};
    out.state = std::move(st);
    return out;
}

template <typename Scalar>
RmrFit<Scalar> fit(const std::vector<MatrixSample<Scalar>> &samples, const RmrHyperParams &params,
                   const AdmmTraceSink<Scalar> &trace = {}) {
    if (samples.empty()) throw ContractViolation("rmr::fit: no samples");
    return fit(make_design(samples), params, trace);
}

} // namespace rmr
