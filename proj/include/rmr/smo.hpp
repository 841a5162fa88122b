#pragma once

// Sequential minimal optimisation for the box-constrained epsilon-SVR dual
//
//   min  1/2 x^T H x + c^T x,   0 <= x <= C,   sum(alpha) - sum(alpha*) = 0
//
// with x = [alpha; alpha*], c = [p; p*] and H = [K -K; -K K]. H is never
// formed: every quantity is expressed through beta = alpha - alpha* and the
// n x n kernel K.

#include <rmr/errors.hpp>
#include <rmr/linalg.hpp>
#include <rmr/sample.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace rmr::smo {

template <typename Scalar>
struct DualQp {
    Mat<Scalar> gram;    ///< K, symmetric positive semidefinite
    Vec<Scalar> lin_pos; ///< p, linear term on alpha
    Vec<Scalar> lin_neg; ///< p*, linear term on alpha*
    Scalar box{};        ///< C

    Eigen::Index size() const { return gram.rows(); }
};

template <typename Scalar>
struct DualState {
    Vec<Scalar> alpha;
    Vec<Scalar> alpha_star;
    Vec<Scalar> beta; ///< alpha - alpha*
    std::size_t pair_updates = 0;
    Scalar violation{}; ///< final maximal-violating-pair gap
};

struct SmoOptions {
    double kkt_tol = 1e-6;
    /// Pair-update budget; 0 selects 10 n^2.
    std::size_t max_passes = 0;
    /// Verify the kernel is PSD (costs an eigendecomposition).
    bool check_psd = true;
    /// Fail loudly if a pair update ever increases the dual objective.
    bool check_descent = true;
    /// After every finish_every * n pair updates, run the active-set finisher
    /// from the current iterate; 0 disables it.
    std::size_t finish_every = 10;
};

template <typename Scalar>
void validate(const DualQp<Scalar> &qp, bool check_psd) {
    const Eigen::Index n = qp.gram.rows();
    if (n == 0 || qp.gram.cols() != n) throw ContractViolation("DualQp: gram must be square, n > 0");
    if (qp.lin_pos.size() != n || qp.lin_neg.size() != n)
        throw ContractViolation("DualQp: linear terms must have length n");
    if (!(qp.box > Scalar(0)) || !std::isfinite(double(qp.box)))
        throw ContractViolation("DualQp: box C must be finite and > 0");
    if (!qp.gram.allFinite() || !qp.lin_pos.allFinite() || !qp.lin_neg.allFinite())
        throw ContractViolation("DualQp: non-finite entries");
    if (((qp.lin_pos + qp.lin_neg).array() < Scalar(0)).any())
        throw ContractViolation("DualQp: tube half-widths (p + p*)/2 must be >= 0");
    const Scalar scale = std::max(Scalar(1), qp.gram.cwiseAbs().maxCoeff());
    if ((qp.gram - qp.gram.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-10) * scale)
        throw ContractViolation("DualQp: gram is not symmetric");
    if (check_psd) {
        using ColMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
        Eigen::SelfAdjointEigenSolver<ColMat> eig(ColMat(qp.gram), Eigen::EigenvaluesOnly);
        if (eig.info() != Eigen::Success) throw NumericalFailure("DualQp: eigen solve failed");
        const Scalar floor = -Scalar(1e-8) * std::max(Scalar(1), qp.gram.trace());
        if (eig.eigenvalues().minCoeff() < floor)
            throw ContractViolation("DualQp: gram is not positive semidefinite");
    }
}

/// Dual objective 1/2 beta^T K beta + p^T alpha + p*^T alpha*.
template <typename Scalar>
Scalar dual_objective(const DualQp<Scalar> &qp, const DualState<Scalar> &s) {
    return Scalar(0.5) * s.beta.dot(qp.gram * s.beta) + qp.lin_pos.dot(s.alpha) +
           qp.lin_neg.dot(s.alpha_star);
}

namespace detail {

// Solver state over the 2n stacked variables; index t < n is alpha_t,
// t >= n is alpha*_{t-n}, with sign z_t = +1 / -1 respectively.
template <typename Scalar>
class PairSolver {
  public:
    PairSolver(const DualQp<Scalar> &qp, const Vec<Scalar> &beta0)
        : qp_(qp), n_(qp.size()), c_(qp.box), x_(2 * qp.size()), grad_(2 * qp.size()) {
        for (Eigen::Index i = 0; i < n_; ++i) {
            x_(i) = std::max(beta0(i), Scalar(0));
            x_(i + n_) = std::max(-beta0(i), Scalar(0));
        }
        beta_ = beta0;
        f_ = qp.gram * beta_;
        refresh_gradient();
    }

    /// Returns the final violation gap; throws ConvergenceFailure on budget exhaustion.
    Scalar run(const SmoOptions &opt) {
        const std::size_t budget =
            opt.max_passes ? opt.max_passes : std::size_t(10) * std::size_t(n_) * std::size_t(n_);
        const Scalar tol = Scalar(opt.kkt_tol);
        for (;;) {
            Eigen::Index i = -1, j = -1;
            const Scalar gap = select(i, j);
            if (gap <= tol || i < 0 || j < 0) return std::max(gap, Scalar(0));
            if (updates_ >= budget)
                throw ConvergenceFailure("smo: pair-update budget of " + std::to_string(budget) +
                                             " exhausted with KKT gap " + std::to_string(double(gap)),
                                         double(gap));
            update_pair(i, j, opt.check_descent);
            ++updates_;
            if (opt.finish_every && ++since_finish_ >= opt.finish_every * std::size_t(n_)) {
                since_finish_ = 0;
                finish(std::size_t(4) * std::size_t(n_) + 16);
            }
        }
    }

    DualState<Scalar> state(Scalar gap) const {
        DualState<Scalar> s;
        s.beta = beta_;
        // Complementary split: at most one of alpha_i, alpha*_i is nonzero.
        s.alpha = beta_.cwiseMax(Scalar(0));
        s.alpha_star = (-beta_).cwiseMax(Scalar(0));
        s.pair_updates = updates_;
        s.violation = gap;
        return s;
    }

  private:
    Scalar sign(Eigen::Index t) const { return t < n_ ? Scalar(1) : Scalar(-1); }
    Eigen::Index sample(Eigen::Index t) const { return t < n_ ? t : t - n_; }
    Scalar lin(Eigen::Index t) const { return t < n_ ? qp_.lin_pos(t) : qp_.lin_neg(t - n_); }
    bool in_up(Eigen::Index t) const { return t < n_ ? x_(t) < c_ : x_(t) > Scalar(0); }
    bool in_low(Eigen::Index t) const { return t < n_ ? x_(t) > Scalar(0) : x_(t) < c_; }

    void refresh_gradient() {
        for (Eigen::Index t = 0; t < 2 * n_; ++t) grad_(t) = lin(t) + sign(t) * f_(sample(t));
    }

    // First index: maximal violator. Second: largest second-order gain among
    // indices that form a violating pair with it. Returns the MVP gap.
    Scalar select(Eigen::Index &i, Eigen::Index &j) const {
        Scalar gmax = -std::numeric_limits<Scalar>::infinity();
        Scalar gmin = std::numeric_limits<Scalar>::infinity();
        for (Eigen::Index t = 0; t < 2 * n_; ++t) {
            const Scalar v = -sign(t) * grad_(t);
            if (in_up(t) && v > gmax) {
                gmax = v;
                i = t;
            }
            if (in_low(t) && v < gmin) gmin = v;
        }
        if (i < 0) return Scalar(0);
        const Eigen::Index si = sample(i);
        Scalar best = std::numeric_limits<Scalar>::infinity();
        for (Eigen::Index t = 0; t < 2 * n_; ++t) {
            if (!in_low(t)) continue;
            const Scalar b = gmax + sign(t) * grad_(t);
            if (b <= Scalar(0)) continue;
            const Eigen::Index st = sample(t);
            Scalar a = qp_.gram(si, si) + qp_.gram(st, st) - Scalar(2) * qp_.gram(si, st);
            if (a <= Scalar(0)) a = kTau;
            const Scalar gain = -(b * b) / a;
            if (gain < best) {
                best = gain;
                j = t;
            }
        }
        return gmax - gmin;
    }

    Scalar q(Eigen::Index s, Eigen::Index t) const {
        return sign(s) * sign(t) * qp_.gram(sample(s), sample(t));
    }

    void update_pair(Eigen::Index i, Eigen::Index j, bool check_descent) {
        const Scalar xi_old = x_(i), xj_old = x_(j);
        Scalar &xi = x_(i);
        Scalar &xj = x_(j);
        const Scalar qii = q(i, i), qjj = q(j, j), qij = q(i, j);
        if (sign(i) != sign(j)) {
            Scalar quad = qii + qjj + Scalar(2) * qij;
            if (quad <= Scalar(0)) quad = kTau;
            const Scalar delta = (-grad_(i) - grad_(j)) / quad;
            const Scalar diff = xi - xj;
            xi += delta;
            xj += delta;
            if (diff > 0) {
                if (xj < 0) { xj = 0; xi = diff; }
            } else {
                if (xi < 0) { xi = 0; xj = -diff; }
            }
            if (diff > 0) {
                if (xi > c_) { xi = c_; xj = c_ - diff; }
            } else {
                if (xj > c_) { xj = c_; xi = c_ + diff; }
            }
        } else {
            Scalar quad = qii + qjj - Scalar(2) * qij;
            if (quad <= Scalar(0)) quad = kTau;
            const Scalar delta = (grad_(i) - grad_(j)) / quad;
            const Scalar sum = xi + xj;
            xi -= delta;
            xj += delta;
            if (sum > c_) {
                if (xi > c_) { xi = c_; xj = sum - c_; }
            } else {
                if (xj < 0) { xj = 0; xi = sum; }
            }
            if (sum > c_) {
                if (xj > c_) { xj = c_; xi = sum - c_; }
            } else {
                if (xi < 0) { xi = 0; xj = sum; }
            }
        }
        const Scalar di = xi - xi_old, dj = xj - xj_old;
        if (check_descent) {
            const Scalar lin_part = grad_(i) * di + grad_(j) * dj;
            const Scalar quad_part = Scalar(0.5) * (qii * di * di + qjj * dj * dj) + qij * di * dj;
            const Scalar change = lin_part + quad_part;
            // Rounding of x itself perturbs the realised step by ~ulp(x).
            const Scalar ulp_term = Scalar(8) * std::numeric_limits<Scalar>::epsilon() *
                                    (std::abs(grad_(i)) * (std::abs(xi) + c_) +
                                     std::abs(grad_(j)) * (std::abs(xj) + c_));
            const Scalar scale = std::abs(grad_(i) * di) + std::abs(grad_(j) * dj) + std::abs(quad_part);
            if (change > Scalar(1e-9) * scale + ulp_term)
                throw NumericalFailure("smo: pair update increased the dual objective");
        }
        const Eigen::Index si = sample(i), sj = sample(j);
        const Scalar dbi = sign(i) * di, dbj = sign(j) * dj;
        beta_(si) += dbi;
        beta_(sj) += dbj;
        if (dbi != Scalar(0)) f_ += qp_.gram.col(si) * dbi;
        if (dbj != Scalar(0)) f_ += qp_.gram.col(sj) * dbj;
        refresh_gradient();
    }

    // In beta, with the complementary split, the objective is
    //   phi(b) = 1/2 b^T K b + sum_i q_i b_i + e_i |b_i|,
    // q = (p - p*)/2 and e = (p + p*)/2. finish() is a primal active-set
    // method on phi: the status of each multiplier (zero, free with a sign,
    // or at -C / +C) fixes phi to a quadratic on the free block, whose
    // equality-constrained minimiser is approached by a step clipped at the
    // first status change. At a block minimiser the most violating fixed
    // multiplier is released. Every accepted step lowers phi.
    enum Status : signed char { kLower = -2, kNeg = -1, kZero = 0, kPos = 1, kUpper = 2 };

    Status status_of(Scalar b) const {
        if (b == Scalar(0)) return kZero;
        if (b >= c_) return kUpper;
        if (b <= -c_) return kLower;
        return b > 0 ? kPos : kNeg;
    }

    Scalar q_lin(Eigen::Index i) const { return Scalar(0.5) * (qp_.lin_pos(i) - qp_.lin_neg(i)); }
    Scalar e_tube(Eigen::Index i) const { return Scalar(0.5) * (qp_.lin_pos(i) + qp_.lin_neg(i)); }

    Scalar phi(const Vec<Scalar> &b, const Vec<Scalar> &kb) const {
        Scalar v = Scalar(0.5) * b.dot(kb);
        for (Eigen::Index i = 0; i < n_; ++i) v += q_lin(i) * b(i) + e_tube(i) * std::abs(b(i));
        return v;
    }

    /// Returns true if it reached an optimal active set.
    bool finish(std::size_t max_steps) {
        using ColMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
        std::vector<Status> st(static_cast<std::size_t>(n_));
        for (Eigen::Index i = 0; i < n_; ++i) st[std::size_t(i)] = status_of(beta_(i));
        Vec<Scalar> beta = beta_, kb = f_;
        Scalar phi_cur = phi(beta, kb);
        const Scalar scale = std::max({Scalar(1), qp_.gram.diagonal().maxCoeff() * c_,
                                       qp_.lin_pos.cwiseAbs().maxCoeff(),
                                       qp_.lin_neg.cwiseAbs().maxCoeff()});
        const Scalar tiny = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * scale;
        bool optimal = false;

        for (std::size_t step = 0; step < max_steps; ++step) {
            std::vector<Eigen::Index> fr;
            for (Eigen::Index i = 0; i < n_; ++i)
                if (st[std::size_t(i)] == kPos || st[std::size_t(i)] == kNeg) fr.push_back(i);
            const Eigen::Index m = Eigen::Index(fr.size());
            if (m == 0) break;

            // Target on the free block: K_FF b_F + nu 1 = -(K_FB b_B + q_F + s_F e_F),
            // 1^T b_F = -1^T b_B.
            ColMat kkt = ColMat::Zero(m + 1, m + 1);
            Vec<Scalar> rhs(m + 1);
            Scalar fixed_sum = 0;
            for (Eigen::Index i = 0; i < n_; ++i)
                if (st[std::size_t(i)] != kPos && st[std::size_t(i)] != kNeg) fixed_sum += beta(i);
            for (Eigen::Index a = 0; a < m; ++a) {
                const Eigen::Index i = fr[std::size_t(a)];
                Scalar kfb = kb(i);
                for (Eigen::Index b = 0; b < m; ++b) {
                    const Eigen::Index j = fr[std::size_t(b)];
                    kkt(a, b) = qp_.gram(i, j);
                    kfb -= qp_.gram(i, j) * beta(j);
                }
                kkt(a, m) = kkt(m, a) = Scalar(1);
                const Scalar sgn = st[std::size_t(i)] == kPos ? Scalar(1) : Scalar(-1);
                rhs(a) = -(kfb + q_lin(i) + sgn * e_tube(i));
            }
            rhs(m) = -fixed_sum;

            // Descent direction on the free block. If the block quadratic has
            // a minimiser (solved by LU with refinement), head for it.
            // Otherwise it is unbounded below: the least-squares residual
            // (d, t) satisfies K_FF d = -t 1 and 1^T d = 0, so phi is linear
            // along d with slope -||res||^2 until a multiplier hits a bound.
            const Scalar rhs_scale = std::max(Scalar(1), rhs.cwiseAbs().maxCoeff());
            Vec<Scalar> dir(m);
            Scalar theta_cap = 1;
            Vec<Scalar> sol;
            bool have_target = false;
            {
                const Eigen::PartialPivLU<ColMat> lu(kkt);
                sol = lu.solve(rhs);
                for (int refine = 0; refine < 3 && sol.allFinite(); ++refine)
                    sol += lu.solve(Vec<Scalar>(rhs - kkt * sol));
                have_target = sol.allFinite() &&
                              (rhs - kkt * sol).cwiseAbs().maxCoeff() <= Scalar(1e-12) * rhs_scale;
            }
            if (have_target) {
                for (Eigen::Index a = 0; a < m; ++a) dir(a) = sol(a) - beta(fr[std::size_t(a)]);
            } else {
                const Eigen::CompleteOrthogonalDecomposition<ColMat> cod(kkt);
                const Vec<Scalar> ls = cod.solve(rhs);
                const Vec<Scalar> res = rhs - kkt * ls;
                if (!res.allFinite() || res.head(m).norm() <= tiny) break;
                dir = res.head(m);
                theta_cap = std::numeric_limits<Scalar>::infinity();
            }

            Scalar theta = theta_cap;
            Eigen::Index blocker = -1;
            for (Eigen::Index a = 0; a < m; ++a) {
                const Eigen::Index i = fr[std::size_t(a)];
                const Scalar d = dir(a);
                if (d == Scalar(0)) continue;
                const bool pos = st[std::size_t(i)] == kPos;
                const Scalar lo = pos ? Scalar(0) : -c_, hi = pos ? c_ : Scalar(0);
                const Scalar lim = d > 0 ? (hi - beta(i)) / d : (lo - beta(i)) / d;
                if (lim < theta) {
                    theta = std::max(lim, Scalar(0));
                    blocker = a;
                }
            }
            if (!std::isfinite(double(theta))) break;
            const bool to_target = theta_cap == Scalar(1) && blocker < 0;
            Vec<Scalar> trial = beta;
            for (Eigen::Index a = 0; a < m; ++a) {
                const Eigen::Index i = fr[std::size_t(a)];
                trial(i) = std::clamp(beta(i) + theta * dir(a), -c_, c_);
            }
            if (blocker >= 0) {
                const Eigen::Index i = fr[std::size_t(blocker)];
                const bool pos = st[std::size_t(i)] == kPos;
                const bool up = dir(blocker) > 0;
                trial(i) = pos ? (up ? c_ : Scalar(0)) : (up ? Scalar(0) : -c_);
            }
            // Keep sum(beta) = 0 exact by absorbing rounding into a free index
            // that is not at a bound.
            const Scalar drift = trial.sum();
            if (drift != Scalar(0)) {
                Eigen::Index sink = -1;
                for (Eigen::Index a = 0; a < m; ++a) {
                    const Eigen::Index i = fr[std::size_t(a)];
                    if (a != blocker && std::abs(trial(i) - drift) < c_ &&
                        (trial(i) - drift) * (st[std::size_t(i)] == kPos ? 1 : -1) > 0) {
                        sink = i;
                        break;
                    }
                }
                if (sink < 0) break;
                trial(sink) -= drift;
            }
            const Vec<Scalar> ktrial = qp_.gram * trial;
            const Scalar phi_trial = phi(trial, ktrial);
            if (phi_trial > phi_cur + tiny * std::max(Scalar(1), trial.cwiseAbs().sum())) break;
            beta = trial;
            kb = ktrial;
            phi_cur = std::min(phi_cur, phi_trial);

            if (blocker >= 0) {
                const Eigen::Index i = fr[std::size_t(blocker)];
                st[std::size_t(i)] = status_of(beta(i));
                continue;
            }
            if (!to_target) continue;
            // Block minimiser reached; nu is the bias. Release the worst
            // violating fixed multiplier, if any.
            const Scalar nu = sol(m);
            Scalar worst = tiny;
            Eigen::Index pick = -1;
            Status to = kZero;
            for (Eigen::Index i = 0; i < n_; ++i) {
                const Status s = st[std::size_t(i)];
                if (s == kPos || s == kNeg) continue;
                const Scalar r = kb(i) + q_lin(i) + nu, e = e_tube(i);
                Scalar v = 0;
                Status dest = kZero;
                if (s == kZero) {
                    v = std::abs(r) - e;
                    dest = r > 0 ? kNeg : kPos;
                } else if (s == kUpper) {
                    v = r + e;
                    dest = kPos;
                } else {
                    v = e - r;
                    dest = kNeg;
                }
                if (v > worst) {
                    worst = v;
                    pick = i;
                    to = dest;
                }
            }
            if (pick < 0) {
                optimal = true;
                break;
            }
            st[std::size_t(pick)] = to;
        }

        if (phi_cur <= phi(beta_, f_)) {
            beta_ = beta;
            f_ = kb;
            for (Eigen::Index i = 0; i < n_; ++i) {
                x_(i) = std::max(beta_(i), Scalar(0));
                x_(i + n_) = std::max(-beta_(i), Scalar(0));
            }
            refresh_gradient();
        }
        return optimal;
    }

    static constexpr Scalar kTau = Scalar(1e-12);
    std::size_t since_finish_ = 0;

    const DualQp<Scalar> &qp_;
    Eigen::Index n_;
    Scalar c_;
    Vec<Scalar> x_, grad_, beta_, f_;
    std::size_t updates_ = 0;
};

} // namespace detail

/// Solve the dual to the maximal-violating-pair gap `opt.kkt_tol`.
/// `warm_beta`, if given, must be feasible: |beta_i| <= C and sum(beta) = 0.
template <typename Scalar>
DualState<Scalar> solve(const DualQp<Scalar> &qp, const SmoOptions &opt = {},
                        const std::optional<Vec<Scalar>> &warm_beta = std::nullopt) {
    if (!(opt.kkt_tol > 0)) throw ContractViolation("smo::solve: kkt_tol must be > 0");
    validate(qp, opt.check_psd);
    Vec<Scalar> beta0 = Vec<Scalar>::Zero(qp.size());
    if (warm_beta) {
        if (warm_beta->size() != qp.size())
            throw ContractViolation("smo::solve: warm start has wrong length");
        beta0 = warm_beta->cwiseMax(-qp.box).cwiseMin(qp.box);
        if (std::abs(beta0.sum()) > Scalar(1e-9) * std::max(Scalar(1), qp.box))
            beta0.setZero();
    }
    detail::PairSolver<Scalar> solver(qp, beta0);
    const Scalar gap = solver.run(opt);
    return solver.state(gap);
}

/// b = mean over free support vectors (0 < |beta_i| < C) of
/// y_i - sign(beta_i) eps - tr(W^T X_i).
template <typename Scalar>
Scalar recover_bias(const DualState<Scalar> &state, const DualQp<Scalar> &qp,
                    const Vec<Scalar> &predictions_without_bias, const Vec<Scalar> &labels,
                    Scalar epsilon) {
    const Eigen::Index n = state.beta.size();
    if (predictions_without_bias.size() != n || labels.size() != n)
        throw ContractViolation("recover_bias: length mismatch");
    Scalar sum = 0;
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Scalar mag = std::abs(state.beta(i));
        if (mag > Scalar(0) && mag < qp.box) {
            const Scalar sgn = state.beta(i) > 0 ? Scalar(1) : Scalar(-1);
            sum += labels(i) - sgn * epsilon - predictions_without_bias(i);
            ++count;
        }
    }
    if (count == 0) throw NoFreeSupportVectors("recover_bias: no free support vectors");
    return sum / Scalar(count);
}

/// Midpoint of the interval of biases consistent with the KKT conditions of
/// every bounded or zero multiplier.
template <typename Scalar>
Scalar bias_midpoint(const DualState<Scalar> &state, Scalar box,
                     const Vec<Scalar> &predictions_without_bias, const Vec<Scalar> &labels,
                     Scalar epsilon) {
    Scalar lo = -std::numeric_limits<Scalar>::infinity();
    Scalar hi = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index i = 0; i < state.beta.size(); ++i) {
        const Scalar gap = labels(i) - predictions_without_bias(i);
        const Scalar beta = state.beta(i);
        if (beta >= box) {
            hi = std::min(hi, gap - epsilon);
        } else if (beta <= -box) {
            lo = std::max(lo, gap + epsilon);
        } else {
            lo = std::max(lo, gap - epsilon);
            hi = std::min(hi, gap + epsilon);
        }
    }
    if (std::isfinite(double(lo)) && std::isfinite(double(hi))) return Scalar(0.5) * (lo + hi);
    if (std::isfinite(double(lo))) return lo;
    if (std::isfinite(double(hi))) return hi;
    return Scalar(0);
}

template <typename Scalar>
Scalar recover_bias_or_midpoint(const DualState<Scalar> &state, const DualQp<Scalar> &qp,
                                const Vec<Scalar> &predictions_without_bias,
                                const Vec<Scalar> &labels, Scalar epsilon) {
    try {
        return recover_bias(state, qp, predictions_without_bias, labels, epsilon);
    } catch (const NoFreeSupportVectors &) {
        return bias_midpoint(state, qp.box, predictions_without_bias, labels, epsilon);
    }
}

/// Largest violation of the SVR KKT conditions given a bias. The residual of
/// sample i is (K beta)_i + (p_i - p*_i)/2 + b and its tube half-width is
/// (p_i + p*_i)/2.
template <typename Scalar>
Scalar kkt_violation(const DualQp<Scalar> &qp, const DualState<Scalar> &state, Scalar bias) {
    const Vec<Scalar> f = qp.gram * state.beta;
    Scalar worst = 0;
    for (Eigen::Index i = 0; i < qp.size(); ++i) {
        const Scalar r = f(i) + Scalar(0.5) * (qp.lin_pos(i) - qp.lin_neg(i)) + bias;
        const Scalar eps = Scalar(0.5) * (qp.lin_pos(i) + qp.lin_neg(i));
        const Scalar beta = state.beta(i);
        Scalar v = 0;
        if (beta == Scalar(0)) {
            v = std::abs(r) - eps;
        } else if (beta >= qp.box) {
            v = r + eps;
        } else if (beta > Scalar(0)) {
            v = std::abs(r + eps);
        } else if (beta <= -qp.box) {
            v = eps - r;
        } else {
            v = std::abs(r - eps);
        }
        worst = std::max(worst, v);
    }
    return worst;
}

/// Dual QP of the (W, b) step:
///   K_ij = tr(X_i^T X_j) / (rho + 1)
///   p_i  = eps - y_i + tr[(Lambda + rho S)^T X_i] / (rho + 1)
///   p*_i = eps + y_i - tr[(Lambda + rho S)^T X_i] / (rho + 1)
template <typename Scalar>
DualQp<Scalar> build_rmr_qp(const Design<Scalar> &design, const Mat<Scalar> &lambda_dual,
                            const Mat<Scalar> &s_aux, Scalar rho, Scalar epsilon, Scalar box_c) {
    if (lambda_dual.rows() != design.rows || lambda_dual.cols() != design.cols)
        throw ContractViolation("build_rmr_qp: lambda_dual shape does not match samples");
    require_same_shape(lambda_dual, s_aux, "build_rmr_qp");
    if (!(rho >= Scalar(0))) throw ContractViolation("build_rmr_qp: rho must be >= 0");
    const Scalar scale = Scalar(1) / (rho + Scalar(1));
    const Vec<Scalar> offset =
        (design.stacked * vectorize(Mat<Scalar>(lambda_dual + rho * s_aux))) * scale;
    DualQp<Scalar> qp;
    qp.gram = design.gram * scale;
    qp.lin_pos = (epsilon - design.labels.array() + offset.array()).matrix();
    qp.lin_neg = (epsilon + design.labels.array() - offset.array()).matrix();
    qp.box = box_c;
    return qp;
}

template <typename Scalar>
DualQp<Scalar> build_rmr_qp(const std::vector<MatrixSample<Scalar>> &samples,
                            const Mat<Scalar> &lambda_dual, const Mat<Scalar> &s_aux, Scalar rho,
                            Scalar epsilon, Scalar box_c) {
    return build_rmr_qp(make_design(samples), lambda_dual, s_aux, rho, epsilon, box_c);
}

template <typename Scalar>
struct SvrFit {
    RmrModel<Scalar> model;
    DualState<Scalar> dual;
};

/// Linear-kernel epsilon-SVR on vectorised predictors: W = sum beta_i X_i.
template <typename Scalar>
SvrFit<Scalar> fit_linear_svr(const Design<Scalar> &design, Scalar box_c, Scalar epsilon,
                              const SmoOptions &opt = {}) {
    DualQp<Scalar> qp;
    qp.gram = design.gram;
    qp.lin_pos = (epsilon - design.labels.array()).matrix();
    qp.lin_neg = (epsilon + design.labels.array()).matrix();
    qp.box = box_c;
    SvrFit<Scalar> fit;
    fit.dual = solve(qp, opt);
    const Vec<Scalar> wvec = design.stacked.transpose() * fit.dual.beta;
    fit.model.w = unvectorize(wvec, design.rows, design.cols);
    const Vec<Scalar> f = design.stacked * wvec;
    fit.model.b = recover_bias_or_midpoint(fit.dual, qp, f, design.labels, epsilon);
    return fit;
}

template <typename Scalar>
RmrModel<Scalar> solve_linear_svr(const std::vector<MatrixSample<Scalar>> &samples, Scalar box_c,
                                  Scalar epsilon, double kkt_tol = 1e-6) {
    SmoOptions opt;
    opt.kkt_tol = kkt_tol;
    return fit_linear_svr(make_design(samples), box_c, epsilon, opt).model;
}

} // namespace rmr::smo
