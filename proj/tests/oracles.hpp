#pragma once

// Reference implementations used only by the tests. None of them call into
// the library's solvers; they are slow, simple, and written from the
// defining optimisation problems.

#include <rmr/linalg.hpp>
#include <rmr/sample.hpp>
#include <rmr/smo.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using rmr::Matrix;
using rmr::Vector;

/// argmin_s t |s| + 1/2 (s - v)^2 by comparing the three candidate
/// stationary points of the piecewise quadratic.
inline double prox_abs(double v, double t) {
    auto f = [&](double s) { return t * std::abs(s) + 0.5 * (s - v) * (s - v); };
    // stationary on s > 0 only at v - t, on s < 0 only at v + t; kink at 0
    double best = 0.0;
    if (v - t > 0 && f(v - t) < f(best)) best = v - t;
    if (v + t < 0 && f(v + t) < f(best)) best = v + t;
    return best;
}

/// Singular value shrinkage through a one-sided Jacobi SVD and prox_abs on
/// every singular value (negative outputs are impossible since sigma >= 0).
inline Matrix svt(const Matrix &m, double t) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(m), Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd s = svd.singularValues();
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = prox_abs(s(i), t);
    return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

inline Matrix soft(const Matrix &m, double t) {
    return m.unaryExpr([t](double v) { return prox_abs(v, t); });
}

// ------------------------------------------------------------------ QP

/// Full 2n-variable form of the dual: H = [K -K; -K K], c = [p; p*],
/// 0 <= x <= C, a^T x = 0 with a = [1; -1].
struct FullQp {
    Eigen::MatrixXd h;
    Eigen::VectorXd c;
    Eigen::VectorXd a;
    double box;
};

inline FullQp expand(const rmr::smo::DualQp<double> &qp) {
    const Eigen::Index n = qp.size();
    FullQp f;
    f.h.resize(2 * n, 2 * n);
    f.h << qp.gram, -qp.gram, -qp.gram, qp.gram;
    f.c.resize(2 * n);
    f.c << qp.lin_pos, qp.lin_neg;
    f.a.resize(2 * n);
    f.a << Eigen::VectorXd::Ones(n), -Eigen::VectorXd::Ones(n);
    f.box = qp.box;
    return f;
}

inline double objective(const FullQp &f, const Eigen::VectorXd &x) {
    return 0.5 * x.dot(f.h * x) + f.c.dot(x);
}

/// Euclidean projection onto {0 <= x <= C} cap {a^T x = 0}: x(nu) =
/// clip(z - nu a) with a^T x(nu) decreasing in nu, located by bisection.
inline Eigen::VectorXd project(const FullQp &f, const Eigen::VectorXd &z) {
    auto at = [&](double nu) { return (z - nu * f.a).cwiseMax(0.0).cwiseMin(f.box).eval(); };
    double lo = -(z.cwiseAbs().maxCoeff() + f.box) - 1, hi = -lo;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (f.a.dot(at(mid)) > 0) lo = mid;
        else hi = mid;
    }
    return at(0.5 * (lo + hi));
}

/// Accelerated projected gradient with adaptive restart.
inline Eigen::VectorXd solve_pg(const FullQp &f, int iters = 20000) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(f.h, Eigen::EigenvaluesOnly);
    const double lip = std::max(eig.eigenvalues().maxCoeff(), 1e-12);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(f.c.size()), y = x, x_prev = x;
    double t = 1;
    for (int k = 0; k < iters; ++k) {
        x = project(f, y - (f.h * y + f.c) / lip);
        if ((f.h * y + f.c).dot(x - x_prev) > 0) { // restart on non-descent
            t = 1;
            y = x;
        } else {
            const double t_next = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
            y = x + ((t - 1) / t_next) * (x - x_prev);
            t = t_next;
        }
        x_prev = x;
    }
    return x;
}

/// Maximal-violating-pair gap of the full problem at x, from its own
/// gradient: max_{I_up} -a_i g_i - min_{I_low} -a_i g_i.
inline double kkt_gap(const FullQp &f, const Eigen::VectorXd &x, double slack = 1e-12) {
    const Eigen::VectorXd g = f.h * x + f.c;
    double up = -std::numeric_limits<double>::infinity(), low = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double v = -f.a(i) * g(i);
        const bool below = x(i) < f.box - slack, above = x(i) > slack;
        const bool in_up = f.a(i) > 0 ? below : above;
        const bool in_low = f.a(i) > 0 ? above : below;
        if (in_up) up = std::max(up, v);
        if (in_low) low = std::min(low, v);
    }
    if (!std::isfinite(up) || !std::isfinite(low)) return 0;
    return std::max(0.0, up - low);
}

// ------------------------------------------------------------------ RMR primal

/// 1/2 ||W||^2 + C sum (|r_i| - eps)_+ + tau ||W||_* evaluated directly.
inline double rmr_primal(const Matrix &w, double b, const std::vector<rmr::MatrixSample<double>> &s,
                         double c, double eps, double tau) {
    double loss = 0;
    for (const auto &x : s) {
        const double r = (w.array() * x.x.array()).sum() + b - x.y;
        loss += std::max(std::abs(r) - eps, 0.0);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd{Eigen::MatrixXd(w)};
    return 0.5 * w.squaredNorm() + c * loss + tau * svd.singularValues().sum();
}

/// Proximal subgradient method on the primal: subgradient steps on the
/// smooth-plus-hinge part, prox of tau ||.||_* via svt, best iterate kept.
inline double rmr_primal_subgradient(const std::vector<rmr::MatrixSample<double>> &s, double c,
                                     double eps, double tau, int iters, Matrix *w_out = nullptr) {
    const Eigen::Index p = s.front().x.rows(), q = s.front().x.cols();
    Matrix w = Matrix::Zero(p, q);
    double b = 0;
    double best = rmr_primal(w, b, s, c, eps, tau);
    Matrix best_w = w;
    for (int k = 1; k <= iters; ++k) {
        Matrix gw = w;
        double gb = 0;
        for (const auto &x : s) {
            const double r = (w.array() * x.x.array()).sum() + b - x.y;
            if (std::abs(r) > eps) {
                const double sg = r > 0 ? c : -c;
                gw += sg * x.x;
                gb += sg;
            }
        }
        const double step = 1.0 / (std::sqrt(double(k)) * (1.0 + c * double(s.size())));
        w = svt(Matrix(w - step * gw), step * tau);
        b -= step * gb;
        const double f = rmr_primal(w, b, s, c, eps, tau);
        if (f < best) {
            best = f;
            best_w = w;
        }
    }
    if (w_out) *w_out = best_w;
    return best;
}

// ------------------------------------------------------------------ calculus

/// Central-difference gradient of a scalar function of a matrix.
inline Matrix finite_difference(const std::function<double(const Matrix &)> &f, const Matrix &at,
                                double h = 1e-5) {
    Matrix g(at.rows(), at.cols());
    Matrix x = at;
    for (Eigen::Index i = 0; i < at.rows(); ++i)
        for (Eigen::Index j = 0; j < at.cols(); ++j) {
            const double keep = x(i, j);
            x(i, j) = keep + h;
            const double fp = f(x);
            x(i, j) = keep - h;
            const double fm = f(x);
            x(i, j) = keep;
            g(i, j) = (fp - fm) / (2 * h);
        }
    return g;
}

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64 &rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
    return m;
}

/// Numerical rank with a relative singular-value cutoff, via Jacobi SVD.
inline Eigen::Index rank(const Matrix &m, double cutoff = 1e-8) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd{Eigen::MatrixXd(m)};
    const auto &s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0) return 0;
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > cutoff * s(0)) ++r;
    return r;
}

} // namespace oracle
