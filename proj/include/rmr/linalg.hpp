#pragma once

#include <rmr/errors.hpp>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

namespace rmr {

/// Dense row-major matrix. Row-major order is also the vectorisation order
/// used whenever a predictor is flattened into a row of a stacked design.
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = Mat<double>;
using Vector = Vec<double>;

/// Relative cutoff below which singular values are treated as exact zeros.
inline constexpr double kSingularValueCutoff = 1e-12;

template <typename Scalar>
struct SvdFactors {
    Mat<Scalar> u;     ///< m x r, orthonormal columns
    Vec<Scalar> sigma; ///< non-increasing, non-negative
    Mat<Scalar> v;     ///< n x r, orthonormal columns
};

template <typename Scalar>
struct Norms {
    Scalar frobenius;
    Scalar nuclear;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived> &m) {
    return m.allFinite();
}

template <typename A, typename B>
void require_same_shape(const Eigen::MatrixBase<A> &a, const Eigen::MatrixBase<B> &b,
                        const char *what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ContractViolation(std::string(what) + ": shape mismatch " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
}

/// Thin SVD. Singular values below kSingularValueCutoff * sigma_max are
/// reported as zero.
template <typename Derived>
SvdFactors<typename Derived::Scalar> svd(const Eigen::MatrixBase<Derived> &m) {
    using Scalar = typename Derived::Scalar;
    if (!all_finite(m))
        throw ContractViolation("svd: input contains non-finite entries");
    using ColMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Eigen::BDCSVD<ColMat> solver(ColMat(m), Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (solver.info() != Eigen::Success)
        throw NumericalFailure("svd: decomposition did not converge");

    SvdFactors<Scalar> f{solver.matrixU(), solver.singularValues(), solver.matrixV()};
    if (!f.u.allFinite() || !f.v.allFinite() || !f.sigma.allFinite())
        throw NumericalFailure("svd: non-finite factors");
    if (f.sigma.size() > 0) {
        const Scalar cut = Scalar(kSingularValueCutoff) * f.sigma(0);
        for (Eigen::Index i = 0; i < f.sigma.size(); ++i)
            if (f.sigma(i) < cut) f.sigma(i) = Scalar(0);
    }
    return f;
}

/// Proximal operator of threshold * nuclear norm: U max(Sigma - threshold, 0) V^T.
template <typename Derived>
Mat<typename Derived::Scalar> singular_value_shrink(const Eigen::MatrixBase<Derived> &m,
                                                    typename Derived::Scalar threshold) {
    using Scalar = typename Derived::Scalar;
    if (!(threshold >= Scalar(0)))
        throw ContractViolation("singular_value_shrink: threshold must be >= 0");
    if (m.size() == 0) return Mat<Scalar>(m.rows(), m.cols());
    if (threshold == Scalar(0)) {
        if (!all_finite(m)) throw ContractViolation("svd: input contains non-finite entries");
        return m;
    }
    const auto f = svd(m);
    Eigen::Index keep = 0;
    while (keep < f.sigma.size() && f.sigma(keep) > threshold) ++keep;
    if (keep == 0) return Mat<Scalar>::Zero(m.rows(), m.cols());
    const Vec<Scalar> shrunk = f.sigma.head(keep).array() - threshold;
    return f.u.leftCols(keep) * shrunk.asDiagonal() * f.v.leftCols(keep).transpose();
}

/// Entrywise sign(e) * max(|e| - threshold, 0).
template <typename Derived>
Mat<typename Derived::Scalar> soft_threshold(const Eigen::MatrixBase<Derived> &m,
                                             typename Derived::Scalar threshold) {
    using Scalar = typename Derived::Scalar;
    if (!(threshold >= Scalar(0)))
        throw ContractViolation("soft_threshold: threshold must be >= 0");
    return m.unaryExpr([threshold](Scalar e) {
        const Scalar mag = std::abs(e) - threshold;
        return mag > Scalar(0) ? std::copysign(mag, e) : Scalar(0);
    });
}

/// tr(A^T B) = sum_ij a_ij b_ij.
template <typename A, typename B>
typename A::Scalar trace_inner(const Eigen::MatrixBase<A> &a, const Eigen::MatrixBase<B> &b) {
    require_same_shape(a, b, "trace_inner");
    return a.cwiseProduct(b).sum();
}

template <typename Derived>
typename Derived::Scalar nuclear_norm(const Eigen::MatrixBase<Derived> &m) {
    if (m.size() == 0) return 0;
    return svd(m).sigma.sum();
}

template <typename Derived>
Norms<typename Derived::Scalar> norms(const Eigen::MatrixBase<Derived> &m) {
    return {m.norm(), nuclear_norm(m)};
}

/// Row-major flattening of a p x q matrix into a length pq vector.
template <typename Derived>
Vec<typename Derived::Scalar> vectorize(const Eigen::MatrixBase<Derived> &m) {
    using Scalar = typename Derived::Scalar;
    const Mat<Scalar> rm = m;
    return Eigen::Map<const Vec<Scalar>>(rm.data(), rm.size());
}

/// Inverse of vectorize.
template <typename Derived>
Mat<typename Derived::Scalar> unvectorize(const Eigen::MatrixBase<Derived> &v, Eigen::Index rows,
                                          Eigen::Index cols) {
    using Scalar = typename Derived::Scalar;
    if (v.size() != rows * cols)
        throw ContractViolation("unvectorize: length does not match rows*cols");
    const Vec<Scalar> dense = v;
    return Eigen::Map<const Mat<Scalar>>(dense.data(), rows, cols);
}

} // namespace rmr
