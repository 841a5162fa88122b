#pragma once

#include <rmr/linalg.hpp>

#include <vector>

namespace rmr {

/// One (predictor matrix, label) training pair.
template <typename Scalar>
struct MatrixSample {
    Mat<Scalar> x;
    Scalar y{};
};

/// Learned function x -> tr(w^T x) + b.
template <typename Scalar>
struct RmrModel {
    Mat<Scalar> w;
    Scalar b{};
};

template <typename Scalar>
Scalar predict(const RmrModel<Scalar> &model, const Mat<Scalar> &x) {
    require_same_shape(model.w, x, "predict");
    return trace_inner(model.w, x) + model.b;
}

/// Samples flattened into an n x pq design (row i = row-major vec of X_i)
/// together with the unscaled Gram matrix tr(X_i^T X_j).
template <typename Scalar>
struct Design {
    Eigen::Index rows = 0, cols = 0;
    Mat<Scalar> stacked;
    Mat<Scalar> gram;
    Vec<Scalar> labels;

    Eigen::Index size() const { return stacked.rows(); }
};

template <typename Scalar>
Mat<Scalar> stack_predictors(const std::vector<MatrixSample<Scalar>> &samples) {
    if (samples.empty()) throw ContractViolation("stack_predictors: no samples");
    const Eigen::Index p = samples.front().x.rows(), q = samples.front().x.cols();
    Mat<Scalar> d(static_cast<Eigen::Index>(samples.size()), p * q);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto &x = samples[i].x;
        if (x.rows() != p || x.cols() != q)
            throw ContractViolation("stack_predictors: sample " + std::to_string(i) +
                                    " has a different shape");
        if (!x.allFinite())
            throw ContractViolation("stack_predictors: sample " + std::to_string(i) +
                                    " is not finite");
        d.row(static_cast<Eigen::Index>(i)) = vectorize(x).transpose();
    }
    return d;
}

template <typename Scalar>
Design<Scalar> make_design(const std::vector<MatrixSample<Scalar>> &samples) {
    Design<Scalar> d;
    d.stacked = stack_predictors(samples);
    d.rows = samples.front().x.rows();
    d.cols = samples.front().x.cols();
    d.gram = d.stacked * d.stacked.transpose();
    d.labels.resize(d.stacked.rows());
    for (std::size_t i = 0; i < samples.size(); ++i) d.labels(Eigen::Index(i)) = samples[i].y;
    if (!d.labels.allFinite()) throw ContractViolation("make_design: non-finite label");
    return d;
}

/// Design from an already stacked n x pq matrix.
template <typename Scalar>
Design<Scalar> make_design(Mat<Scalar> stacked, Eigen::Index rows, Eigen::Index cols,
                           Vec<Scalar> labels) {
    if (stacked.rows() == 0) throw ContractViolation("make_design: no samples");
    if (stacked.cols() != rows * cols)
        throw ContractViolation("make_design: stacked width must equal rows*cols");
    if (labels.size() != stacked.rows())
        throw ContractViolation("make_design: one label per stacked row required");
    if (!stacked.allFinite() || !labels.allFinite())
        throw ContractViolation("make_design: non-finite input");
    Design<Scalar> d;
    d.rows = rows;
    d.cols = cols;
    d.gram = stacked * stacked.transpose();
    d.stacked = std::move(stacked);
    d.labels = std::move(labels);
    return d;
}

/// Inverse of stack_predictors for the predictors alone.
template <typename Scalar>
std::vector<Mat<Scalar>> unstack(const Mat<Scalar> &stacked, Eigen::Index rows, Eigen::Index cols) {
    std::vector<Mat<Scalar>> out;
    out.reserve(std::size_t(stacked.rows()));
    for (Eigen::Index i = 0; i < stacked.rows(); ++i)
        out.push_back(unvectorize(stacked.row(i).transpose(), rows, cols));
    return out;
}

/// Predictions tr(W^T X_i) for every row of a stacked design, without bias.
template <typename Scalar>
Vec<Scalar> stacked_predictions(const Mat<Scalar> &stacked, const Mat<Scalar> &w) {
    return stacked * vectorize(w);
}

} // namespace rmr
