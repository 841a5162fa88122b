#pragma once

#include <stdexcept>
#include <string>

namespace rmr {

/// Caller broke a precondition (shape mismatch, out-of-range parameter).
class ContractViolation : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A decomposition failed to converge or produced non-finite values.
class NumericalFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// An iterative solver exhausted its budget before meeting its tolerance.
class ConvergenceFailure : public std::runtime_error {
  public:
    ConvergenceFailure(const std::string &what, double violation)
        : std::runtime_error(what), violation_(violation) {}
    double violation() const noexcept { return violation_; }

  private:
    double violation_;
};

/// No free support vector exists, so the averaged bias formula is undefined.
class NoFreeSupportVectors : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A metric whose normaliser vanishes (zero-norm truth, no signed days).
class UndefinedMetric : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Malformed text input; row and column are 1-based, 0 when not applicable.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string &what, std::size_t row, std::size_t col)
        : std::runtime_error(what + " (row " + std::to_string(row) + ", column " +
                             std::to_string(col) + ")"),
          detail_(what), row_(row), col_(col) {}
    std::size_t row() const noexcept { return row_; }
    std::size_t col() const noexcept { return col_; }
    /// The message without the position suffix.
    const std::string &detail() const noexcept { return detail_; }

  private:
    std::string detail_;
    std::size_t row_, col_;
};

} // namespace rmr
