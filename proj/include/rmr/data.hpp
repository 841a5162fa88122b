#pragma once

// Experiment data plane: shape generators, synthetic trace-regression data,
// financial return ingestion, and evaluation metrics.

#include <rmr/linalg.hpp>
#include <rmr/sample.hpp>

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rmr::data {

using Sample = MatrixSample<double>;
using Rng = std::mt19937_64;

enum class ShapeKind { square, cross, t_shape, triangle, circle, butterfly };

inline constexpr ShapeKind kAllShapes[] = {ShapeKind::square,   ShapeKind::cross,
                                           ShapeKind::t_shape,  ShapeKind::triangle,
                                           ShapeKind::circle,   ShapeKind::butterfly};

std::string_view to_string(ShapeKind kind);
/// Accepts the names printed by to_string; throws ContractViolation otherwise.
ShapeKind parse_shape(std::string_view name);

/// Binary size x size image of the shape. square, cross and t_shape have
/// rank 1, 2 and 2 respectively.
Matrix generate_shape(ShapeKind kind, Eigen::Index size);

struct NoiseSpec {
    double label_noise_scale = 0.1; ///< Laplacian scale sigma; 0 disables
    double corrupt_fraction = 0.0;  ///< fraction of predictors given a block
    Eigen::Index corrupt_block = 4; ///< side of the corrupting block
    std::uint64_t seed = 0;
};

void validate(const NoiseSpec &noise);

/// Inverse-CDF map of u in (-1/2, 1/2): mu - sigma sign(u) ln(1 - 2|u|).
double laplacian_from_uniform(double location, double scale, double u);
double laplacian_sample(double location, double scale, Rng &rng);

struct SyntheticSet {
    std::vector<Sample> samples;     ///< predictors after corruption
    std::vector<Matrix> clean;       ///< predictors before corruption
    std::vector<bool> corrupted;
};

/// X_i with iid standard normal entries, y_i = tr(W^T X_i) + b + Laplace(0, sigma),
/// labels computed from the clean predictors. A `corrupt_fraction` of the
/// predictors then has a block set to 3 (three entry standard deviations).
SyntheticSet generate_synthetic(const Matrix &w_true, double b_true, std::size_t n,
                                const NoiseSpec &noise);

/// Block value used by the corruption model.
inline constexpr double kCorruptionValue = 3.0;

/// ||estimate - truth||_2 / ||truth||_2 over the vectorised arguments.
double rae(const Vector &estimate, const Vector &truth);
double rae(const Matrix &estimate, const Matrix &truth);

/// Fraction of days with matching signs; days with an actual return of
/// exactly zero are excluded.
double pcp(std::span<const double> predicted, std::span<const double> actual);

/// Value of $100 held long on days with a positive predicted return and in
/// cash otherwise.
double d100(std::span<const double> predicted, std::span<const double> actual);

/// Daily returns, one column per index, chronological rows.
struct ReturnsTable {
    std::vector<std::string> names;
    std::vector<std::vector<double>> rows;
};

/// Reads a header row of index names followed by one row of decimal returns
/// per day. A leading column named "date" (any case) is skipped.
ReturnsTable read_returns_csv(const std::filesystem::path &path);
ReturnsTable parse_returns_csv(std::string_view text);
void write_returns_csv(const std::filesystem::path &path, const ReturnsTable &table);
std::string format_returns_csv(const ReturnsTable &table);

struct FinancialSamples {
    std::vector<Sample> samples;
    std::vector<double> labels;
    std::vector<std::size_t> label_day; ///< row index of each label day
    ReturnsTable table;                 ///< the parsed source
};

/// Sample t: (indices x lag_window) matrix of returns on days t-lag..t-1
/// (column j is day t-lag+j), label = target return on day t.
FinancialSamples make_lag_samples(const ReturnsTable &table, std::size_t lag_window,
                                  std::string_view target = "ISE100");
FinancialSamples ingest_financial_csv(const std::filesystem::path &path, std::size_t lag_window,
                                      std::string_view target = "ISE100");

/// ASCII PGM (P2, maxval 255), entries min-max normalised.
std::string format_pgm(const Matrix &m);
void write_pgm(const std::filesystem::path &path, const Matrix &m);

} // namespace rmr::data
