#include "oracles.hpp"

#include <rmr/data.hpp>
#include <rmr/rmr.hpp>

#include <doctest.h>

#include <random>

using namespace rmr;

namespace {

std::vector<data::Sample> shape_samples(Eigen::Index size, std::size_t n, double sigma, std::uint64_t seed,
                                        data::ShapeKind kind = data::ShapeKind::square) {
    data::NoiseSpec noise;
    noise.label_noise_scale = sigma;
    noise.seed = seed;
    return data::generate_synthetic(data::generate_shape(kind, size), 0.0, n, noise).samples;
}

} // namespace

TEST_SUITE("rmr") {

TEST_CASE("update_s is the scaled singular value shrink") {
    std::mt19937_64 rng(20);
    const Matrix w = oracle::random_matrix(4, 5, rng), lam = oracle::random_matrix(4, 5, rng);
    const double tau = 0.8, rho = 2.5;
    const Matrix s = update_s(w, lam, tau, rho);
    CHECK((s - oracle::svt(Matrix(rho * w - lam), tau) / rho).norm() < 1e-12);
    // first-order optimality: the objective is not lowered by small moves
    auto f = [&](const Matrix &z) {
        return tau * nuclear_norm(z) + trace_inner(lam, z) + 0.5 * rho * (w - z).squaredNorm();
    };
    const double f0 = f(s);
    for (int k = 0; k < 10; ++k) CHECK(f(Matrix(s + 1e-4 * oracle::random_matrix(4, 5, rng))) >= f0 - 1e-12);
    CHECK_THROWS_AS(update_s(w, lam, tau, 0.0), ContractViolation);
}

TEST_CASE("hyper-parameter validation names the field") {
    RmrHyperParams p;
    p.tau = -1;
    CHECK_THROWS_WITH_AS(validate(p), "rmr.tau must be finite and >= 0", ContractViolation);
    p = {};
    p.eta = 1.0;
    CHECK_THROWS_WITH_AS(validate(p), "rmr.eta must be in (0, 1)", ContractViolation);
    p = {};
    p.box_c = 0;
    CHECK_THROWS_AS(validate(p), ContractViolation);
}

TEST_CASE("tau = 0 reduces to the linear SVR") {
    const auto s = shape_samples(8, 60, 0.1, 21);
    RmrHyperParams p;
    p.tau = 0;
    p.box_c = 10;
    p.max_iters = 2000;
    p.primal_tol = 1e-8;
    const auto fit = rmr::fit(s, p);
    CHECK(fit.converged);
    const auto svr = smo::solve_linear_svr(s, 10.0, 0.01, 1e-9);
    CHECK((fit.model.w - svr.w).norm() <= 1e-4 * (1 + svr.w.norm()));
}

TEST_CASE("objective matches a direct primal evaluation") {
    const auto s = shape_samples(8, 30, 0.1, 22);
    std::mt19937_64 rng(22);
    const RmrModel<double> m{oracle::random_matrix(8, 8, rng), 0.3};
    RmrHyperParams p;
    p.tau = 2;
    CHECK(objective(m, s, p) == doctest::Approx(oracle::rmr_primal(m.w, m.b, s, p.box_c, p.epsilon, p.tau)).epsilon(1e-12));
}

TEST_CASE("fit is not worse than a primal subgradient oracle") {
    const auto s = shape_samples(8, 40, 0.1, 23);
    RmrHyperParams p;
    p.box_c = 1;
    p.tau = 1;
    p.rho = 3;
    p.max_iters = 2000;
    const auto fit = rmr::fit(s, p);
    CHECK(fit.converged);
    const double ours = objective(fit.model, s, p);
    const double ref = oracle::rmr_primal_subgradient(s, p.box_c, p.epsilon, p.tau, 3000);
    CHECK(ours <= ref + 1e-6 * std::max(1.0, std::abs(ref)));
}

TEST_CASE("converged fit satisfies the ADMM fixed-point relations") {
    const auto s = shape_samples(10, 80, 0.1, 24);
    RmrHyperParams p;
    p.tau = 5;
    p.rho = 15;
    const auto design = make_design(s);
    const auto fit = rmr::fit(design, p);
    REQUIRE(fit.converged);
    const auto &st = fit.state;
    const double scale = std::max(1.0, st.w.norm());
    CHECK((st.w - st.s).norm() <= p.primal_tol * scale);
    const Matrix stationary =
        st.lambda_dual + unvectorize(Vector(design.stacked.transpose() * st.beta), 10, 10);
    CHECK((st.w - stationary).norm() <= 1e-3 * (1 + st.w.norm()));
    CHECK(st.beta.cwiseAbs().maxCoeff() <= p.box_c);
    CHECK(std::abs(st.beta.sum()) <= 1e-8 * p.box_c);
}

TEST_CASE("noiseless low-rank signal is recovered") {
    const auto s = shape_samples(8, 200, 0.0, 25);
    RmrHyperParams p;
    p.tau = 1;
    p.rho = 30; // noiseless fits have many free multipliers; larger rho converges faster
    const auto fit = rmr::fit(s, p);
    CHECK(fit.converged);
    CHECK(data::rae(fit.model.w, data::generate_shape(data::ShapeKind::square, 8)) < 0.05);
}

TEST_CASE("nuclear penalty lowers the rank of the estimate") {
    const auto s = shape_samples(10, 60, 0.1, 26);
    RmrHyperParams lo, hi;
    lo.tau = 0;
    hi.tau = 30;
    hi.rho = 90;
    const auto a = rmr::fit(s, lo), b = rmr::fit(s, hi);
    CHECK(oracle::rank(b.model.w, 1e-6) < oracle::rank(a.model.w, 1e-6));
}

TEST_CASE("trace rows are emitted per iteration") {
    const auto s = shape_samples(8, 30, 0.1, 27);
    std::size_t rows = 0;
    bool saw_restart_flag_type = true;
    const AdmmTraceSink<double> sink = [&](const AdmmTraceRow &r, const AdmmState<double> &st) {
        CHECK(r.iter == rows);
        CHECK(st.iter == r.iter);
        ++rows;
        saw_restart_flag_type = saw_restart_flag_type && (r.restarted == st.restarted);
    };
    const auto fit = rmr::fit(s, RmrHyperParams{}, sink);
    CHECK(rows == fit.iterations);
    CHECK(saw_restart_flag_type);
}

TEST_CASE("input errors") {
    CHECK_THROWS_AS(rmr::fit(std::vector<data::Sample>{}, RmrHyperParams{}), ContractViolation);
    std::vector<data::Sample> s{{Matrix::Ones(2, 2), 1.0}, {Matrix::Ones(3, 2), 1.0}};
    CHECK_THROWS_AS(rmr::fit(s, RmrHyperParams{}), ContractViolation);
    std::vector<data::Sample> nan{{Matrix::Ones(2, 2), std::numeric_limits<double>::quiet_NaN()}};
    CHECK_THROWS_AS(rmr::fit(nan, RmrHyperParams{}), ContractViolation);
}

}
