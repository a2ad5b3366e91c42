#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "critsense/fidelity.hpp"

#include <cmath>
#include <random>

using namespace critsense;

namespace {

Eigen::VectorXd random_distribution(std::mt19937_64& rng, Eigen::Index n) {
    std::exponential_distribution<double> e(1.0);
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) p[i] = e(rng);
    return p / p.sum();
}

Eigen::MatrixXd random_orthogonal(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = g(rng);
    return Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
}

std::span<const double> view(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

// Discretized Normal(mu, sigma^2) on [-1, 1] with bin width h.
Eigen::VectorXd gaussian_bins(double mu, double sigma, double h) {
    const int bins = static_cast<int>(std::lround(2.0 / h));
    Eigen::VectorXd p(bins);
    for (int k = 0; k < bins; ++k) {
        const double a = -1.0 + k * h, b = a + h;
        p[k] = 0.5 * (std::erf((b - mu) / (std::sqrt(2.0) * sigma)) - std::erf((a - mu) / (std::sqrt(2.0) * sigma)));
    }
    return p / p.sum();
}

}  // namespace

TEST_CASE("method names round-trip") {
    for (Method m : {Method::moment, Method::classical, Method::quantum}) CHECK(method_from_string(to_string(m)) == m);
    CHECK_THROWS_AS(method_from_string("fisher"), std::invalid_argument);
}

TEST_CASE("Bhattacharyya coefficient basics") {
    const Eigen::VectorXd p = Eigen::Vector3d(0.2, 0.3, 0.5), q = Eigen::Vector3d(0.5, 0.5, 0.0);
    CHECK(bhattacharyya_fidelity(view(p), view(p)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(bhattacharyya_fidelity(view(p), view(q)) == doctest::Approx(std::sqrt(0.1) + std::sqrt(0.15)));
    const Eigen::VectorXd a = Eigen::Vector2d(1.0, 0.0), b = Eigen::Vector2d(0.0, 1.0);
    CHECK(bhattacharyya_fidelity(view(a), view(b)) == 0.0);
    CHECK(hellinger_infidelity(view(p), view(q)) ==
          doctest::Approx(1.0 - bhattacharyya_fidelity(view(p), view(q))).epsilon(1e-14));
    CHECK_THROWS_AS(bhattacharyya_fidelity(view(p), view(a)), std::invalid_argument);
}

TEST_CASE("pure-state Uhlmann fidelity is the overlap modulus") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd a(6), b(6);
        for (int i = 0; i < 6; ++i) a[i] = g(rng), b[i] = g(rng);
        a.normalize();
        b.normalize();
        const auto ra = DensityOperator::pure(a), rb = DensityOperator::pure(b);
        const double overlap = std::abs(a.dot(b));
        CHECK(uhlmann_fidelity(ra, rb) == doctest::Approx(overlap).epsilon(1e-12));
        CHECK(detail::uhlmann_fidelity_general(ra, rb) == doctest::Approx(overlap).epsilon(1e-10));
        CHECK(uhlmann_infidelity(ra, rb) == doctest::Approx(1.0 - overlap).epsilon(1e-12));
    }
}

TEST_CASE("Uhlmann fidelity is symmetric, bounded and unitarily invariant") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        DensityOperator r1{random_distribution(rng, 3), random_orthogonal(rng, 5).leftCols(3)};
        DensityOperator r2{random_distribution(rng, 4), random_orthogonal(rng, 5).leftCols(4)};
        const double f = uhlmann_fidelity(r1, r2);
        CHECK(f >= 0.0);
        CHECK(f <= 1.0 + 1e-12);
        CHECK(uhlmann_fidelity(r2, r1) == doctest::Approx(f).epsilon(1e-10));
        CHECK(uhlmann_fidelity(r1, r1) == doctest::Approx(1.0).epsilon(1e-10));
        const Eigen::MatrixXd u = random_orthogonal(rng, 5);
        DensityOperator u1{r1.weights, u * r1.vectors}, u2{r2.weights, u * r2.vectors};
        CHECK(uhlmann_fidelity(u1, u2) == doctest::Approx(f).epsilon(1e-10));
    }
}

TEST_CASE("commuting pairs: Uhlmann equals Bhattacharyya") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index n = 2 + trial % 9;
        const Eigen::VectorXd p = random_distribution(rng, n), q = random_distribution(rng, n);
        const double bc = bhattacharyya_fidelity(view(p), view(q));
        CHECK(std::abs(detail::uhlmann_fidelity_general(DensityOperator::diagonal(p), DensityOperator::diagonal(q)) -
                       bc) < 1e-10);
        const Eigen::MatrixXd u = random_orthogonal(rng, n);
        CHECK(std::abs(uhlmann_fidelity(DensityOperator{p, u}, DensityOperator{q, u}) - bc) < 1e-10);
    }
}

TEST_CASE("mixed-state infidelity keeps its relative accuracy for nearby states") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::Index n = 3 + trial % 6;
        const Eigen::VectorXd p = random_distribution(rng, n);
        Eigen::VectorXd q = p;
        for (Eigen::Index i = 0; i < n; ++i) q[i] *= 1.0 + 1e-6 * g(rng);
        q /= q.sum();
        const double exact = hellinger_infidelity(view(p), view(q));
        const Eigen::MatrixXd u = random_orthogonal(rng, n);
        // Reverse the eigenbasis order of the second state.
        const Eigen::VectorXd q_rev = q.reverse();
        const Eigen::MatrixXd u_rev = u.rowwise().reverse();
        const double d = uhlmann_infidelity(DensityOperator{p, u}, DensityOperator{q_rev, u_rev});
        CHECK(d == doctest::Approx(exact).epsilon(1e-6));
    }
}

TEST_CASE("mixed-state infidelity with unequal ranks") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        DensityOperator r1{random_distribution(rng, 2), random_orthogonal(rng, 6).leftCols(2)};
        DensityOperator r2{random_distribution(rng, 5), random_orthogonal(rng, 6).leftCols(5)};
        CHECK(uhlmann_infidelity(r1, r2) == doctest::Approx(1.0 - uhlmann_fidelity(r1, r2)).epsilon(1e-10));
        CHECK(uhlmann_infidelity(r2, r1) == doctest::Approx(1.0 - uhlmann_fidelity(r1, r2)).epsilon(1e-10));
    }
}

TEST_CASE("density operator validation") {
    DensityOperator r{Eigen::Vector2d(0.5, 0.6), Eigen::MatrixXd::Identity(2, 2)};
    CHECK_THROWS_AS(r.validate(), std::invalid_argument);
    r.weights = Eigen::Vector2d(1.2, -0.2);
    CHECK_THROWS_AS(r.validate(), std::invalid_argument);
    r.weights = Eigen::Vector2d(0.25, 0.75);
    CHECK_NOTHROW(r.validate());
    CHECK((r.dense() - Eigen::Vector2d(0.25, 0.75).asDiagonal().toDenseMatrix()).norm() < 1e-15);
    CHECK_THROWS_AS(uhlmann_fidelity(r, DensityOperator::diagonal(Eigen::Vector3d(1, 0, 0))), std::invalid_argument);
    CHECK_THROWS_AS(DensityOperator::pure(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("epsilon grid and quadratic fit through the origin") {
    const auto grid = default_epsilon_grid(-0.5, 1e-4);
    REQUIRE(grid.size() == 4);
    CHECK(grid[0] == doctest::Approx(-2e-4));
    CHECK(grid[3] == doctest::Approx(2e-4));
    CHECK(default_epsilon_grid(-3.0, 1e-4)[3] == doctest::Approx(6e-4));
    CHECK_THROWS_AS(default_epsilon_grid(0.0, 0.0), std::invalid_argument);

    // 1 - F = chi eps^2 / 8 exactly.
    const auto est = susceptibility_from_infidelity([](double e) { return 2.5 * e * e / 8.0; }, grid, Method::classical);
    CHECK(est.value == doctest::Approx(2.5).epsilon(1e-13));
    CHECK(est.method == Method::classical);
    CHECK_FALSE(est.degenerate);
    // symmetric offsets with equal infidelity: chi = 8 (1 - F) / eps^2
    const std::vector<double> sym{-0.1, 0.1};
    CHECK(susceptibility_from_infidelity([](double) { return 0.004; }, sym, Method::quantum).value ==
          doctest::Approx(8 * 0.004 / 0.01));
    const auto flat = susceptibility_from_fidelity([](double) { return 1.0; }, grid, Method::quantum);
    CHECK(flat.value == 0.0);
    CHECK(flat.degenerate);
}

TEST_CASE("two-level pure family has chi_Q = 4") {
    for (double theta : {0.1, 0.7, 1.3}) {
        auto state = [](double t) { return DensityOperator::pure(Eigen::Vector2d(std::cos(t), std::sin(t))); };
        const auto grid = default_epsilon_grid(theta, 1e-4);
        const auto est = susceptibility_from_infidelity(
            [&](double e) { return uhlmann_infidelity(state(theta), state(theta + e)); }, grid, Method::quantum);
        CHECK(std::abs(est.value - 4.0) < 1e-6);
    }
}

TEST_CASE("Gaussian location family has chi_cl = 1 / sigma^2") {
    const double sigma = 0.1, h = 1e-3;
    const Eigen::VectorXd p0 = gaussian_bins(0.0, sigma, h);
    const auto est = susceptibility_from_infidelity(
        [&](double e) {
            const Eigen::VectorXd p1 = gaussian_bins(e, sigma, h);
            return hellinger_infidelity(view(p0), view(p1));
        },
        default_epsilon_grid(0.0, 1e-3), Method::classical);
    CHECK(est.value == doctest::Approx(1.0 / (sigma * sigma)).epsilon(0.01));
}

TEST_CASE("grid derivative and chi_mom from curves") {
    const std::vector<double> x{0.0, 0.1, 0.25, 0.3, 0.5};
    std::vector<double> quad, lin;
    for (double v : x) quad.push_back(3.0 * v * v - v + 2.0), lin.push_back(2.0 * v + 1.0);
    for (std::size_t i = 1; i + 1 < x.size(); ++i) CHECK(grid_derivative(quad, x, i) == doctest::Approx(6.0 * x[i] - 1.0));
    CHECK(grid_derivative(lin, x, 0) == doctest::Approx(2.0));
    CHECK(grid_derivative(lin, x, 4) == doctest::Approx(2.0));

    const std::vector<double> var(5, 0.25);
    for (std::size_t i = 0; i < 5; ++i) CHECK(chi_mom_from_curves(lin, var, x, i).value == doctest::Approx(16.0));
    const std::vector<double> zero(5, 0.0);
    CHECK_THROWS_AS(chi_mom_from_curves(lin, zero, x, 2), std::domain_error);
}
