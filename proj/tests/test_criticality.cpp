#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "critsense/criticality.hpp"
#include "dense_oracle.hpp"

#include <cmath>

using namespace critsense;

namespace {

ModelParams params(int n, double delta) {
    ModelParams p;
    p.n_particles = n;
    p.imbalance = delta;
    return p;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("exponent constants") {
    CHECK(exponents::susceptibility_per_particle == doctest::Approx(1.0 / 3.0));
    CHECK(exponents::critical_shift == doctest::Approx(-2.0 / 3.0));
}

TEST_CASE("point susceptibilities match the dense oracle at N = 10") {
    struct Case {
        double lambda, delta, temperature;
    };
    for (const Case c : {Case{-0.6, 0.05, 0.0}, Case{-1.4, 0.05, 0.0}, Case{-1.0, 0.01, 0.3}, Case{-2.0, 0.1, 1.0},
                         Case{0.5, -0.2, 0.5}}) {
        const auto ref = oracle::susceptibilities(10, 1.0, c.lambda, c.delta, c.temperature);
        PointOptions o;
        o.temperature = c.temperature;
        const auto got = evaluate_point(params(10, c.delta), c.lambda, MethodSet{}, o);
        CAPTURE(c.lambda);
        CAPTURE(c.temperature);
        CHECK(rel(got.chi_mom, ref.chi_mom) < 1e-6);
        CHECK(rel(got.chi_cl, ref.chi_cl) < 1e-6);
        CHECK(rel(got.chi_q, ref.chi_q) < 1e-6);
    }
}

TEST_CASE("grid-mode chi_mom approaches the stencil value") {
    ScanConfig sc;
    sc.params = params(40, 0.01);
    sc.lambda_grid = uniform_grid(-1.2, -1.0, 1e-3);
    sc.which = MethodSet::only(Method::moment);
    sc.moment_derivative = MomentDerivative::grid;
    const auto grid_curve = scan_lambda(sc);
    sc.moment_derivative = MomentDerivative::stencil;
    const auto stencil_curve = scan_lambda(sc);
    for (std::size_t i = 1; i + 1 < grid_curve.size(); ++i) CHECK(rel(grid_curve.chi_mom[i], stencil_curve.chi_mom[i]) < 1e-3);
}

TEST_CASE("inequality chain and T = 0 equality of the fidelity susceptibilities") {
    for (double t : {0.0, 0.2, 1.0}) {
        for (double lambda : {-2.5, -1.2, -1.0, -0.8, -0.3}) {
            PointOptions o;
            o.temperature = t;
            const auto r = evaluate_point(params(60, 2e-3), lambda, MethodSet{}, o);
            CAPTURE(t);
            CAPTURE(lambda);
            CHECK(r.chi_mom <= r.chi_cl * (1.0 + 1e-2));
            CHECK(r.chi_cl <= r.chi_q * (1.0 + 1e-2));
            if (t == 0.0) CHECK(rel(r.chi_cl, r.chi_q) < 1e-5);
        }
    }
}

TEST_CASE("susceptibilities are insensitive to epsilon0") {
    for (Method m : {Method::moment, Method::classical, Method::quantum})
        CHECK(epsilon_stability(params(100, 2e-3), -1.05, m) < 1e-4);
}

TEST_CASE("scan is deterministic and independent of the thread count") {
    ScanConfig sc;
    sc.params = params(80, 2e-3);
    sc.lambda_grid = uniform_grid(-1.3, -0.9, 0.02);
    sc.temperature = 0.1;
    sc.threads = 1;
    const auto a = scan_lambda(sc);
    sc.threads = 4;
    const auto b = scan_lambda(sc);
    CHECK(a.chi_q == b.chi_q);
    CHECK(a.chi_cl == b.chi_cl);
    CHECK(a.chi_mom == b.chi_mom);
    CHECK(a.mean == b.mean);
}

TEST_CASE("scan configuration validation") {
    ScanConfig sc;
    sc.params = params(20, 0.0);
    sc.lambda_grid = {-1.0, -0.5};
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    sc.lambda_grid = {-1.0, -0.5, -0.6};
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    sc.lambda_grid = {-1.0, -0.5, 0.0};
    sc.temperature = -1.0;
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    sc.temperature = 0.0;
    sc.which = MethodSet{false, false, false};
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    sc.which = MethodSet{};
    CHECK_NOTHROW(sc.validate());
}

TEST_CASE("non-finite temperature is rejected before any point is evaluated") {
    ScanConfig sc;
    sc.params = params(10, 0.0);
    sc.lambda_grid = {-1.0, -0.9, -0.8};
    sc.temperature = std::nan("");
    CHECK_THROWS_AS(scan_lambda(sc), std::invalid_argument);
}

TEST_CASE("uniform grid and parabolic peak") {
    const auto g = uniform_grid(-1.6, -0.4, 2e-3);
    CHECK(g.size() == 601);
    CHECK(g.front() == -1.6);
    CHECK(g.back() == doctest::Approx(-0.4).epsilon(1e-12));
    CHECK_THROWS_AS(uniform_grid(1.0, 0.0, 0.1), std::invalid_argument);

    std::vector<double> x = uniform_grid(0.0, 1.0, 0.1), y;
    for (double v : x) y.push_back(3.0 - 2.0 * (v - 0.437) * (v - 0.437));
    const auto pk = find_peak(x, y);
    CHECK(pk.index == 4);
    CHECK(pk.interior);
    CHECK(pk.location == doctest::Approx(0.437).epsilon(1e-12));
    CHECK(pk.value == y[4]);
    std::vector<double> rising(x.begin(), x.end());
    CHECK_FALSE(find_peak(x, rising).interior);
}

TEST_CASE("power-law fit") {
    std::vector<double> x{1, 2, 3, 5, 8}, y;
    for (double v : x) y.push_back(2.0 * v * v * v);
    const auto f = fit_power_law(x, y);
    CHECK(f.exponent == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(f.prefactor == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(f.r_squared == doctest::Approx(1.0));
    CHECK(f.points_used == 5);
    CHECK_THROWS_AS(fit_power_law({1, 2}, {1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(fit_power_law({1, 2, 3}, {1, -2, 3}), std::invalid_argument);
}

TEST_CASE("finite-size critical point from the E2 - E0 minimum") {
    const auto r = locate_critical_gap(params(200, 0.0), 200, -1.5, -0.8);
    CHECK(r.lambda_c_N == doctest::Approx(-1.0707782).epsilon(1e-6));
    CHECK(r.gap_at_min > 0.0);
    const double step = 1e-4;
    CHECK(energy_gap(params(200, 0.0).with_control(r.lambda_c_N - step), 0, 2) > r.gap_at_min);
    CHECK(energy_gap(params(200, 0.0).with_control(r.lambda_c_N + step), 0, 2) > r.gap_at_min);
    CHECK_THROWS_AS(locate_critical_gap(params(200, 0.0), 200, -0.9, -0.5), std::runtime_error);
    CHECK_THROWS_AS(energy_gap(params(10, 0.0), 2, 1), std::invalid_argument);
}

TEST_CASE("critical point approaches -1 from below") {
    double previous = -2.0;
    for (int n : {50, 100, 200, 400}) {
        const double l = locate_critical_gap(params(n, 0.0), n, -1.5, -0.8).lambda_c_N;
        CHECK(l < -1.0);
        CHECK(l > previous);
        previous = l;
    }
}

TEST_CASE("peak coincidence at low temperature") {
    ScanConfig sc;
    sc.params = params(200, 2e-3);
    sc.lambda_grid = uniform_grid(-1.3, -0.8, 2e-3);
    sc.temperature = 0.01;
    const auto c = scan_lambda(sc);
    const auto m = find_peak(c.lambda_grid, c.chi_mom).index;
    const auto cl = find_peak(c.lambda_grid, c.chi_cl).index;
    const auto q = find_peak(c.lambda_grid, c.chi_q).index;
    CHECK(std::abs(static_cast<long>(m) - static_cast<long>(q)) <= 1);
    CHECK(std::abs(static_cast<long>(cl) - static_cast<long>(q)) <= 1);
}

TEST_CASE("temperature ordering at the finite-size critical point") {
    const double lc = locate_critical_gap(params(200, 0.0), 200, -1.5, -0.8).lambda_c_N;
    const auto curve = scan_temperature(params(200, 2e-3), lc, {0.0, 0.1, 0.3, 0.6, 1.0}, MethodSet{});
    for (const auto& p : curve.points) {
        CHECK(p.chi_mom <= p.chi_cl * (1.0 + 1e-2));
        CHECK(p.chi_cl <= p.chi_q * (1.0 + 1e-2));
    }
    const auto& cold = curve.points.front();
    CHECK(rel(cold.chi_mom, cold.chi_q) < 0.05);
    CHECK(curve.points.back().chi_q < cold.chi_q);
    CHECK(curve.points.back().rank > 1);
}

TEST_CASE("refinement narrows the peak") {
    ScanConfig sc;
    sc.params = params(100, 2e-3);
    sc.lambda_grid = uniform_grid(-1.4, -0.8, 1e-2);
    sc.which = MethodSet::only(Method::quantum);
    const auto coarse = scan_lambda(sc);
    const auto pk = find_peak(coarse.lambda_grid, coarse.chi_q);
    const auto [fine, fpk] = refine_peak(sc, Method::quantum, pk.location, {0.02, 5e-4});
    CHECK(fine.size() == 81);
    CHECK(std::abs(fpk.location - pk.location) < 1e-2);
    CHECK(fpk.value >= pk.value * (1.0 - 1e-3));
}

TEST_CASE("delta optimization puts the peak on the finite-size critical point") {
    const int n = 60;
    const double lc = locate_critical_gap(params(n, 0.0), n, -1.5, -0.8).lambda_c_N;
    DeltaOptions o;
    o.delta_points = 9;
    o.coarse_step = 5e-3;
    o.refine = {0.03, 5e-4};
    const auto results = optimize_delta(params(n, 0.0), 0.0, MethodSet{}, lc, o);
    REQUIRE(results.size() == 3);
    for (const auto& r : results) {
        CAPTURE(to_string(r.method));
        CHECK(r.within_tolerance);
        CHECK(std::abs(r.peak_location - lc) <= o.tolerance());
        CHECK(r.delta_star >= o.delta_min);
        CHECK(r.delta_star <= o.delta_max);
        CHECK(r.trials.size() >= 9);
    }
    const auto single = optimize_delta(params(n, 0.0), 0.0, Method::quantum, lc, o);
    CHECK(single.delta_star == results[method_index(Method::quantum)].delta_star);
}

TEST_CASE("scaling study on small systems") {
    ScalingOptions o;
    o.delta.delta_points = 7;
    o.delta.coarse_step = 5e-3;
    o.delta.refine = {0.03, 1e-3};
    o.methods = MethodSet::only(Method::quantum);
    const auto s = scaling_study({40, 60, 90}, ModelParams{}, o);
    REQUIRE(s.rows.size() == 3);
    CHECK(s.rows[0].n_particles == 40);
    CHECK(s.rows[2].n_particles == 90);
    REQUIRE(s.shift_fit.has_value());
    CHECK(s.shift_fit->exponent < 0.0);
    REQUIRE(s.fit[method_index(Method::quantum)].has_value());
    CHECK_FALSE(s.fit[method_index(Method::moment)].has_value());
    for (const auto& r : s.rows) CHECK(r.chi[method_index(Method::quantum)] > 0.0);
    CHECK_THROWS_AS(scaling_study({5, 40, 60}, ModelParams{}, o), std::invalid_argument);
}
