// Acceptance suite: one PASS/FAIL line per criterion at its stated tolerance.
// Usage: acceptance [criterion numbers...]   (default: all)
// Exit status is non-zero when any selected criterion fails.

#include "critsense/criticality.hpp"
#include "critsense/estimation.hpp"
#include "critsense/fidelity.hpp"
#include "dense_oracle.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace critsense;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

ModelParams params(int n, double delta) {
    ModelParams p;
    p.n_particles = n;
    p.imbalance = delta;
    return p;
}

const std::vector<int> sizes{200, 300, 500, 700, 1000};

Outcome critical_shift() {
    std::vector<double> ns, shifts;
    std::ostringstream d;
    for (int n : sizes) {
        const auto r = locate_critical_gap(params(n, 0.0), n, -1.5, -0.8);
        ns.push_back(n);
        shifts.push_back(lambda_critical - r.lambda_c_N);
        d << "N=" << n << ":" << fmt("%.6f", r.lambda_c_N) << " ";
    }
    const auto f = fit_power_law(ns, shifts);
    const bool ok = std::abs(f.exponent - (-2.0 / 3.0)) <= 0.05 && rel(f.prefactor, 2.3) <= 0.2;
    d << "fit exponent " << fmt("%.4f", f.exponent) << " (want -0.6667 +- 0.05), prefactor " << fmt("%.3f", f.prefactor)
      << " (want 2.3 +- 20%)";
    return {ok, d.str()};
}

Outcome susceptibility_scaling() {
    const auto s = scaling_study(sizes, ModelParams{}, ScalingOptions{});
    bool ok = true;
    std::ostringstream d;
    const char* names[3] = {"chi_mom", "chi_cl", "chi_Q"};
    const double want[3] = {1.18, 1.08, 1.08};
    for (Method m : {Method::moment, Method::classical, Method::quantum}) {
        const auto i = method_index(m);
        const auto& f = *s.fit[i];
        const bool good = std::abs(f.exponent - 1.0 / 3.0) <= 0.05 && rel(f.prefactor, want[i]) <= 0.15;
        ok = ok && good;
        d << names[i] << "/N: exponent " << fmt("%.4f", f.exponent) << " prefactor " << fmt("%.3f", f.prefactor)
          << " (want 0.3333 +- 0.05, " << fmt("%.2f", want[i]) << " +- 15%)" << (good ? "" : " x") << "; ";
    }
    for (const auto& r : s.rows) {
        d << "N=" << r.n_particles << " chi_Q=" << fmt("%.1f", r.chi[method_index(Method::quantum)])
          << " delta*=" << fmt("%.3g", r.delta_star[method_index(Method::quantum)]) << " ";
    }
    return {ok, d.str()};
}

Outcome paramagnetic_closed_form() {
    bool ok = true;
    std::ostringstream d;
    for (double lambda : {-0.7, -0.5, -0.3}) {
        const double chi = evaluate_point(params(1000, 2e-3), lambda, MethodSet::only(Method::quantum)).chi_q;
        const double closed = 1.0 / (8.0 * (lambda + 1.0) * (lambda + 1.0));
        const double r = (chi - closed) / closed;
        ok = ok && std::abs(r) <= 0.1;
        d << "lambda=" << lambda << ": chi_Q=" << fmt("%.4f", chi) << " closed=" << fmt("%.4f", closed) << " ("
          << fmt("%+.1f", 100 * r) << "%) ";
    }
    d << "(want within 10%)";
    return {ok, d.str()};
}

Outcome ferromagnetic_closed_form() {
    bool ok = true;
    std::ostringstream d;
    for (double lambda : {-2.0, -3.0}) {
        const double chi = evaluate_point(params(1000, 2e-3), lambda, MethodSet::only(Method::quantum)).chi_q;
        const double closed = 1000.0 / (std::pow(std::abs(lambda), 3) * std::sqrt(lambda * lambda - 1.0));
        const double r = (chi - closed) / closed;
        ok = ok && std::abs(r) <= 0.1;
        d << "lambda=" << lambda << ": chi_Q=" << fmt("%.4f", chi) << " closed=" << fmt("%.4f", closed) << " ("
          << fmt("%+.2f", 100 * r) << "%) ";
    }
    d << "(delta=2e-3, want within 10%)";
    return {ok, d.str()};
}

Outcome inequality_chain() {
    std::ostringstream d;
    int violations = 0;
    std::size_t points = 0;
    for (double t : {0.0, 0.5, 1.0}) {
        ScanConfig sc;
        sc.params = params(1000, 2e-3);
        sc.lambda_grid = uniform_grid(-1.6, -0.4, 2e-3);
        sc.temperature = t;
        const auto c = scan_lambda(sc);
        int v = 0;
        double worst = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            const double a = c.chi_mom[i] / c.chi_cl[i] - 1.0, b = c.chi_cl[i] / c.chi_q[i] - 1.0;
            worst = std::max({worst, a, b});
            if (a > 1e-2 || b > 1e-2) ++v;
        }
        violations += v;
        points += c.size();
        d << "T=" << t << ": " << v << " violations, max excess " << fmt("%.2e", worst) << "; ";
    }
    d << points << " points, slack 1e-2";
    return {violations == 0, d.str()};
}

Outcome oracle_equivalence() {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> lam(-3.0, 1.0), del(-0.2, 0.2), om(0.5, 2.0);
    std::uniform_int_distribution<int> nn(1, 20);
    double worst_eig = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = nn(rng);
        ModelParams p = params(n, del(rng));
        p.control = lam(rng);
        p.tunneling = om(rng);
        const auto ref = oracle::jacobi(oracle::hamiltonian(n, p.tunneling, p.control, p.imbalance));
        const auto h = build_hamiltonian(p);
        const auto ql = diagonalize(h).energies;
        for (int k = 0; k <= n; ++k) {
            worst_eig = std::max(worst_eig, std::abs(ql[k] - ref.values[k]));
            worst_eig = std::max(worst_eig, std::abs(bisect_eigenvalue(h.matrix, k) - ref.values[k]));
        }
    }
    double worst_chi = 0.0;
    std::uniform_real_distribution<double> delta_mag(0.02, 0.2);
    int cases = 0;
    for (double t : {0.0, 0.5, 1.0}) {
        for (int k = 0; k < 6; ++k) {
            const double lambda = lam(rng), delta = delta_mag(rng);
            const auto ref = oracle::susceptibilities(10, 1.0, lambda, delta, t);
            PointOptions o;
            o.temperature = t;
            const auto got = evaluate_point(params(10, delta), lambda, MethodSet{}, o);
            worst_chi = std::max({worst_chi, rel(got.chi_mom, ref.chi_mom), rel(got.chi_cl, ref.chi_cl),
                                  rel(got.chi_q, ref.chi_q)});
            ++cases;
        }
    }
    const bool ok = worst_eig <= 1e-10 && worst_chi <= 1e-6;
    return {ok, "eigenvalues: max |diff| " + fmt("%.2e", worst_eig) + " over 50 random sets N<=20 (want <= 1e-10); " +
                    "chi at N=10: max rel diff " + fmt("%.2e", worst_chi) + " over " + std::to_string(cases) +
                    " points, T in {0, 0.5, 1} (want <= 1e-6)"};
}

Histogram gaussian_bins(double mu, double sigma, double width) {
    Histogram h = empty_histogram({width, -1.0, 1.0});
    for (std::size_t k = 0; k < h.bins(); ++k) {
        const double a = h.left_edge(k), b = a + width;
        h.mass[k] = 0.5 * (std::erf((b - mu) / (std::sqrt(2.0) * sigma)) - std::erf((a - mu) / (std::sqrt(2.0) * sigma)));
    }
    double total = 0.0;
    for (double m : h.mass) total += m;
    for (double& m : h.mass) m /= total;
    h.sample_count = 1;
    return h;
}

Outcome fisher_oracles() {
    const double sigma = 0.1, spacing = 0.005;
    const std::vector<double> a{-spacing, 0.0, spacing};
    std::vector<Histogram> hs;
    for (double x : a) hs.push_back(gaussian_bins(x, sigma, 0.001));
    const double cl = chi_cl_experimental(a, hs, 1).value;
    const double cl_rel = rel(cl, 1.0 / (sigma * sigma));

    double worst_q = 0.0;
    for (double theta : {0.2, 0.9, 1.4}) {
        auto state = [](double t) { return DensityOperator::pure(Eigen::Vector2d(std::cos(t), std::sin(t))); };
        const auto est = susceptibility_from_infidelity(
            [&](double e) { return uhlmann_infidelity(state(theta), state(theta + e)); },
            default_epsilon_grid(theta, 1e-4), Method::quantum);
        worst_q = std::max(worst_q, std::abs(est.value - 4.0));
    }
    return {cl_rel <= 0.01 && worst_q <= 1e-6,
            "Gaussian location family (sigma=0.1): chi_cl=" + fmt("%.4f", cl) + " vs 100 (" + fmt("%.3f", 100 * cl_rel) +
                "%, want <= 1%); two-level family: max |chi_Q - 4| " + fmt("%.2e", worst_q) + " (want <= 1e-6)"};
}

Outcome commuting_identity() {
    std::mt19937_64 rng(8);
    std::exponential_distribution<double> e(1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + trial % 30;
        Eigen::VectorXd p(n), q(n);
        for (int i = 0; i < n; ++i) p[i] = e(rng), q[i] = e(rng);
        // Sparse supports exercise zero eigenvalues.
        if (trial % 4 == 0) p[0] = 0.0, q[n - 1] = 0.0;
        p /= p.sum();
        q /= q.sum();
        const double f = detail::uhlmann_fidelity_general(DensityOperator::diagonal(p), DensityOperator::diagonal(q));
        const double bc = bhattacharyya_fidelity(std::span<const double>(p.data(), n), std::span<const double>(q.data(), n));
        worst = std::max(worst, std::abs(f - bc));
    }
    return {worst <= 1e-10, "100 random diagonal pairs: max |F_U - F_B| " + fmt("%.2e", worst) + " (want <= 1e-10)"};
}

// Fisher information of the family's binned mixture with respect to a, on the
// chi_cl layout (bin width 0.05 on [-1, 1], edge bins carrying the tails).
double binned_fisher(const OrderParameterFamily& fam, double a) {
    const double h = 1e-5;
    const double zbar = fam.zbar(a), dz = (fam.zbar(a + h) - fam.zbar(a - h)) / (2 * h);
    const double s = fam.sigma, ap = 0.5 * (1 + fam.asymmetry), am = 0.5 * (1 - fam.asymmetry);
    auto cdf = [](double u) { return 0.5 * std::erfc(-u / std::sqrt(2.0)); };
    auto pdf = [](double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * M_PI); };
    double fisher = 0.0;
    for (int k = 0; k < 40; ++k) {
        const double lo = k == 0 ? -1e300 : -1.0 + 0.05 * k, hi = k == 39 ? 1e300 : -1.0 + 0.05 * (k + 1);
        const double m = ap * (cdf((hi - zbar) / s) - cdf((lo - zbar) / s)) + am * (cdf((hi + zbar) / s) - cdf((lo + zbar) / s));
        const double dm = dz / s *
                          (ap * (pdf((lo - zbar) / s) - pdf((hi - zbar) / s)) - am * (pdf((lo + zbar) / s) - pdf((hi + zbar) / s)));
        if (m > 0.0) fisher += dm * dm / m;
    }
    return fisher;
}

Outcome pipeline_closure() {
    OrderParameterFamily symmetric;
    OrderParameterFamily skewed;
    skewed.sigma = 0.08;
    skewed.asymmetry = 0.2;
    skewed.scale = 0.25;
    const auto grid = uniform_grid(-2.35, -1.15, 0.05);
    int covered = 0, total = 0;
    bool peaks_ok = true;
    std::ostringstream d;
    std::uint64_t seed = 2024;
    for (const auto* fam : {&symmetric, &skewed}) {
        const auto series = synth_family(*fam, grid, 1000000, seed++);
        const auto analysis = analyze_series(series);
        BootstrapOptions o;
        o.n_replicas = 3000;
        o.seed = seed++;
        const auto bm = bootstrap(analysis, Estimator::chi_mom, o);
        const auto bc = bootstrap(analysis, Estimator::chi_cl, o);
        int cov_m = 0, cov_c = 0, interior = 0;
        std::size_t pm = 1, pc = 1;
        for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
            const double h = 1e-5;
            const double dz = (fam->zbar(grid[i] + h) - fam->zbar(grid[i] - h)) / (2 * h);
            const double truth_m = dz * dz / (fam->sigma * fam->sigma);
            const double truth_c = binned_fisher(*fam, grid[i]);
            if (std::abs(analysis.chi_mom[i].value - truth_m) <= bm.points[i].width) ++cov_m;
            if (std::abs(analysis.chi_cl[i].value - truth_c) <= bc.points[i].width) ++cov_c;
            if (analysis.chi_mom[i].value > analysis.chi_mom[pm].value) pm = i;
            if (analysis.chi_cl[i].value > analysis.chi_cl[pc].value) pc = i;
            ++interior;
        }
        covered += cov_m + cov_c;
        total += 2 * interior;
        const long gap = std::abs(static_cast<long>(pm) - static_cast<long>(pc));
        peaks_ok = peaks_ok && gap <= 1;
        d << (fam == &symmetric ? "symmetric" : "skewed") << ": coverage chi_mom " << cov_m << "/" << interior
          << ", chi_cl " << cov_c << "/" << interior << ", peaks at a=" << fmt("%.2f", grid[pm]) << " / "
          << fmt("%.2f", grid[pc]) << "; ";
    }
    const double coverage = static_cast<double>(covered) / total;
    d << "overall coverage " << fmt("%.1f", 100 * coverage) << "% (want >= 60%), 3000 replicas, 1e6 samples per point";
    return {coverage >= 0.6 && peaks_ok, d.str()};
}

Outcome documentary() {
    return {true,
            "documented non-goal: the measured a_c and the absolute experimental chi values need the laboratory "
            "records, which are not available; criterion 9 stands in for them"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"finite-size critical point scaling", critical_shift},
        {"super-extensive susceptibility scaling", susceptibility_scaling},
        {"paramagnetic closed form", paramagnetic_closed_form},
        {"ferromagnetic closed form", ferromagnetic_closed_form},
        {"inequality chain on full N=1000 scans", inequality_chain},
        {"dense oracle equivalence", oracle_equivalence},
        {"Fisher-information oracles", fisher_oracles},
        {"commuting-case identity", commuting_identity},
        {"estimation pipeline closure", pipeline_closure},
        {"experimental numbers", documentary},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!o.pass) ++failures;
        std::printf("criterion %2d %s  %s: %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", criteria[k].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
