#include "critsense/estimation.hpp"

#include "critsense/fidelity.hpp"
#include "critsense/least_squares.hpp"
#include "critsense/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace critsense {

void MeasurementSeries::validate() const {
    if (scattering_lengths.size() < 2) throw std::invalid_argument("series needs at least two scattering lengths");
    if (records.size() != scattering_lengths.size()) {
        throw std::invalid_argument("series has " + std::to_string(records.size()) + " records for " +
                                    std::to_string(scattering_lengths.size()) + " scattering lengths");
    }
    for (std::size_t i = 0; i < scattering_lengths.size(); ++i) {
        if (!std::isfinite(scattering_lengths[i])) throw std::invalid_argument("non-finite scattering length");
        if (i > 0 && !(scattering_lengths[i] > scattering_lengths[i - 1])) {
            throw std::invalid_argument("scattering lengths must be strictly increasing");
        }
        if (records[i].empty()) throw std::invalid_argument("empty record at index " + std::to_string(i));
        for (double z : records[i]) {
            if (!(z >= -1.0 && z <= 1.0)) throw std::invalid_argument("sample outside [-1, 1]: " + std::to_string(z));
        }
    }
}

void HistogramSpec::validate() const {
    if (!(bin_width > 0.0) || !std::isfinite(bin_width)) throw std::invalid_argument("bin_width must be > 0");
    if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) throw std::invalid_argument("histogram range must have lo < hi");
}

Histogram empty_histogram(const HistogramSpec& spec) {
    spec.validate();
    // The 1e-9 slack keeps exact multiples (1.0 / 0.05) from gaining a sliver bin.
    const long k0 = static_cast<long>(std::floor(spec.lo / spec.bin_width + 1e-9));
    const long k1 = static_cast<long>(std::ceil(spec.hi / spec.bin_width - 1e-9));
    Histogram h;
    h.bin_width = spec.bin_width;
    h.first_edge_index = k0;
    h.mass.assign(static_cast<std::size_t>(std::max(1L, k1 - k0)), 0.0);
    return h;
}

std::size_t bin_index(const Histogram& h, double z) {
    const long k = static_cast<long>(std::floor(z / h.bin_width)) - h.first_edge_index;
    return static_cast<std::size_t>(std::clamp<long>(k, 0, static_cast<long>(h.bins()) - 1));
}

Histogram build_histogram(const std::vector<double>& samples, const HistogramSpec& spec) {
    if (samples.empty()) throw std::invalid_argument("build_histogram: empty sample set");
    Histogram h = empty_histogram(spec);
    for (double z : samples) {
        if (!std::isfinite(z)) throw std::invalid_argument("build_histogram: non-finite sample");
        h.mass[bin_index(h, z)] += 1.0;
    }
    h.sample_count = samples.size();
    for (double& m : h.mass) m /= static_cast<double>(samples.size());
    return h;
}

namespace {

constexpr double inv_sqrt2 = 0.70710678118654752440;
constexpr double inv_sqrt2pi = 0.39894228040143267794;

double normal_cdf(double u) { return 0.5 * std::erfc(-u * inv_sqrt2); }
double normal_pdf(double u) { return std::isinf(u) ? 0.0 : inv_sqrt2pi * std::exp(-0.5 * u * u); }

// Bin k of the layout as [a, b], with the edge bins opened to +-infinity.
std::pair<double, double> bin_limits(const Histogram& layout, std::size_t k) {
    const double inf = std::numeric_limits<double>::infinity();
    const double a = k == 0 ? -inf : layout.left_edge(k);
    const double b = k + 1 == layout.bins() ? inf : layout.left_edge(k + 1);
    return {a, b};
}

struct ComponentMass {
    double mass;
    double d_centre;  // d mass / d centre
    double d_sigma;
};

ComponentMass component_mass(double a, double b, double centre, double sigma) {
    const double ua = (a - centre) / sigma;
    const double ub = (b - centre) / sigma;
    const double pa = normal_pdf(ua), pb = normal_pdf(ub);
    const double ua_pa = std::isinf(ua) ? 0.0 : ua * pa;
    const double ub_pb = std::isinf(ub) ? 0.0 : ub * pb;
    // Upper tail through erfc keeps precision when both limits sit far right.
    const double mass = ua > 0.0 ? 0.5 * (std::erfc(ua * inv_sqrt2) - std::erfc(ub * inv_sqrt2))
                                 : normal_cdf(ub) - normal_cdf(ua);
    return {mass, (pa - pb) / sigma, (ua_pa - ub_pb) / sigma};
}

}  // namespace

std::vector<double> mixture_bin_masses(const DoubleGaussianFit& fit, const Histogram& layout) {
    std::vector<double> m(layout.bins());
    for (std::size_t k = 0; k < m.size(); ++k) {
        const auto [a, b] = bin_limits(layout, k);
        m[k] = fit.amp_plus * component_mass(a, b, fit.separation, fit.width).mass +
               fit.amp_minus * component_mass(a, b, -fit.separation, fit.width).mass;
    }
    return m;
}

DoubleGaussianFit fit_double_gaussian(const Histogram& histogram, const FitOptions& options) {
    const std::size_t nb = histogram.bins();
    if (nb < 4) throw std::invalid_argument("fit_double_gaussian: needs at least 4 bins");
    double total = 0.0;
    for (double v : histogram.mass) total += v;
    if (!(std::abs(total - 1.0) < 1e-9)) throw std::invalid_argument("fit_double_gaussian: histogram not normalized");

    const bool eq = options.equal_amplitudes;
    const bool logscale = options.scale == FitScale::log;
    const double floor = 0.5 / static_cast<double>(std::max<std::size_t>(histogram.sample_count, 1));
    const double w = histogram.bin_width;

    auto unpack = [&](const Eigen::VectorXd& p) {
        DoubleGaussianFit f;
        f.separation = p[0];
        f.width = p[1];
        f.amp_plus = p[2];
        f.amp_minus = eq ? p[2] : p[3];
        return f;
    };

    LeastSquaresProblem problem;
    problem.evaluate = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        const DoubleGaussianFit f = unpack(p);
        r.resize(static_cast<Eigen::Index>(nb));
        if (jac) jac->setZero(static_cast<Eigen::Index>(nb), p.size());
        for (std::size_t k = 0; k < nb; ++k) {
            const auto [a, b] = bin_limits(histogram, k);
            const auto cp = component_mass(a, b, f.separation, f.width);
            const auto cm = component_mass(a, b, -f.separation, f.width);
            const double model = f.amp_plus * cp.mass + f.amp_minus * cm.mass;
            const double data = histogram.mass[k];
            const auto row = static_cast<Eigen::Index>(k);
            double s = 1.0;
            if (logscale) {
                r[row] = std::log(model + floor) - std::log(data + floor);
                s = 1.0 / (model + floor);
            } else {
                r[row] = model - data;
            }
            if (jac) {
                (*jac)(row, 0) = s * (f.amp_plus * cp.d_centre - f.amp_minus * cm.d_centre);
                (*jac)(row, 1) = s * (f.amp_plus * cp.d_sigma + f.amp_minus * cm.d_sigma);
                if (eq) {
                    (*jac)(row, 2) = s * (cp.mass + cm.mass);
                } else {
                    (*jac)(row, 2) = s * cp.mass;
                    (*jac)(row, 3) = s * cm.mass;
                }
            }
        }
    };
    const Eigen::Index np = eq ? 3 : 4;
    problem.lower = Eigen::VectorXd::Zero(np);
    problem.upper = Eigen::VectorXd::Constant(np, 2.0);
    problem.lower[1] = 1e-3 * w;

    // Starts: (a) moments of |z|, (b) symmetric split of the global variance.
    double mean = 0.0, mean_abs = 0.0, second = 0.0, plus = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
        const double c = histogram.centre(k), h = histogram.mass[k];
        mean += h * c;
        mean_abs += h * std::abs(c);
        second += h * c * c;
        if (c > 0.0) plus += h;
    }
    double spread_abs = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
        const double d = std::abs(histogram.centre(k)) - mean_abs;
        spread_abs += histogram.mass[k] * d * d;
    }
    const double variance = std::max(second - mean * mean, 0.0);

    std::vector<Eigen::VectorXd> starts;
    auto make_start = [&](double zbar, double sigma, double ap, double am) {
        Eigen::VectorXd p(np);
        p[0] = zbar;
        p[1] = std::max(sigma, 0.25 * w);
        p[2] = eq ? 0.5 * (ap + am) : ap;
        if (!eq) p[3] = am;
        starts.push_back(p);
    };
    make_start(mean_abs, std::sqrt(spread_abs), plus, 1.0 - plus);
    make_start(std::sqrt(0.5 * variance), std::sqrt(0.5 * variance), 0.5, 0.5);

    LmOptions lm;
    lm.max_iterations = 300;
    DoubleGaussianFit best;
    best.residual = std::numeric_limits<double>::infinity();
    for (const auto& s : starts) {
        const LmResult res = levenberg_marquardt(problem, s, lm);
        if (!std::isfinite(res.sum_squares)) continue;
        if (res.sum_squares < best.residual) {
            best = unpack(res.params);
            best.residual = res.sum_squares;
            best.gradient_norm = res.gradient_norm;
            best.converged = res.converged;
        }
    }
    return best;
}

std::uint64_t replica_seed(std::uint64_t master, std::uint64_t replica) noexcept {
    // splitmix64 finalizer over the master seed with the index mixed in.
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (replica + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

MeasurementSeries synth_samples(const std::vector<double>& scattering_lengths,
                                const std::vector<DoubleGaussianFit>& fits, const std::vector<std::size_t>& n_samples,
                                std::uint64_t seed) {
    if (fits.size() != scattering_lengths.size() || n_samples.size() != scattering_lengths.size()) {
        throw std::invalid_argument("synth_samples: one fit and one sample count per scattering length");
    }
    MeasurementSeries s;
    s.scattering_lengths = scattering_lengths;
    s.rng_seed = seed;
    s.records.resize(fits.size());
    for (std::size_t i = 0; i < fits.size(); ++i) {
        const auto& f = fits[i];
        if (!(f.width > 0.0) || !(f.amp_plus >= 0.0) || !(f.amp_minus >= 0.0) || !(f.amp_plus + f.amp_minus > 0.0)) {
            throw std::invalid_argument("synth_samples: invalid mixture at index " + std::to_string(i));
        }
        std::mt19937_64 rng(replica_seed(seed, i));
        std::uniform_real_distribution<double> pick(0.0, 1.0);
        std::normal_distribution<double> noise(0.0, f.width);
        const double p_plus = f.amp_plus / (f.amp_plus + f.amp_minus);
        auto& rec = s.records[i];
        rec.resize(n_samples[i]);
        for (auto& z : rec) {
            const double centre = pick(rng) < p_plus ? f.separation : -f.separation;
            z = std::clamp(centre + noise(rng), -1.0, 1.0);
        }
    }
    return s;
}

PointEstimate chi_mom_experimental(const std::vector<double>& scattering_lengths,
                                   const std::vector<DoubleGaussianFit>& fits, std::size_t index) {
    if (fits.size() != scattering_lengths.size()) throw std::invalid_argument("chi_mom: one fit per scattering length");
    const double sigma = fits.at(index).width;
    if (!(sigma > 0.0)) throw std::domain_error("chi_mom: zero sigma_z at index " + std::to_string(index));
    std::vector<double> zbar(fits.size());
    for (std::size_t i = 0; i < fits.size(); ++i) zbar[i] = fits[i].separation;
    const double d = grid_derivative(zbar, scattering_lengths, index);
    return {d * d / (sigma * sigma), index == 0 || index + 1 == fits.size()};
}

PointEstimate chi_cl_experimental(const std::vector<double>& scattering_lengths,
                                  const std::vector<Histogram>& histograms, std::size_t index) {
    const std::size_t n = scattering_lengths.size();
    if (histograms.size() != n) throw std::invalid_argument("chi_cl: one histogram per scattering length");
    if (n < 2) throw std::invalid_argument("chi_cl: needs at least two scattering lengths");
    if (index >= n) throw std::out_of_range("chi_cl: index out of range");
    const auto& hi = histograms[index];
    double sxy = 0.0, sxx = 0.0;
    bool flat = true;
    for (std::size_t j : {index - 1, index + 1}) {
        if (j >= n) continue;  // also catches index - 1 wrapping at 0
        const auto& hj = histograms[j];
        if (hj.bins() != hi.bins() || hj.first_edge_index != hi.first_edge_index || hj.bin_width != hi.bin_width) {
            throw std::invalid_argument("chi_cl: histograms use different binnings");
        }
        const double eps = scattering_lengths[j] - scattering_lengths[index];
        const double y = hellinger_infidelity(hi.mass, hj.mass);
        if (y > 1e-14) flat = false;
        const double x = eps * eps / 8.0;
        sxy += x * y;
        sxx += x * x;
    }
    PointEstimate out;
    out.one_sided = index == 0 || index + 1 == n;
    out.value = flat ? 0.0 : std::max(0.0, sxy / sxx);
    return out;
}

SeriesAnalysis analyze_series(const MeasurementSeries& series, const AnalysisOptions& options) {
    series.validate();
    SeriesAnalysis a;
    const std::size_t n = series.size();
    a.scattering_lengths = series.scattering_lengths;
    a.sample_counts.resize(n);
    a.fit_histograms.resize(n);
    a.chi_cl_histograms.resize(n);
    a.fits.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        a.sample_counts[i] = series.records[i].size();
        a.fit_histograms[i] = build_histogram(series.records[i], options.fit_histogram);
        a.chi_cl_histograms[i] = build_histogram(series.records[i], options.chi_cl_histogram);
        a.fits[i] = fit_double_gaussian(a.fit_histograms[i], options.fit);
    }
    a.chi_mom.resize(n);
    a.chi_cl.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        a.chi_mom[i] = chi_mom_experimental(a.scattering_lengths, a.fits, i);
        a.chi_cl[i] = chi_cl_experimental(a.scattering_lengths, a.chi_cl_histograms, i);
    }
    return a;
}

std::string_view to_string(Estimator e) { return e == Estimator::chi_mom ? "chi_mom" : "chi_cl"; }
std::string_view to_string(BackgroundKind b) { return b == BackgroundKind::none ? "none" : "exponential"; }

Estimator estimator_from_string(std::string_view name) {
    if (name == "chi_mom" || name == "moment") return Estimator::chi_mom;
    if (name == "chi_cl" || name == "classical") return Estimator::chi_cl;
    throw std::invalid_argument("unknown estimator '" + std::string(name) + "'");
}

BackgroundKind background_from_string(std::string_view name) {
    if (name == "none") return BackgroundKind::none;
    if (name == "exponential") return BackgroundKind::exponential;
    throw std::invalid_argument("unknown background kind '" + std::string(name) + "'");
}

BackgroundKind default_background(Estimator e) noexcept {
    return e == Estimator::chi_mom ? BackgroundKind::exponential : BackgroundKind::none;
}

ReplicaHistogram histogram_replicas(const std::vector<double>& values, std::size_t bins, bool include_zero) {
    if (values.empty() || bins == 0) throw std::invalid_argument("histogram_replicas: no values");
    double lo = *std::min_element(values.begin(), values.end());
    double hi = *std::max_element(values.begin(), values.end());
    if (include_zero) lo = std::min(lo, 0.0);
    if (!(hi > lo)) {
        const double pad = std::max(std::abs(lo) * 1e-6, 1e-12);
        lo -= pad;
        hi += pad;
    }
    ReplicaHistogram h;
    h.lo = lo;
    h.bin_width = (hi - lo) / static_cast<double>(bins);
    h.counts.assign(bins, 0.0);
    for (double v : values) {
        auto k = static_cast<std::size_t>(std::max(0.0, std::floor((v - lo) / h.bin_width)));
        h.counts[std::min(k, bins - 1)] += 1.0;
    }
    return h;
}

GaussianBackgroundFit fit_gaussian_with_background(const ReplicaHistogram& histogram, BackgroundKind kind) {
    const std::size_t nb = histogram.counts.size();
    if (nb < 3) throw std::invalid_argument("fit_gaussian_with_background: needs at least 3 bins");
    double total = 0.0, mean = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
        total += histogram.counts[k];
        mean += histogram.counts[k] * histogram.centre(k);
    }
    if (!(total > 0.0)) throw std::invalid_argument("fit_gaussian_with_background: empty histogram");
    mean /= total;
    double var = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
        const double d = histogram.centre(k) - mean;
        var += histogram.counts[k] * d * d;
    }
    var /= total;
    const double bw = histogram.bin_width;
    const double span = bw * static_cast<double>(nb);

    const bool with_bg = kind == BackgroundKind::exponential;
    LeastSquaresProblem problem;
    // Parameters (c, w, A) or (c, w, A, B, tau).
    problem.evaluate = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        r.resize(static_cast<Eigen::Index>(nb));
        if (jac) jac->setZero(static_cast<Eigen::Index>(nb), p.size());
        for (std::size_t k = 0; k < nb; ++k) {
            const auto row = static_cast<Eigen::Index>(k);
            const double x = histogram.centre(k);
            const double u = (x - p[0]) / p[1];
            const double g = std::exp(-0.5 * u * u);
            double model = p[2] * g;
            if (jac) {
                (*jac)(row, 0) = p[2] * g * u / p[1];
                (*jac)(row, 1) = p[2] * g * u * u / p[1];
                (*jac)(row, 2) = g;
            }
            if (p.size() == 5) {
                const double e = std::exp(-x / p[4]);
                model += p[3] * e;
                if (jac) {
                    (*jac)(row, 3) = e;
                    (*jac)(row, 4) = p[3] * e * x / (p[4] * p[4]);
                }
            }
            r[row] = model - histogram.counts[k];
        }
    };

    GaussianBackgroundFit out;
    // Gaussian alone first; its optimum seeds the background fit.
    Eigen::VectorXd p(3);
    p << mean, std::max(std::sqrt(var), bw), total * bw / (std::sqrt(2.0 * std::numbers::pi) * std::max(std::sqrt(var), bw));
    problem.lower = Eigen::Vector3d(histogram.lo - span, 1e-3 * bw, 0.0);
    problem.upper = Eigen::Vector3d(histogram.lo + 2.0 * span, 10.0 * span, 10.0 * total);
    LmResult res = levenberg_marquardt(problem, p);
    Eigen::VectorXd best = res.params;
    double best_cost = res.sum_squares;

    if (with_bg) {
        Eigen::VectorXd q(5);
        q << best[0], best[1], best[2], std::min(1.0, histogram.counts[0]), std::max(span / 10.0, bw);
        problem.lower = Eigen::VectorXd(5);
        problem.upper = Eigen::VectorXd(5);
        problem.lower << histogram.lo - span, 1e-3 * bw, 0.0, 0.0, 0.1 * bw;
        problem.upper << histogram.lo + 2.0 * span, 10.0 * span, 10.0 * total, 1.0, 10.0 * span;
        const LmResult rb = levenberg_marquardt(problem, q);
        best = rb.params;
        best_cost = rb.sum_squares;
        out.background_amplitude = std::clamp(best[3], 0.0, 1.0);
        out.background_decay = best[4];
    } else {
        out.background_amplitude = 0.0;
    }
    out.centre = best[0];
    out.width = std::abs(best[1]);
    out.amplitude = best[2];
    out.residual = best_cost;
    out.degenerate = !std::isfinite(out.width) || out.width < 1e-2 * bw || !(out.amplitude > 0.0);
    return out;
}

namespace {

Histogram multinomial_histogram(const Histogram& layout, const std::vector<double>& masses, std::size_t n,
                                std::mt19937_64& rng) {
    Histogram h = layout;
    h.sample_count = n;
    std::fill(h.mass.begin(), h.mass.end(), 0.0);
    double remaining_mass = 0.0;
    for (double m : masses) remaining_mass += m;
    long long remaining = static_cast<long long>(n);
    for (std::size_t k = 0; k < masses.size() && remaining > 0; ++k) {
        long long c;
        if (k + 1 == masses.size() || remaining_mass <= 0.0) {
            c = remaining;
        } else {
            const double p = std::clamp(masses[k] / remaining_mass, 0.0, 1.0);
            c = std::binomial_distribution<long long>(remaining, p)(rng);
        }
        h.mass[k] = static_cast<double>(c) / static_cast<double>(n);
        remaining -= c;
        remaining_mass -= masses[k];
    }
    return h;
}

// One replica of the estimator at every grid point; empty when a fit fails.
std::vector<double> run_replica(const SeriesAnalysis& a, Estimator estimator, const AnalysisOptions& options,
                                const std::vector<std::vector<double>>& masses, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = a.scattering_lengths.size();
    std::vector<double> values(n);
    if (estimator == Estimator::chi_mom) {
        std::vector<DoubleGaussianFit> fits(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Histogram h = multinomial_histogram(a.fit_histograms[i], masses[i], a.sample_counts[i], rng);
            fits[i] = fit_double_gaussian(h, options.fit);
            if (!fits[i].converged || !std::isfinite(fits[i].separation) || !(fits[i].width > 0.0)) return {};
        }
        for (std::size_t i = 0; i < n; ++i) values[i] = chi_mom_experimental(a.scattering_lengths, fits, i).value;
    } else {
        std::vector<Histogram> hs(n);
        for (std::size_t i = 0; i < n; ++i) {
            hs[i] = multinomial_histogram(a.chi_cl_histograms[i], masses[i], a.sample_counts[i], rng);
        }
        for (std::size_t i = 0; i < n; ++i) values[i] = chi_cl_experimental(a.scattering_lengths, hs, i).value;
    }
    for (double v : values) {
        if (!std::isfinite(v)) return {};
    }
    return values;
}

}  // namespace

BootstrapResult bootstrap(const SeriesAnalysis& analysis, Estimator estimator, const BootstrapOptions& options,
                          BackgroundKind background) {
    const std::size_t n = analysis.scattering_lengths.size();
    if (n < 2 || analysis.fits.size() != n) throw std::invalid_argument("bootstrap: analysis incomplete");
    if (options.n_replicas < 100) throw std::invalid_argument("bootstrap: n_replicas must be >= 100");

    // Expected bin masses of each fitted mixture, shared by every replica.
    std::vector<std::vector<double>> masses(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& layout = estimator == Estimator::chi_mom ? analysis.fit_histograms[i] : analysis.chi_cl_histograms[i];
        masses[i] = mixture_bin_masses(analysis.fits[i], layout);
    }

    const auto replicas = static_cast<std::size_t>(options.n_replicas);
    std::vector<std::vector<double>> per_replica(replicas);
    std::vector<char> redrawn(replicas, 0);
    parallel_for(replicas, options.threads, [&](std::size_t r) {
        const std::uint64_t seed = replica_seed(options.seed, r);
        per_replica[r] = run_replica(analysis, estimator, options.analysis, masses, seed);
        if (per_replica[r].empty()) {
            redrawn[r] = 1;
            per_replica[r] = run_replica(analysis, estimator, options.analysis, masses, replica_seed(seed, 0xD1CEULL));
        }
    });

    BootstrapResult out;
    out.estimator = estimator;
    out.background_kind = background;
    out.n_replicas = options.n_replicas;
    for (std::size_t r = 0; r < replicas; ++r) {
        out.redraws += redrawn[r];
        if (per_replica[r].empty()) ++out.failures;
    }
    if (static_cast<double>(out.failures) > options.max_failure_fraction * static_cast<double>(replicas)) {
        throw BootstrapAbort("bootstrap aborted: " + std::to_string(out.failures) + " of " + std::to_string(replicas) +
                                 " replicas failed",
                             out.failures, options.n_replicas);
    }

    out.points.resize(n);
    if (options.keep_replicas) out.replica_values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> values;
        values.reserve(replicas);
        for (const auto& v : per_replica) {
            if (!v.empty()) values.push_back(v[i]);
        }
        auto& pt = out.points[i];
        pt.estimate = estimator == Estimator::chi_mom ? analysis.chi_mom[i].value : analysis.chi_cl[i].value;
        pt.histogram = histogram_replicas(values, options.replica_bins, background == BackgroundKind::exponential);
        pt.fit = fit_gaussian_with_background(pt.histogram, background);
        pt.centre = pt.fit.centre;
        pt.width = pt.fit.width;
        if (options.keep_replicas) out.replica_values[i] = std::move(values);
    }
    return out;
}

BootstrapResult bootstrap(const SeriesAnalysis& analysis, Estimator estimator, const BootstrapOptions& options) {
    return bootstrap(analysis, estimator, options, default_background(estimator));
}

double OrderParameterFamily::zbar(double a) const {
    if (kind == Kind::tanh) return offset + scale * std::tanh((critical - a) / smoothing);
    if (a >= critical) return 0.0;
    const double r = critical / a;
    return std::sqrt(1.0 - r * r);
}

double OrderParameterFamily::dzbar(double a) const {
    if (kind == Kind::tanh) {
        const double c = std::cosh((critical - a) / smoothing);
        return -scale / (smoothing * c * c);
    }
    if (a >= critical) return 0.0;
    return critical * critical / (a * a * a) / zbar(a);
}

DoubleGaussianFit OrderParameterFamily::mixture(double a) const {
    DoubleGaussianFit f;
    f.separation = zbar(a);
    f.width = sigma;
    f.amp_plus = 0.5 * (1.0 + asymmetry);
    f.amp_minus = 0.5 * (1.0 - asymmetry);
    return f;
}

double OrderParameterFamily::chi_mom(double a) const {
    const double d = dzbar(a) / sigma;
    return d * d;
}

MeasurementSeries synth_family(const OrderParameterFamily& family, const std::vector<double>& scattering_lengths,
                               std::size_t n_samples, std::uint64_t seed) {
    std::vector<DoubleGaussianFit> fits;
    for (double a : scattering_lengths) fits.push_back(family.mixture(a));
    return synth_samples(scattering_lengths, fits, std::vector<std::size_t>(scattering_lengths.size(), n_samples), seed);
}

MeasurementSeries read_series_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    const std::size_t ca = t.column("scattering_length_a0");
    const std::size_t cz = t.column("z");
    std::map<double, std::vector<double>> grouped;
    for (const auto& row : t.rows()) {
        if (row.size() <= std::max(ca, cz)) throw std::invalid_argument("short row in " + path.string());
        grouped[std::stod(row[ca])].push_back(std::stod(row[cz]));
    }
    MeasurementSeries s;
    for (auto& [a, zs] : grouped) {
        s.scattering_lengths.push_back(a);
        s.records.push_back(std::move(zs));
    }
    s.validate();
    return s;
}

}  // namespace critsense
