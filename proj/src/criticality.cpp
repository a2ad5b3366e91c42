#include "critsense/criticality.hpp"

#include "critsense/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace critsense {

namespace {

Eigen::Index thermal_rank(const TridiagonalHamiltonian& h, double temperature, double cutoff) {
    const Eigen::Index dim = h.dimension();
    if (temperature == 0.0) return ground_multiplicity(h);
    if (cutoff <= 0.0) return dim;
    const double e0 = bisect_eigenvalue(h.matrix, 0);
    const Eigen::Index count = std::max<Eigen::Index>(1, count_below(h.matrix, e0 + temperature * std::log(1.0 / cutoff)));
    return count * 4 > dim ? dim : count;
}

ThermalState state_with_rank(const TridiagonalHamiltonian& h, double temperature, Eigen::Index rank) {
    if (rank >= h.dimension()) return thermal_state(diagonalize(h), temperature);
    return thermal_state(lowest_states(h, rank), temperature);
}

struct StateData {
    DistributionOverM distribution;
    DensityOperator rho;
    JzMoments moments;
};

StateData state_data(const ThermalState& state, bool need_rho) {
    StateData d;
    d.distribution = jz_distribution(state);
    d.moments = jz_moments(d.distribution);
    if (need_rho) d.rho = DensityOperator::from_state(state, 0.0);
    return d;
}

std::span<const double> as_span(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

void check_grid(const std::vector<double>& grid, std::size_t min_points) {
    if (grid.size() < min_points) {
        throw std::invalid_argument("lambda grid needs at least " + std::to_string(min_points) + " points");
    }
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!std::isfinite(grid[k])) throw std::invalid_argument("lambda grid contains a non-finite value");
        if (k > 0 && !(grid[k] > grid[k - 1])) throw std::invalid_argument("lambda grid must be strictly increasing");
    }
}

}  // namespace

void ScanConfig::validate() const {
    params.validate();
    check_grid(lambda_grid, 3);
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw std::invalid_argument("temperature must be >= 0");
    if (!(epsilon0 > 0.0) || !std::isfinite(epsilon0)) throw std::invalid_argument("epsilon0 must be > 0");
    if (!(rank_cutoff >= 0.0 && rank_cutoff < 1.0)) throw std::invalid_argument("rank_cutoff must lie in [0, 1)");
    if (!which.moment && !which.classical && !which.quantum) throw std::invalid_argument("no method selected");
}

PointSusceptibility evaluate_point(const ModelParams& params, double lambda, MethodSet which,
                                   const PointOptions& options) {
    const ModelParams centre_params = params.with_control(lambda);
    centre_params.validate();
    if (!(options.temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");

    const bool fidelities = which.classical || which.quantum;
    const bool stencil_moment = which.moment && options.moment_derivative == MomentDerivative::stencil;
    const bool need_offsets = fidelities || stencil_moment;

    const auto h0 = build_hamiltonian(centre_params);
    const Eigen::Index rank = thermal_rank(h0, options.temperature, options.rank_cutoff);
    const StateData centre = state_data(state_with_rank(h0, options.temperature, rank), which.quantum);

    PointSusceptibility out;
    out.lambda = lambda;
    out.rank = std::min(rank, h0.dimension());
    out.mean = centre.moments.mean;
    out.variance = centre.moments.variance;
    if (!need_offsets) return out;

    const auto eps = default_epsilon_grid(lambda, options.epsilon0);
    std::vector<StateData> shifted;
    shifted.reserve(eps.size());
    for (double e : eps) {
        const auto h = build_hamiltonian(params.with_control(lambda + e));
        shifted.push_back(state_data(state_with_rank(h, options.temperature, rank), which.quantum));
    }
    auto index_of = [&](double e) {
        return static_cast<std::size_t>(std::find(eps.begin(), eps.end(), e) - eps.begin());
    };

    if (which.classical) {
        const auto est = susceptibility_from_infidelity(
            [&](double e) {
                return hellinger_infidelity(as_span(centre.distribution.probabilities),
                                            as_span(shifted[index_of(e)].distribution.probabilities));
            },
            eps, Method::classical);
        out.chi_cl = est.value;
        out.residual_cl = est.fit_residual;
    }
    if (which.quantum) {
        const auto est = susceptibility_from_infidelity(
            [&](double e) { return uhlmann_infidelity(centre.rho, shifted[index_of(e)].rho); }, eps,
            Method::quantum);
        out.chi_q = est.value;
        out.residual_q = est.fit_residual;
    }
    if (stencil_moment) {
        // eps = {-2e, -e, e, 2e}
        const double e = eps[2];
        out.dmean = (shifted[0].moments.mean - 8.0 * shifted[1].moments.mean + 8.0 * shifted[2].moments.mean -
                     shifted[3].moments.mean) /
                    (12.0 * e);
        if (!(out.variance > 0.0)) {
            throw std::domain_error("chi_mom: zero variance at lambda " + std::to_string(lambda));
        }
        out.chi_mom = out.dmean * out.dmean / out.variance;
    }
    return out;
}

SusceptibilityCurve scan_lambda(const ScanConfig& config) {
    config.validate();
    const auto& grid = config.lambda_grid;
    std::vector<PointSusceptibility> points(grid.size());
    const PointOptions opts = config.point_options();

    parallel_for(grid.size(), config.threads, [&](std::size_t i) {
        try {
            points[i] = evaluate_point(config.params, grid[i], config.which, opts);
        } catch (const std::exception& e) {
            throw ScanError("scan failed at lambda=" + std::to_string(grid[i]) + ": " + e.what(), grid[i]);
        }
    });

    SusceptibilityCurve c;
    c.lambda_grid = grid;
    c.n_particles = config.params.n_particles;
    c.tunneling = config.params.tunneling;
    c.delta = config.params.imbalance;
    c.temperature = config.temperature;
    c.epsilon0 = config.epsilon0;
    c.which = config.which;
    const std::size_t n = grid.size();
    c.chi_mom.assign(n, 0.0);
    c.chi_cl.assign(n, 0.0);
    c.chi_q.assign(n, 0.0);
    c.mean.resize(n);
    c.variance.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        c.mean[i] = points[i].mean;
        c.variance[i] = points[i].variance;
        c.chi_cl[i] = points[i].chi_cl;
        c.chi_q[i] = points[i].chi_q;
        c.chi_mom[i] = points[i].chi_mom;
    }
    if (config.which.moment && config.moment_derivative == MomentDerivative::grid) {
        for (std::size_t i = 0; i < n; ++i) {
            c.chi_mom[i] = chi_mom_from_curves(c.mean, c.variance, grid, i).value;
        }
    }
    return c;
}

TemperatureCurve scan_temperature(const ModelParams& params, double lambda, const std::vector<double>& temperatures,
                                  MethodSet which, const PointOptions& base, unsigned threads) {
    TemperatureCurve out;
    out.lambda = lambda;
    out.temperatures = temperatures;
    out.points.resize(temperatures.size());
    for (double t : temperatures) {
        if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("temperatures must be finite and >= 0");
    }
    PointOptions opts = base;
    opts.moment_derivative = MomentDerivative::stencil;
    parallel_for(temperatures.size(), threads, [&](std::size_t i) {
        PointOptions o = opts;
        o.temperature = temperatures[i];
        out.points[i] = evaluate_point(params, lambda, which, o);
    });
    return out;
}

std::vector<double> uniform_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw std::invalid_argument("uniform_grid needs lo < hi and step > 0");
    }
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-6)) + 1;
    std::vector<double> g(count);
    for (std::size_t k = 0; k < count; ++k) g[k] = lo + static_cast<double>(k) * step;
    return g;
}

PeakEstimate find_peak(const std::vector<double>& grid, const std::vector<double>& values) {
    if (grid.size() != values.size() || grid.empty()) throw std::invalid_argument("find_peak: size mismatch or empty");
    PeakEstimate p;
    p.index = static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
    p.location = grid[p.index];
    p.value = values[p.index];
    p.interior = p.index > 0 && p.index + 1 < grid.size();
    if (!p.interior) return p;
    const double x0 = grid[p.index - 1], x1 = grid[p.index], x2 = grid[p.index + 1];
    const double f0 = values[p.index - 1], f1 = values[p.index], f2 = values[p.index + 1];
    const double num = (x1 - x0) * (x1 - x0) * (f1 - f2) - (x1 - x2) * (x1 - x2) * (f1 - f0);
    const double den = (x1 - x0) * (f1 - f2) - (x1 - x2) * (f1 - f0);
    if (den != 0.0) {
        const double v = x1 - 0.5 * num / den;
        if (v >= x0 && v <= x2) p.location = v;
    }
    return p;
}

std::pair<SusceptibilityCurve, PeakEstimate> refine_peak(const ScanConfig& coarse, Method method, double centre,
                                                         const RefineOptions& refine) {
    ScanConfig fine = coarse;
    fine.which = MethodSet::only(method);
    fine.lambda_grid = uniform_grid(centre - refine.half_width, centre + refine.half_width, refine.step);
    auto curve = scan_lambda(fine);
    auto peak = find_peak(curve.lambda_grid, curve.values(method));
    return {std::move(curve), peak};
}

double energy_gap(const ModelParams& params, int lower_level, int upper_level) {
    const auto h = build_hamiltonian(params);
    if (lower_level < 0 || upper_level <= lower_level || upper_level >= h.dimension()) {
        throw std::invalid_argument("gap levels must satisfy 0 <= lower < upper <= N");
    }
    return bisect_eigenvalue(h.matrix, upper_level) - bisect_eigenvalue(h.matrix, lower_level);
}

CriticalPointResult locate_critical_gap(const ModelParams& params_template, int n_particles, double lambda_lo,
                                        double lambda_hi, const GapOptions& options) {
    ModelParams p = params_template;
    p.n_particles = n_particles;
    p.validate();
    const auto grid = uniform_grid(lambda_lo, lambda_hi, options.coarse_step);
    if (grid.size() < 3) throw std::invalid_argument("gap bracket too narrow for the coarse step");

    CriticalPointResult r;
    auto gap = [&](double lambda) {
        ++r.evaluations;
        return energy_gap(p.with_control(lambda), options.lower_level, options.upper_level);
    };
    std::vector<double> g(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) g[k] = gap(grid[k]);
    const auto k = static_cast<std::size_t>(std::min_element(g.begin(), g.end()) - g.begin());
    if (k == 0 || k + 1 == grid.size()) {
        throw std::runtime_error("no interior gap minimum in [" + std::to_string(lambda_lo) + ", " +
                                 std::to_string(lambda_hi) + "] for N=" + std::to_string(n_particles));
    }

    // Golden-section search on the coarse bracket.
    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = grid[k - 1], b = grid[k + 1];
    double c = b - ratio * (b - a), d = a + ratio * (b - a);
    double fc = gap(c), fd = gap(d);
    while (b - a > options.tolerance) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = gap(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = gap(d);
        }
    }
    r.lambda_c_N = 0.5 * (a + b);
    r.gap_at_min = gap(r.lambda_c_N);
    r.bracket_lo = grid[k - 1];
    r.bracket_hi = grid[k + 1];
    return r;
}

namespace {

struct PeakSearch {
    const ModelParams& base;
    double temperature;
    const DeltaOptions& options;

    ScanConfig config(double delta, MethodSet which, std::vector<double> grid) const {
        ScanConfig c;
        c.params = base;
        c.params.imbalance = delta;
        c.lambda_grid = std::move(grid);
        c.temperature = temperature;
        c.epsilon0 = options.epsilon0;
        c.rank_cutoff = options.rank_cutoff;
        c.moment_derivative = options.moment_derivative;
        c.which = which;
        c.threads = options.threads;
        return c;
    }

    SusceptibilityCurve coarse(double delta, MethodSet which) const {
        return scan_lambda(config(delta, which, uniform_grid(options.window_lo, options.window_hi, options.coarse_step)));
    }

    static bool usable(const PeakEstimate& p) { return p.interior && p.value > 1e-12 && std::isfinite(p.value); }

    // Refined peak for one delta, searched within half_width of centre. Falls back
    // to a coarse rescan when the peak lands on the edge of the window.
    std::pair<SusceptibilityCurve, PeakEstimate> refined(double delta, Method method, double centre,
                                                         double half_width) const {
        RefineOptions r = options.refine;
        r.half_width = std::max(half_width, 3.0 * r.step);
        auto result = refine_peak(config(delta, MethodSet::only(method), {}), method, centre, r);
        if (!result.second.interior) {
            const auto c = coarse(delta, MethodSet::only(method));
            const auto p = find_peak(c.lambda_grid, c.values(method));
            if (!usable(p)) return result;
            result = refine_peak(config(delta, MethodSet::only(method), {}), method, p.location, options.refine);
        }
        return result;
    }
};

// a is better than b when closer to the target, ties toward smaller delta.
bool better(double dist_a, double delta_a, double dist_b, double delta_b) {
    if (dist_a != dist_b) return dist_a < dist_b;
    return delta_a < delta_b;
}

}  // namespace

std::vector<DeltaOptimization> optimize_delta(const ModelParams& params_template, double temperature,
                                              MethodSet methods, double lambda_c_N, const DeltaOptions& options) {
    params_template.validate();
    if (!(options.delta_min > 0.0) || !(options.delta_max > options.delta_min) || options.delta_points < 2) {
        throw std::invalid_argument("delta grid needs 0 < delta_min < delta_max and >= 2 points");
    }
    const PeakSearch search{params_template, temperature, options};

    std::vector<double> deltas(static_cast<std::size_t>(options.delta_points));
    const double l0 = std::log(options.delta_min), l1 = std::log(options.delta_max);
    for (std::size_t k = 0; k < deltas.size(); ++k) {
        deltas[k] = std::exp(l0 + (l1 - l0) * static_cast<double>(k) / static_cast<double>(deltas.size() - 1));
    }

    // Shared coarse pass.
    std::vector<SusceptibilityCurve> coarse;
    coarse.reserve(deltas.size());
    for (double d : deltas) coarse.push_back(search.coarse(d, methods));

    std::vector<DeltaOptimization> results;
    const double tol = options.tolerance();
    for (Method m : {Method::moment, Method::classical, Method::quantum}) {
        if (!methods.contains(m)) continue;
        DeltaOptimization opt;
        opt.method = m;

        std::vector<PeakEstimate> peaks(deltas.size());
        for (std::size_t k = 0; k < deltas.size(); ++k) {
            peaks[k] = find_peak(coarse[k].lambda_grid, coarse[k].values(m));
            opt.trials.push_back({deltas[k], peaks[k].location, PeakSearch::usable(peaks[k])});
        }

        // Adjacent pair whose coarse peaks straddle lambda_c_N, closest first.
        std::optional<std::size_t> pair;
        std::optional<std::size_t> nearest;
        for (std::size_t k = 0; k < deltas.size(); ++k) {
            if (!opt.trials[k].valid) continue;
            const double dk = std::abs(peaks[k].location - lambda_c_N);
            if (!nearest || better(dk, deltas[k], std::abs(peaks[*nearest].location - lambda_c_N), deltas[*nearest])) {
                nearest = k;
            }
            if (k + 1 < deltas.size() && opt.trials[k + 1].valid) {
                const double s0 = peaks[k].location - lambda_c_N, s1 = peaks[k + 1].location - lambda_c_N;
                if (s0 == 0.0 || s0 * s1 < 0.0) {
                    const double dmin = std::min(std::abs(s0), std::abs(s1));
                    if (!pair || dmin < std::min(std::abs(peaks[*pair].location - lambda_c_N),
                                                 std::abs(peaks[*pair + 1].location - lambda_c_N))) {
                        pair = k;
                    }
                }
            }
        }
        if (!nearest) {
            throw std::runtime_error("optimize_delta: no delta on the grid yields a " + std::string(to_string(m)) +
                                     " peak inside the lambda window");
        }

        double best_delta = deltas[*nearest];
        double best_dist = std::numeric_limits<double>::infinity();
        SusceptibilityCurve best_curve;
        PeakEstimate best_peak;
        auto consider = [&](double delta, std::pair<SusceptibilityCurve, PeakEstimate>&& r) {
            const double dist = std::abs(r.second.location - lambda_c_N);
            if (PeakSearch::usable(r.second) && better(dist, delta, best_dist, best_delta)) {
                best_dist = dist;
                best_delta = delta;
                best_curve = std::move(r.first);
                best_peak = r.second;
            }
            return r.second.location - lambda_c_N;
        };

        if (pair) {
            double lo = deltas[*pair], hi = deltas[*pair + 1];
            double s_lo = consider(lo, search.refined(lo, m, lambda_c_N, options.refine.half_width));
            double s_hi = consider(hi, search.refined(hi, m, lambda_c_N, options.refine.half_width));
            if (s_lo * s_hi <= 0.0) {
                for (int it = 0; it < options.bisection_steps && best_dist > tol; ++it) {
                    const double mid = std::sqrt(lo * hi);
                    const double width = std::min(options.refine.half_width,
                                                  std::max(std::abs(s_lo), std::abs(s_hi)) + 5.0 * options.refine.step);
                    const double s_mid = consider(mid, search.refined(mid, m, lambda_c_N, width));
                    if (s_mid == 0.0) break;
                    if (s_mid * s_lo < 0.0) {
                        hi = mid;
                        s_hi = s_mid;
                    } else {
                        lo = mid;
                        s_lo = s_mid;
                    }
                }
            }
        } else {
            consider(deltas[*nearest],
                     search.refined(deltas[*nearest], m, peaks[*nearest].location, options.refine.half_width));
        }
        if (!std::isfinite(best_dist)) {
            throw std::runtime_error("optimize_delta: refinement found no interior " + std::string(to_string(m)) +
                                     " peak");
        }
        opt.delta_star = best_delta;
        opt.peak_location = best_peak.location;
        opt.peak_value = best_peak.value;
        opt.within_tolerance = best_dist <= tol;
        opt.curve = std::move(best_curve);
        results.push_back(std::move(opt));
    }
    return results;
}

DeltaOptimization optimize_delta(const ModelParams& params_template, double temperature, Method method,
                                 double lambda_c_N, const DeltaOptions& options) {
    return std::move(optimize_delta(params_template, temperature, MethodSet::only(method), lambda_c_N, options).front());
}

PowerLawFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("fit_power_law: x and y differ in length");
    if (x.size() < 3) throw std::invalid_argument("fit_power_law: needs at least 3 points");
    const std::size_t n = x.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(x[i]) || !std::isfinite(y[i])) {
            throw std::invalid_argument("fit_power_law: inputs must be finite and positive");
        }
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_power_law: x values must not all coincide");
    PowerLawFit f;
    f.exponent = sxy / sxx;
    f.prefactor = std::exp(my - f.exponent * mx);
    f.points_used = n;
    if (syy > 0.0) {
        double rss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = ly[i] - (my + f.exponent * (lx[i] - mx));
            rss += r * r;
        }
        f.r_squared = std::clamp(1.0 - rss / syy, 0.0, 1.0);
    } else {
        f.r_squared = 1.0;
    }
    return f;
}

ScalingStudy scaling_study(const std::vector<int>& n_list, const ModelParams& params_template,
                           const ScalingOptions& options) {
    for (int n : n_list) {
        if (n < 10) throw std::invalid_argument("scaling_study: every N must be >= 10");
    }
    ScalingStudy study;
    study.rows.resize(n_list.size());

    const unsigned outer = std::min<unsigned>(resolve_threads(options.threads), std::max<std::size_t>(n_list.size(), 1));
    DeltaOptions delta_opts = options.delta;
    delta_opts.threads = outer > 1 ? 1 : options.threads;

    parallel_for(n_list.size(), outer, [&](std::size_t i) {
        ModelParams p = params_template;
        p.n_particles = n_list[i];
        p.imbalance = options.gap_delta;
        const auto cp = locate_critical_gap(p, n_list[i], options.bracket_lo, options.bracket_hi, options.gap);

        ScalingRow row;
        row.n_particles = n_list[i];
        row.lambda_c_N = cp.lambda_c_N;
        row.gap_at_min = cp.gap_at_min;
        const auto opts = optimize_delta(p, options.temperature, options.methods, cp.lambda_c_N, delta_opts);
        for (const auto& o : opts) {
            const auto mi = method_index(o.method);
            row.delta_star[mi] = o.delta_star;
            row.peak_location[mi] = o.peak_location;
            row.within_tolerance[mi] = o.within_tolerance;
            ModelParams q = p;
            q.imbalance = o.delta_star;
            PointOptions po;
            po.temperature = options.temperature;
            po.epsilon0 = delta_opts.epsilon0;
            po.rank_cutoff = delta_opts.rank_cutoff;
            po.moment_derivative = MomentDerivative::stencil;
            row.chi[mi] = evaluate_point(q, cp.lambda_c_N, MethodSet::only(o.method), po).value(o.method);
        }
        study.rows[i] = row;
    });

    if (study.rows.size() >= 3) {
        std::vector<double> ns, shift;
        for (const auto& r : study.rows) {
            ns.push_back(r.n_particles);
            shift.push_back(lambda_critical - r.lambda_c_N);
        }
        if (std::all_of(shift.begin(), shift.end(), [](double s) { return s > 0.0; })) {
            study.shift_fit = fit_power_law(ns, shift);
        }
        for (Method m : {Method::moment, Method::classical, Method::quantum}) {
            if (!options.methods.contains(m)) continue;
            std::vector<double> y;
            for (const auto& r : study.rows) y.push_back(r.chi[method_index(m)] / r.n_particles);
            if (std::all_of(y.begin(), y.end(), [](double v) { return v > 0.0; })) {
                study.fit[method_index(m)] = fit_power_law(ns, y);
            }
        }
    }
    return study;
}

double epsilon_stability(const ModelParams& params, double lambda, Method method, const PointOptions& options) {
    const auto chi = [&](double scale) {
        PointOptions o = options;
        o.epsilon0 *= scale;
        return evaluate_point(params, lambda, MethodSet::only(method), o).value(method);
    };
    const double base = chi(1.0);
    if (!(base > 0.0)) return 0.0;
    return std::max(std::abs(chi(0.5) - base), std::abs(chi(2.0) - base)) / base;
}

}  // namespace critsense
