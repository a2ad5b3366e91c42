// Scans over lambda, T and delta; finite-size critical points from the gap
// minimum; delta optimization; power-law fits for the scaling study.

#pragma once

#include "critsense/fidelity.hpp"
#include "critsense/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace critsense {

// Critical exponents of the junction (fully connected, so d = 1 and nu = 3/2).
namespace exponents {
inline constexpr double dimension = 1.0;
inline constexpr double nu = 1.5;
// chi / N ~ N^(2 / (d nu) - 1)
inline constexpr double susceptibility_per_particle = 2.0 / (dimension * nu) - 1.0;
// lambda_c - lambda_c(N) ~ N^(-1 / (d nu))
inline constexpr double critical_shift = -1.0 / (dimension * nu);
}  // namespace exponents

inline constexpr double lambda_critical = -1.0;

struct MethodSet {
    bool moment = true;
    bool classical = true;
    bool quantum = true;

    bool contains(Method m) const noexcept {
        return m == Method::moment ? moment : m == Method::classical ? classical : quantum;
    }
    static MethodSet only(Method m) {
        return MethodSet{m == Method::moment, m == Method::classical, m == Method::quantum};
    }
};

// How d<Jz>/dlambda is taken for chi_mom inside a scan.
//   stencil: five-point difference on the epsilon stencil of each point (default)
//   grid:    three-point difference across neighbouring scan points
enum class MomentDerivative { stencil, grid };

struct PointOptions {
    double temperature = 0.0;
    double epsilon0 = 1e-4;
    double rank_cutoff = 1e-12;
    MomentDerivative moment_derivative = MomentDerivative::stencil;
};

struct ScanConfig {
    ModelParams params;
    std::vector<double> lambda_grid;
    double temperature = 0.0;
    double epsilon0 = 1e-4;
    MethodSet which;
    MomentDerivative moment_derivative = MomentDerivative::stencil;
    double rank_cutoff = 1e-12;
    unsigned threads = 0;

    PointOptions point_options() const { return {temperature, epsilon0, rank_cutoff, moment_derivative}; }
    // Grid of at least 3 strictly increasing points, T >= 0, epsilon0 > 0, valid params.
    void validate() const;
};

struct PointSusceptibility {
    double lambda = 0.0;
    double mean = 0.0;
    double variance = 0.0;
    double dmean = 0.0;  // d<Jz>/dlambda from the stencil (0 when not computed)
    double chi_mom = 0.0;
    double chi_cl = 0.0;
    double chi_q = 0.0;
    double residual_cl = 0.0;
    double residual_q = 0.0;
    Eigen::Index rank = 1;  // thermal states retained

    double value(Method m) const noexcept {
        return m == Method::moment ? chi_mom : m == Method::classical ? chi_cl : chi_q;
    }
};

// Susceptibilities at one lambda (params.control is ignored). The thermal rank is
// fixed at the centre and reused for every epsilon offset.
PointSusceptibility evaluate_point(const ModelParams& params, double lambda, MethodSet which,
                                   const PointOptions& options = {});

struct SusceptibilityCurve {
    std::vector<double> lambda_grid;
    std::vector<double> chi_mom, chi_cl, chi_q;
    std::vector<double> mean, variance;
    int n_particles = 0;
    double tunneling = 1.0;
    double delta = 0.0;
    double temperature = 0.0;
    double epsilon0 = 0.0;
    MethodSet which;

    const std::vector<double>& values(Method m) const {
        return m == Method::moment ? chi_mom : m == Method::classical ? chi_cl : chi_q;
    }
    std::size_t size() const noexcept { return lambda_grid.size(); }
};

// Throws ScanError naming the failing lambda when a point cannot be evaluated.
SusceptibilityCurve scan_lambda(const ScanConfig& config);

class ScanError : public std::runtime_error {
public:
    ScanError(const std::string& what, double lambda) : std::runtime_error(what), lambda_(lambda) {}
    double lambda() const noexcept { return lambda_; }

private:
    double lambda_;
};

struct TemperatureCurve {
    std::vector<double> temperatures;
    std::vector<PointSusceptibility> points;
    double lambda = 0.0;
};

TemperatureCurve scan_temperature(const ModelParams& params, double lambda, const std::vector<double>& temperatures,
                                  MethodSet which, const PointOptions& base = {}, unsigned threads = 0);

// lo, lo + step, ... up to and including hi (within step / 1e6).
std::vector<double> uniform_grid(double lo, double hi, double step);

struct PeakEstimate {
    std::size_t index = 0;
    double location = 0.0;  // parabolic vertex through the three points around the argmax
    double value = 0.0;
    bool interior = false;
};

PeakEstimate find_peak(const std::vector<double>& grid, const std::vector<double>& values);

struct RefineOptions {
    double half_width = 0.05;
    double step = 2e-4;
};

// Rescans [peak - half_width, peak + half_width] at the finer step and returns the
// refined curve together with its peak.
std::pair<SusceptibilityCurve, PeakEstimate> refine_peak(const ScanConfig& coarse, Method method, double centre,
                                                         const RefineOptions& refine = {});

struct GapOptions {
    int lower_level = 0;
    int upper_level = 2;
    double coarse_step = 2e-3;
    double tolerance = 1e-9;
};

struct CriticalPointResult {
    double lambda_c_N = 0.0;
    double gap_at_min = 0.0;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    int evaluations = 0;
};

double energy_gap(const ModelParams& params, int lower_level, int upper_level);

// Minimum of E_upper - E_lower over lambda in [lo, hi] (params.n_particles is
// overridden by n_particles). Throws std::runtime_error when the coarse minimum
// sits on either end of the bracket.
CriticalPointResult locate_critical_gap(const ModelParams& params_template, int n_particles, double lambda_lo,
                                        double lambda_hi, const GapOptions& options = {});

struct DeltaOptions {
    double delta_min = 1e-6;
    double delta_max = 1e-1;
    int delta_points = 25;
    double window_lo = -1.6;
    double window_hi = -0.4;
    double coarse_step = 2e-3;
    RefineOptions refine;
    double epsilon0 = 1e-4;
    double rank_cutoff = 1e-12;
    MomentDerivative moment_derivative = MomentDerivative::stencil;
    int bisection_steps = 30;
    unsigned threads = 0;

    // Half a refinement step.
    double tolerance() const noexcept { return 0.5 * refine.step; }
};

struct DeltaTrial {
    double delta = 0.0;
    double peak = 0.0;
    bool valid = false;  // false when the curve is flat (no peak to locate)
};

struct DeltaOptimization {
    Method method = Method::quantum;
    double delta_star = 0.0;
    double peak_location = 0.0;
    double peak_value = 0.0;
    bool within_tolerance = false;  // false is the best-effort warning
    std::vector<DeltaTrial> trials;
    SusceptibilityCurve curve;  // refined curve at delta_star
};

// Picks the delta whose chi(lambda) peak lies closest to lambda_c_N; smaller delta
// wins ties. Logarithmic grid first, then bisection in log(delta) across the
// crossing. Methods are optimized independently but share the coarse scans.
std::vector<DeltaOptimization> optimize_delta(const ModelParams& params_template, double temperature,
                                              MethodSet methods, double lambda_c_N, const DeltaOptions& options = {});
DeltaOptimization optimize_delta(const ModelParams& params_template, double temperature, Method method,
                                 double lambda_c_N, const DeltaOptions& options = {});

struct PowerLawFit {
    double exponent = 0.0;
    double prefactor = 0.0;
    double r_squared = 0.0;
    std::size_t points_used = 0;
};

// Least squares of log y = log c + p log x. Needs >= 3 points, all positive.
PowerLawFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y);

struct ScalingOptions {
    double temperature = 0.0;
    double gap_delta = 0.0;
    double bracket_lo = -1.5;
    double bracket_hi = -0.8;
    GapOptions gap;
    DeltaOptions delta;
    MethodSet methods;
    unsigned threads = 0;
};

struct ScalingRow {
    int n_particles = 0;
    double lambda_c_N = 0.0;
    double gap_at_min = 0.0;
    double delta_star[3] = {0.0, 0.0, 0.0};
    double peak_location[3] = {0.0, 0.0, 0.0};
    bool within_tolerance[3] = {false, false, false};
    double chi[3] = {0.0, 0.0, 0.0};  // chi(lambda_c_N) at the method's own delta*
};

struct ScalingStudy {
    std::vector<ScalingRow> rows;
    std::optional<PowerLawFit> fit[3];  // chi / N vs N, indexed by Method
    std::optional<PowerLawFit> shift_fit;  // lambda_c - lambda_c(N) vs N
};

ScalingStudy scaling_study(const std::vector<int>& n_list, const ModelParams& params_template,
                           const ScalingOptions& options = {});

inline constexpr std::size_t method_index(Method m) noexcept { return static_cast<std::size_t>(m); }

// Largest relative change of chi when epsilon0 is halved and doubled.
double epsilon_stability(const ModelParams& params, double lambda, Method method, const PointOptions& options = {});

}  // namespace critsense
