// Analysis of imbalance records z = (N_L - N_R) / (N_L + N_R) taken on a grid of
// scattering lengths a (units of a0): histograms, double-Gaussian fits, the
// nearest-neighbour chi_mom and chi_cl estimators, and bootstrap error bars.

#pragma once

#include "critsense/csv.hpp"

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

namespace critsense {

struct MeasurementSeries {
    std::vector<double> scattering_lengths;  // strictly increasing
    std::vector<std::vector<double>> records;  // samples z in [-1, 1] per scattering length
    std::uint64_t rng_seed = 0;

    std::size_t size() const noexcept { return scattering_lengths.size(); }
    void validate() const;
};

// Mixture A+ G(z - zbar; sigma) + A- G(z + zbar; sigma).
struct DoubleGaussianFit {
    double separation = 0.0;  // zbar >= 0, half the distance between the peaks
    double width = 0.1;       // sigma_z, shared by both peaks
    double amp_plus = 0.5;
    double amp_minus = 0.5;
    double residual = 0.0;  // sum of squares at the optimum
    double gradient_norm = 0.0;
    bool converged = false;
};

struct HistogramSpec {
    double bin_width = 0.05;
    double lo = -1.0;
    double hi = 1.0;

    void validate() const;
};

inline constexpr double chi_cl_bin_width = 0.05;
inline constexpr double display_bin_width = 0.08;

// Bin edges are integer multiples of bin_width; the bins are the smallest such
// set covering [lo, hi]. Samples outside fall into the edge bins.
struct Histogram {
    double bin_width = 0.0;
    long first_edge_index = 0;  // left edge of bin 0 is first_edge_index * bin_width
    std::vector<double> mass;   // sums to 1
    std::size_t sample_count = 0;

    std::size_t bins() const noexcept { return mass.size(); }
    double left_edge(std::size_t k) const noexcept {
        return static_cast<double>(first_edge_index + static_cast<long>(k)) * bin_width;
    }
    double centre(std::size_t k) const noexcept { return left_edge(k) + 0.5 * bin_width; }
};

Histogram empty_histogram(const HistogramSpec& spec);
std::size_t bin_index(const Histogram& h, double z);
Histogram build_histogram(const std::vector<double>& samples, const HistogramSpec& spec);

// Expected bin masses of a mixture whose samples are clipped to [lo, hi]; the
// edge bins carry the tails.
std::vector<double> mixture_bin_masses(const DoubleGaussianFit& fit, const Histogram& layout);

enum class FitScale { linear, log };

struct FitOptions {
    FitScale scale = FitScale::linear;
    bool equal_amplitudes = false;
};

DoubleGaussianFit fit_double_gaussian(const Histogram& histogram, const FitOptions& options = {});

// Draws from the mixture (component picked with probability A+/(A+ + A-)),
// clipped to [-1, 1]. Point i uses a stream derived from (seed, i).
MeasurementSeries synth_samples(const std::vector<double>& scattering_lengths,
                                const std::vector<DoubleGaussianFit>& fits, const std::vector<std::size_t>& n_samples,
                                std::uint64_t seed);

struct PointEstimate {
    double value = 0.0;
    bool one_sided = false;  // endpoint, lower confidence
};

// (d zbar / da / sigma_i)^2 by nearest-neighbour differences.
PointEstimate chi_mom_experimental(const std::vector<double>& scattering_lengths,
                                   const std::vector<DoubleGaussianFit>& fits, std::size_t index);

// One-parameter fit 1 - F_ij = (chi / 8) eps_ij^2 over j = i +- 1.
PointEstimate chi_cl_experimental(const std::vector<double>& scattering_lengths,
                                  const std::vector<Histogram>& histograms, std::size_t index);

struct AnalysisOptions {
    HistogramSpec chi_cl_histogram{chi_cl_bin_width, -1.0, 1.0};
    HistogramSpec fit_histogram{chi_cl_bin_width, -1.0, 1.0};
    FitOptions fit;
};

struct SeriesAnalysis {
    std::vector<double> scattering_lengths;
    std::vector<std::size_t> sample_counts;
    std::vector<Histogram> fit_histograms;
    std::vector<Histogram> chi_cl_histograms;
    std::vector<DoubleGaussianFit> fits;
    std::vector<PointEstimate> chi_mom;
    std::vector<PointEstimate> chi_cl;
};

SeriesAnalysis analyze_series(const MeasurementSeries& series, const AnalysisOptions& options = {});

enum class Estimator { chi_mom, chi_cl };
enum class BackgroundKind { none, exponential };

std::string_view to_string(Estimator e);
std::string_view to_string(BackgroundKind b);
Estimator estimator_from_string(std::string_view name);
BackgroundKind background_from_string(std::string_view name);

// chi_mom replicas sit on an exponential tail at zero, chi_cl replicas do not.
BackgroundKind default_background(Estimator e) noexcept;

struct GaussianBackgroundFit {
    double centre = 0.0;
    double width = 0.0;
    double amplitude = 0.0;
    double background_amplitude = 0.0;  // clamped to [0, 1] counts
    double background_decay = 1.0;
    double residual = 0.0;
    bool degenerate = false;
};

struct ReplicaHistogram {
    double lo = 0.0;
    double bin_width = 0.0;
    std::vector<double> counts;

    double centre(std::size_t k) const noexcept { return lo + (static_cast<double>(k) + 0.5) * bin_width; }
};

ReplicaHistogram histogram_replicas(const std::vector<double>& values, std::size_t bins, bool include_zero);

// counts(x) = A exp(-(x - c)^2 / (2 w^2)) [+ B exp(-x / tau)] at bin centres.
GaussianBackgroundFit fit_gaussian_with_background(const ReplicaHistogram& histogram, BackgroundKind kind);

struct BootstrapOptions {
    int n_replicas = 3000;
    std::uint64_t seed = 1;
    std::size_t replica_bins = 100;
    double max_failure_fraction = 0.1;
    bool keep_replicas = false;
    unsigned threads = 0;
    AnalysisOptions analysis;
};

struct BootstrapPoint {
    double estimate = 0.0;  // from the original data
    double centre = 0.0;
    double width = 0.0;
    GaussianBackgroundFit fit;
    ReplicaHistogram histogram;
};

struct BootstrapResult {
    Estimator estimator = Estimator::chi_cl;
    BackgroundKind background_kind = BackgroundKind::none;
    int n_replicas = 0;
    int failures = 0;  // replicas lost after one redraw
    int redraws = 0;
    std::vector<BootstrapPoint> points;
    std::vector<std::vector<double>> replica_values;  // [point][replica], when kept
};

class BootstrapAbort : public std::runtime_error {
public:
    BootstrapAbort(const std::string& what, int failures, int replicas)
        : std::runtime_error(what), failures_(failures), replicas_(replicas) {}
    int failures() const noexcept { return failures_; }
    int replicas() const noexcept { return replicas_; }

private:
    int failures_;
    int replicas_;
};

// Each replica redraws every record from the fitted mixtures (as a multinomial
// histogram with the original sample count) and reruns the estimator chain.
BootstrapResult bootstrap(const SeriesAnalysis& analysis, Estimator estimator, const BootstrapOptions& options,
                          BackgroundKind background);
BootstrapResult bootstrap(const SeriesAnalysis& analysis, Estimator estimator, const BootstrapOptions& options);

std::uint64_t replica_seed(std::uint64_t master, std::uint64_t replica) noexcept;

// Order-parameter families used to synthesise series with a known answer.
struct OrderParameterFamily {
    enum class Kind { tanh, sqrt } kind = Kind::tanh;
    double critical = -1.75;  // a_c in a0
    double offset = 0.5;      // tanh: zbar = offset + scale tanh((a_c - a) / smoothing)
    double scale = 0.2;
    double smoothing = 0.6;
    double sigma = 0.1;       // sigma_z, constant across the grid
    double asymmetry = 0.0;   // A+ = (1 + asymmetry) / 2

    // sqrt: zbar = sqrt(1 - (a_c / a)^2) for a < a_c, else 0.
    double zbar(double a) const;
    double dzbar(double a) const;
    DoubleGaussianFit mixture(double a) const;
    // (zbar' / sigma)^2
    double chi_mom(double a) const;
};

MeasurementSeries synth_family(const OrderParameterFamily& family, const std::vector<double>& scattering_lengths,
                               std::size_t n_samples, std::uint64_t seed);

// CSV with columns scattering_length_a0, z; one row per sample.
MeasurementSeries read_series_csv(const std::filesystem::path& path);

}  // namespace critsense
