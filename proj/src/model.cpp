#include "critsense/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace critsense {

void ModelParams::validate() const {
    if (n_particles < 1) throw std::invalid_argument("n_particles must be >= 1");
    if (!(tunneling > 0.0) || !std::isfinite(tunneling)) {
        throw std::invalid_argument("tunneling must be finite and > 0");
    }
    if (!std::isfinite(control) || !std::isfinite(imbalance) || !std::isfinite(interaction())) {
        throw std::invalid_argument("control and imbalance must be finite");
    }
}

TridiagonalHamiltonian build_hamiltonian(const ModelParams& params) {
    params.validate();
    const Eigen::Index dim = params.n_particles + 1;
    const double j = params.total_spin();
    const double zeta = params.interaction();

    TridiagonalHamiltonian h;
    h.jz.resize(dim);
    h.matrix.diagonal.resize(dim);
    h.matrix.off_diagonal.resize(dim - 1);
    for (Eigen::Index k = 0; k < dim; ++k) {
        const double m = -j + static_cast<double>(k);
        h.jz[k] = m;
        h.matrix.diagonal[k] = zeta * m * m + params.imbalance * m;
        if (k + 1 < dim) {
            // <m+1| Jx |m> = sqrt(j(j+1) - m(m+1)) / 2
            h.matrix.off_diagonal[k] = -0.5 * params.tunneling * std::sqrt(j * (j + 1.0) - m * (m + 1.0));
        }
    }
    return h;
}

Spectrum diagonalize(const TridiagonalHamiltonian& h) {
    auto eig = ql_eigensystem(h.matrix);
    Spectrum s;
    s.energies = std::move(eig.values);
    s.eigenvectors = std::move(eig.vectors);
    s.jz = h.jz;
    s.basis_dimension = h.dimension();
    return s;
}

Spectrum lowest_states(const TridiagonalHamiltonian& h, Eigen::Index count) {
    auto eig = lowest_eigensystem(h.matrix, count);
    Spectrum s;
    s.energies = std::move(eig.values);
    s.eigenvectors = std::move(eig.vectors);
    s.jz = h.jz;
    s.basis_dimension = h.dimension();
    return s;
}

ThermalState thermal_state(std::shared_ptr<const Spectrum> spectrum, double temperature) {
    if (!spectrum || spectrum->states() < 1) throw std::invalid_argument("thermal_state needs a non-empty spectrum");
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
        throw std::invalid_argument("temperature must be finite and >= 0");
    }
    const Eigen::Index n = spectrum->states();
    ThermalState state;
    state.temperature = temperature;
    state.weights = Eigen::VectorXd::Zero(n);
    if (temperature == 0.0) {
        const double scale = std::max(std::abs(spectrum->energies[0]), std::abs(spectrum->energies[n - 1]));
        const double tol = degeneracy_tolerance(scale);
        Eigen::Index g = 1;
        while (g < n && spectrum->energies[g] - spectrum->energies[0] <= tol) ++g;
        state.weights.head(g).setConstant(1.0 / static_cast<double>(g));
    } else {
        const double e0 = spectrum->energies[0];
        for (Eigen::Index k = 0; k < n; ++k) {
            state.weights[k] = std::exp(-(spectrum->energies[k] - e0) / temperature);
        }
        state.weights /= state.weights.sum();
    }
    state.spectrum = std::move(spectrum);
    return state;
}

double degeneracy_tolerance(double energy_scale) {
    return 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, energy_scale);
}

Eigen::Index ground_multiplicity(const TridiagonalHamiltonian& h) {
    const double e0 = bisect_eigenvalue(h.matrix, 0);
    const double tol = degeneracy_tolerance(h.matrix.norm_inf());
    return std::max<Eigen::Index>(1, count_below(h.matrix, e0 + tol + std::abs(e0) * 1e-15));
}

ThermalState thermal_state(Spectrum spectrum, double temperature) {
    return thermal_state(std::make_shared<const Spectrum>(std::move(spectrum)), temperature);
}

ThermalState equilibrium_state(const ModelParams& params, double temperature, double rank_cutoff) {
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
        throw std::invalid_argument("temperature must be finite and >= 0");
    }
    if (!(rank_cutoff >= 0.0 && rank_cutoff < 1.0)) {
        throw std::invalid_argument("rank_cutoff must lie in [0, 1)");
    }
    const auto h = build_hamiltonian(params);
    const Eigen::Index dim = h.dimension();
    if (temperature == 0.0) return thermal_state(lowest_states(h, ground_multiplicity(h)), 0.0);

    Eigen::Index count = dim;
    if (rank_cutoff > 0.0) {
        const double e0 = bisect_eigenvalue(h.matrix, 0);
        const double window = temperature * std::log(1.0 / rank_cutoff);
        count = std::max<Eigen::Index>(1, count_below(h.matrix, e0 + window));
    }
    // Beyond a quarter of the spectrum the QL sweep is the cheaper route.
    if (count * 4 > dim) return thermal_state(diagonalize(h), temperature);
    return thermal_state(lowest_states(h, count), temperature);
}

DistributionOverM jz_distribution(const ThermalState& state, double weight_cutoff) {
    if (!state.spectrum) throw std::invalid_argument("thermal state has no spectrum");
    if (!(weight_cutoff >= 0.0)) throw std::invalid_argument("weight_cutoff must be >= 0");
    const auto& s = *state.spectrum;
    Eigen::VectorXd kept = Eigen::VectorXd::Zero(state.weights.size());
    for (Eigen::Index k = 0; k < kept.size(); ++k) {
        if (state.weights[k] > weight_cutoff) kept[k] = state.weights[k];
    }
    const double total = kept.sum();
    if (!(total > 0.0)) throw std::invalid_argument("weight_cutoff removes every state");

    DistributionOverM out;
    out.jz = s.jz;
    out.probabilities = s.eigenvectors.array().square().matrix() * kept;
    out.probabilities /= out.probabilities.sum();
    return out;
}

JzMoments jz_moments(const DistributionOverM& distribution) {
    const auto& p = distribution.probabilities;
    const auto& m = distribution.jz;
    JzMoments out;
    out.mean = p.dot(m);
    // Centered second moment avoids cancellation when |mean| is large.
    out.variance = p.dot((m.array() - out.mean).square().matrix());
    return out;
}

JzMoments jz_moments(const ThermalState& state) { return jz_moments(jz_distribution(state, 0.0)); }

}  // namespace critsense
