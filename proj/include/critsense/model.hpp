// Two-mode bosonic Josephson junction:
//     H = -Omega Jx + zeta Jz^2 + delta Jz,   zeta = lambda Omega / N,
// written in the Jz eigenbasis m = -N/2 .. N/2, where it is tridiagonal.
// Units: hbar = k_B = 1; energies, T and delta are in units of Omega.

#pragma once

#include "critsense/tridiagonal.hpp"

#include <Eigen/Dense>

#include <memory>

namespace critsense {

struct ModelParams {
    int n_particles = 1;    // N
    double tunneling = 1.0; // Omega
    double control = 0.0;   // lambda = N zeta / Omega
    double imbalance = 0.0; // delta

    double interaction() const noexcept { return control * tunneling / n_particles; }
    double total_spin() const noexcept { return 0.5 * n_particles; }

    // Throws std::invalid_argument when N < 1, Omega <= 0 or a value is not finite.
    void validate() const;

    ModelParams with_control(double lambda) const {
        ModelParams p = *this;
        p.control = lambda;
        return p;
    }
};

struct TridiagonalHamiltonian {
    SymmetricTridiagonal matrix;
    Eigen::VectorXd jz;  // m value of each basis state, ascending

    Eigen::Index dimension() const noexcept { return matrix.size(); }
};

TridiagonalHamiltonian build_hamiltonian(const ModelParams& params);

// Eigenpairs in the Jz basis. May hold only the lowest few states (see
// lowest_states); `basis_dimension` is always N+1.
struct Spectrum {
    Eigen::VectorXd energies;      // ascending
    Eigen::MatrixXd eigenvectors;  // (N+1) x states
    Eigen::VectorXd jz;
    Eigen::Index basis_dimension = 0;

    Eigen::Index states() const noexcept { return energies.size(); }
    bool complete() const noexcept { return states() == basis_dimension; }
};

// Full diagonalization by implicit QL with eigenvector accumulation.
Spectrum diagonalize(const TridiagonalHamiltonian& h);

// Lowest `count` eigenpairs (bisection + inverse iteration).
Spectrum lowest_states(const TridiagonalHamiltonian& h, Eigen::Index count);

// Gibbs weights over the states held by a spectrum. Energies are shifted by
// E0 before exponentiation; T == 0 is the exact ground-state branch. A ground
// level that is degenerate to working precision gets equal weights over its
// states (the T -> 0+ limit), which does not depend on the basis the solver
// happened to pick inside it.
struct ThermalState {
    std::shared_ptr<const Spectrum> spectrum;
    double temperature = 0.0;
    Eigen::VectorXd weights;
};

ThermalState thermal_state(std::shared_ptr<const Spectrum> spectrum, double temperature);

// Levels within this distance of E0 count as degenerate with it.
double degeneracy_tolerance(double energy_scale);

// Number of levels in the ground manifold, by Sturm count.
Eigen::Index ground_multiplicity(const TridiagonalHamiltonian& h);
ThermalState thermal_state(Spectrum spectrum, double temperature);

// Builds, diagonalizes only as far as needed and returns the Gibbs state.
// States with Boltzmann factor below `rank_cutoff` relative to the ground
// state are not computed; the Gibbs weights are renormalized over the rest.
ThermalState equilibrium_state(const ModelParams& params, double temperature,
                               double rank_cutoff = 1e-12);

struct DistributionOverM {
    Eigen::VectorXd jz;
    Eigen::VectorXd probabilities;
};

// P(m) = sum_n w_n |psi_n(m)|^2 over states with w_n > weight_cutoff, renormalized.
DistributionOverM jz_distribution(const ThermalState& state, double weight_cutoff = 1e-16);

struct JzMoments {
    double mean = 0.0;
    double variance = 0.0;
};

JzMoments jz_moments(const ThermalState& state);
JzMoments jz_moments(const DistributionOverM& distribution);

}  // namespace critsense
