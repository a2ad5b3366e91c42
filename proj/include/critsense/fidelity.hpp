// Classical (Bhattacharyya) and quantum (Uhlmann) fidelities and the three
// susceptibilities built from them:
//     chi_mom = (d<O>/dlambda)^2 / Var(O)
//     F(lambda, eps) = 1 - chi eps^2 / 8 + O(eps^3)   for chi_cl and chi_Q.

#pragma once

#include "critsense/model.hpp"

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace critsense {

enum class Method { moment, classical, quantum };

std::string_view to_string(Method method);
Method method_from_string(std::string_view name);  // "moment" | "classical" | "quantum"

// rho = sum_k w_k v_k v_k^T, kept factored.
struct DensityOperator {
    Eigen::VectorXd weights;  // rank
    Eigen::MatrixXd vectors;  // dimension x rank, orthonormal columns

    Eigen::Index dimension() const noexcept { return vectors.rows(); }
    Eigen::Index rank() const noexcept { return weights.size(); }
    bool is_pure() const noexcept { return rank() == 1; }

    Eigen::MatrixXd dense() const;
    // Unit trace to 1e-10, non-negative weights, matching shapes.
    void validate() const;

    // Retains states with weight > weight_cutoff and renormalizes.
    static DensityOperator from_state(const ThermalState& state, double weight_cutoff = 0.0);
    static DensityOperator pure(const Eigen::VectorXd& psi);
    static DensityOperator diagonal(const Eigen::VectorXd& probabilities);
};

// sum_m sqrt(p_m q_m). Throws std::invalid_argument on a size mismatch.
double bhattacharyya_fidelity(std::span<const double> p, std::span<const double> q);
double bhattacharyya_fidelity(const DistributionOverM& p, const DistributionOverM& q);

// 1 - F_cl evaluated as (1/2) sum (sqrt p - sqrt q)^2, exact for normalized inputs
// and free of the cancellation in 1 - sum sqrt(p q).
double hellinger_infidelity(std::span<const double> p, std::span<const double> q);

// Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)). Pure pairs short-circuit to |<psi1|psi2>|.
double uhlmann_fidelity(const DensityOperator& rho1, const DensityOperator& rho2);

// 1 - F_Q as half the squared Bures distance, ||sqrt(rho1) - sqrt(rho2) U||_F^2 / 2 at the
// optimal U (||psi1 - s psi2||^2 / 2 for pure pairs).
double uhlmann_infidelity(const DensityOperator& rho1, const DensityOperator& rho2);

namespace detail {
// General (mixed-state) route with no pure-state shortcut.
double uhlmann_fidelity_general(const DensityOperator& rho1, const DensityOperator& rho2);
}  // namespace detail

struct SusceptibilityEstimate {
    double value = 0.0;
    Method method = Method::quantum;
    std::vector<double> epsilon_grid;
    double fit_residual = 0.0;
    bool degenerate = false;  // every fidelity within 1e-14 of one
};

// {-2 e, -e, e, 2 e} with e = epsilon0 * max(1, |lambda|).
std::vector<double> default_epsilon_grid(double lambda, double epsilon0);

// Least-squares fit of 1 - F = chi * eps^2 / 8 through the origin.
SusceptibilityEstimate susceptibility_from_infidelity(const std::function<double(double)>& infidelity_at,
                                                      std::span<const double> epsilons, Method method);
SusceptibilityEstimate susceptibility_from_fidelity(const std::function<double(double)>& fidelity_at,
                                                    std::span<const double> epsilons, Method method);

// Three-point derivative on a possibly non-uniform grid; one-sided two-point at the ends.
double grid_derivative(std::span<const double> values, std::span<const double> grid, std::size_t index);

SusceptibilityEstimate chi_mom_from_curves(std::span<const double> means, std::span<const double> variances,
                                           std::span<const double> grid, std::size_t index);

}  // namespace critsense
