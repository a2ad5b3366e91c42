#include "critsense/fidelity.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace critsense {

std::string_view to_string(Method method) {
    switch (method) {
        case Method::moment: return "moment";
        case Method::classical: return "classical";
        case Method::quantum: return "quantum";
    }
    return "unknown";
}

Method method_from_string(std::string_view name) {
    if (name == "moment" || name == "mom") return Method::moment;
    if (name == "classical" || name == "cl") return Method::classical;
    if (name == "quantum" || name == "q") return Method::quantum;
    throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

Eigen::MatrixXd DensityOperator::dense() const {
    return vectors * weights.asDiagonal() * vectors.transpose();
}

void DensityOperator::validate() const {
    if (weights.size() != vectors.cols() || weights.size() == 0) {
        throw std::invalid_argument("density operator: weights and vectors disagree in rank");
    }
    if ((weights.array() < 0.0).any() || !weights.allFinite()) {
        throw std::invalid_argument("density operator: weights must be finite and >= 0");
    }
    if (std::abs(weights.sum() - 1.0) > 1e-10) {
        throw std::invalid_argument("density operator: trace differs from 1");
    }
}

DensityOperator DensityOperator::from_state(const ThermalState& state, double weight_cutoff) {
    if (!state.spectrum) throw std::invalid_argument("thermal state has no spectrum");
    const auto& s = *state.spectrum;
    Eigen::Index rank = 0;
    for (Eigen::Index k = 0; k < state.weights.size(); ++k) {
        if (state.weights[k] > weight_cutoff) ++rank;
    }
    if (rank == 0) throw std::invalid_argument("weight_cutoff removes every state");
    DensityOperator rho;
    rho.weights.resize(rank);
    rho.vectors.resize(s.basis_dimension, rank);
    Eigen::Index c = 0;
    for (Eigen::Index k = 0; k < state.weights.size(); ++k) {
        if (state.weights[k] > weight_cutoff) {
            rho.weights[c] = state.weights[k];
            rho.vectors.col(c) = s.eigenvectors.col(k);
            ++c;
        }
    }
    rho.weights /= rho.weights.sum();
    return rho;
}

DensityOperator DensityOperator::pure(const Eigen::VectorXd& psi) {
    const double norm = psi.norm();
    if (!(norm > 0.0)) throw std::invalid_argument("pure state must be non-zero");
    DensityOperator rho;
    rho.weights = Eigen::VectorXd::Ones(1);
    rho.vectors = psi / norm;
    return rho;
}

DensityOperator DensityOperator::diagonal(const Eigen::VectorXd& probabilities) {
    DensityOperator rho;
    rho.weights = probabilities;
    rho.vectors = Eigen::MatrixXd::Identity(probabilities.size(), probabilities.size());
    rho.validate();
    return rho;
}

namespace {

void check_same_size(std::size_t a, std::size_t b) {
    if (a != b) {
        throw std::invalid_argument("distribution sizes differ: " + std::to_string(a) + " vs " + std::to_string(b));
    }
}

void check_pair(const DensityOperator& a, const DensityOperator& b) {
    if (a.dimension() != b.dimension()) {
        throw std::invalid_argument("density operators act on different dimensions");
    }
    a.validate();
    b.validate();
}

}  // namespace

double bhattacharyya_fidelity(std::span<const double> p, std::span<const double> q) {
    check_same_size(p.size(), q.size());
    double f = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) f += std::sqrt(std::max(0.0, p[i]) * std::max(0.0, q[i]));
    return f;
}

double bhattacharyya_fidelity(const DistributionOverM& p, const DistributionOverM& q) {
    return bhattacharyya_fidelity(std::span<const double>(p.probabilities.data(), p.probabilities.size()),
                                  std::span<const double>(q.probabilities.data(), q.probabilities.size()));
}

double hellinger_infidelity(std::span<const double> p, std::span<const double> q) {
    check_same_size(p.size(), q.size());
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = std::sqrt(std::max(0.0, p[i])) - std::sqrt(std::max(0.0, q[i]));
        s += d * d;
    }
    return 0.5 * s;
}

namespace detail {

double uhlmann_fidelity_general(const DensityOperator& rho1, const DensityOperator& rho2) {
    check_pair(rho1, rho2);
    // sqrt(rho1) rho2 sqrt(rho1) = V1 M M^T V1^T with M = sqrt(W1) V1^T V2 sqrt(W2),
    // so F is the sum of the singular values of the small r1 x r2 matrix M.
    const Eigen::MatrixXd m = rho1.weights.cwiseSqrt().asDiagonal() * (rho1.vectors.transpose() * rho2.vectors) *
                              rho2.weights.cwiseSqrt().asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues().sum();
}

}  // namespace detail

double uhlmann_fidelity(const DensityOperator& rho1, const DensityOperator& rho2) {
    if (rho1.is_pure() && rho2.is_pure()) {
        check_pair(rho1, rho2);
        const double a = rho1.vectors.col(0).norm();
        const double b = rho2.vectors.col(0).norm();
        return std::abs(rho1.vectors.col(0).dot(rho2.vectors.col(0))) / (a * b);
    }
    return detail::uhlmann_fidelity_general(rho1, rho2);
}

double uhlmann_infidelity(const DensityOperator& rho1, const DensityOperator& rho2) {
    if (rho1.is_pure() && rho2.is_pure()) {
        check_pair(rho1, rho2);
        const Eigen::VectorXd a = rho1.vectors.col(0).normalized();
        const Eigen::VectorXd b = rho2.vectors.col(0).normalized();
        const double sign = a.dot(b) < 0.0 ? -1.0 : 1.0;
        return 0.5 * (a - sign * b).squaredNorm();
    }
    check_pair(rho1, rho2);
    // 1 - F = min_U ||A - B U||_F^2 / 2 over orthogonal U, with A = V1 sqrt(W1) and
    // B = V2 sqrt(W2) padded to a common rank; the minimiser is the polar factor of A^T B.
    const Eigen::Index n = rho1.vectors.rows();
    const Eigen::Index r = std::max(rho1.weights.size(), rho2.weights.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, r), b = Eigen::MatrixXd::Zero(n, r);
    a.leftCols(rho1.weights.size()) = rho1.vectors * rho1.weights.cwiseSqrt().asDiagonal();
    b.leftCols(rho2.weights.size()) = rho2.vectors * rho2.weights.cwiseSqrt().asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.transpose() * b, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::MatrixXd u = svd.matrixV() * svd.matrixU().transpose();
    return 0.5 * (a - b * u).squaredNorm();
}

std::vector<double> default_epsilon_grid(double lambda, double epsilon0) {
    if (!(epsilon0 > 0.0) || !std::isfinite(epsilon0)) throw std::invalid_argument("epsilon0 must be finite and > 0");
    const double e = epsilon0 * std::max(1.0, std::abs(lambda));
    return {-2.0 * e, -e, e, 2.0 * e};
}

SusceptibilityEstimate susceptibility_from_infidelity(const std::function<double(double)>& infidelity_at,
                                                      std::span<const double> epsilons, Method method) {
    std::vector<double> distinct;
    for (double e : epsilons) {
        if (!std::isfinite(e)) throw std::invalid_argument("epsilon grid contains a non-finite offset");
        if (e != 0.0 && std::find(distinct.begin(), distinct.end(), e) == distinct.end()) distinct.push_back(e);
    }
    if (distinct.size() < 2) throw std::invalid_argument("epsilon grid needs at least two distinct non-zero offsets");

    SusceptibilityEstimate out;
    out.method = method;
    out.epsilon_grid.assign(epsilons.begin(), epsilons.end());

    std::vector<double> x, y;
    bool all_flat = true;
    for (double e : distinct) {
        const double d = infidelity_at(e);
        if (!std::isfinite(d)) throw std::runtime_error("non-finite infidelity at epsilon " + std::to_string(e));
        if (std::abs(d) > 1e-14) all_flat = false;
        x.push_back(e * e / 8.0);
        y.push_back(d);
    }
    if (all_flat) {
        out.degenerate = true;
        return out;
    }
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxy += x[k] * y[k];
        sxx += x[k] * x[k];
    }
    const double slope = sxy / sxx;
    double rss = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) rss += (y[k] - slope * x[k]) * (y[k] - slope * x[k]);
    out.value = std::max(0.0, slope);
    out.fit_residual = rss;
    return out;
}

SusceptibilityEstimate susceptibility_from_fidelity(const std::function<double(double)>& fidelity_at,
                                                    std::span<const double> epsilons, Method method) {
    return susceptibility_from_infidelity([&](double e) { return 1.0 - fidelity_at(e); }, epsilons, method);
}

double grid_derivative(std::span<const double> values, std::span<const double> grid, std::size_t index) {
    const std::size_t n = grid.size();
    if (values.size() != n) throw std::invalid_argument("values and grid differ in length");
    if (n < 2) throw std::invalid_argument("derivative needs at least two grid points");
    if (index >= n) throw std::out_of_range("grid index out of range");
    for (std::size_t k = 1; k < n; ++k) {
        if (!(grid[k] > grid[k - 1])) throw std::invalid_argument("grid must be strictly increasing");
    }
    if (index == 0) return (values[1] - values[0]) / (grid[1] - grid[0]);
    if (index == n - 1) return (values[n - 1] - values[n - 2]) / (grid[n - 1] - grid[n - 2]);
    const double h1 = grid[index] - grid[index - 1];
    const double h2 = grid[index + 1] - grid[index];
    return -h2 / (h1 * (h1 + h2)) * values[index - 1] + (h2 - h1) / (h1 * h2) * values[index] +
           h1 / (h2 * (h1 + h2)) * values[index + 1];
}

SusceptibilityEstimate chi_mom_from_curves(std::span<const double> means, std::span<const double> variances,
                                           std::span<const double> grid, std::size_t index) {
    if (variances.size() != grid.size()) throw std::invalid_argument("variances and grid differ in length");
    const double v = variances[index];
    if (!(v > 0.0)) throw std::domain_error("chi_mom: zero variance at grid index " + std::to_string(index));
    const double d = grid_derivative(means, grid, index);
    SusceptibilityEstimate out;
    out.method = Method::moment;
    out.value = d * d / v;
    if (index > 0 && index + 1 < grid.size()) {
        out.epsilon_grid = {grid[index - 1] - grid[index], grid[index + 1] - grid[index]};
    } else if (index == 0) {
        out.epsilon_grid = {grid[1] - grid[0]};
    } else {
        out.epsilon_grid = {grid[index - 1] - grid[index]};
    }
    return out;
}

}  // namespace critsense
