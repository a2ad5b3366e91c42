// Levenberg-Marquardt for small dense nonlinear least-squares problems with box
// bounds (handled by projection).

#pragma once

#include <Eigen/Dense>

#include <functional>

namespace critsense {

struct LeastSquaresProblem {
    // Fills residuals r (size m) and, when jacobian != nullptr, the m x n Jacobian dr/dp.
    std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jacobian)> evaluate;
    Eigen::VectorXd lower;  // empty = unbounded
    Eigen::VectorXd upper;
};

struct LmOptions {
    int max_iterations = 200;
    // Converged when |J^T r|_inf <= gradient_tolerance * |J|_F * |r|_2.
    double gradient_tolerance = 1e-10;
    double step_tolerance = 1e-13;
    double initial_damping = 1e-3;
};

struct LmResult {
    Eigen::VectorXd params;
    double sum_squares = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

LmResult levenberg_marquardt(const LeastSquaresProblem& problem, Eigen::VectorXd start, const LmOptions& options = {});

}  // namespace critsense
