#include "critsense/least_squares.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace critsense {

namespace {

void project(Eigen::VectorXd& p, const LeastSquaresProblem& problem) {
    if (problem.lower.size() == p.size()) p = p.cwiseMax(problem.lower);
    if (problem.upper.size() == p.size()) p = p.cwiseMin(problem.upper);
}

// Gradient restricted to directions that stay feasible: components pushing
// against an active bound do not count.
double projected_gradient_norm(const Eigen::VectorXd& g, const Eigen::VectorXd& p, const LeastSquaresProblem& problem) {
    double norm = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        // Descent direction is -g.
        const bool at_lower = problem.lower.size() == p.size() && p[i] <= problem.lower[i] && g[i] > 0.0;
        const bool at_upper = problem.upper.size() == p.size() && p[i] >= problem.upper[i] && g[i] < 0.0;
        if (!at_lower && !at_upper) norm = std::max(norm, std::abs(g[i]));
    }
    return norm;
}

}  // namespace

LmResult levenberg_marquardt(const LeastSquaresProblem& problem, Eigen::VectorXd start, const LmOptions& options) {
    if (!problem.evaluate) throw std::invalid_argument("least-squares problem has no evaluate callback");
    project(start, problem);

    LmResult out;
    Eigen::VectorXd p = std::move(start);
    Eigen::VectorXd r;
    Eigen::MatrixXd j;
    problem.evaluate(p, r, &j);
    double cost = r.squaredNorm();
    if (!std::isfinite(cost)) {
        out.params = p;
        out.sum_squares = cost;
        return out;
    }

    double mu = options.initial_damping;
    for (int it = 0; it < options.max_iterations; ++it) {
        out.iterations = it + 1;
        const Eigen::VectorXd g = j.transpose() * r;
        const double scale = j.norm() * std::sqrt(cost);
        out.gradient_norm = projected_gradient_norm(g, p, problem);
        if (out.gradient_norm <= options.gradient_tolerance * scale || cost == 0.0) {
            out.converged = true;
            break;
        }

        const Eigen::MatrixXd jtj = j.transpose() * j;
        Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-12 * std::max(1.0, jtj.diagonal().maxCoeff()));
        bool improved = false;
        for (int attempt = 0; attempt < 30; ++attempt) {
            Eigen::MatrixXd a = jtj;
            a.diagonal() += mu * diag;
            const Eigen::VectorXd step = a.ldlt().solve(-g);
            Eigen::VectorXd trial = p + step;
            project(trial, problem);
            Eigen::VectorXd rt;
            problem.evaluate(trial, rt, nullptr);
            const double ct = rt.squaredNorm();
            if (std::isfinite(ct) && ct < cost) {
                const double moved = (trial - p).norm();
                p = std::move(trial);
                const double old = cost;
                problem.evaluate(p, r, &j);
                cost = r.squaredNorm();
                mu = std::max(mu / 3.0, 1e-12);
                improved = true;
                if (moved <= options.step_tolerance * (p.norm() + options.step_tolerance) &&
                    old - cost <= std::numeric_limits<double>::epsilon() * old) {
                    out.converged = true;
                }
                break;
            }
            mu *= 4.0;
            if (mu > 1e16) break;
        }
        if (!improved) {
            // No descent possible at machine precision: stationary up to roundoff.
            const Eigen::VectorXd gg = j.transpose() * r;
            out.gradient_norm = projected_gradient_norm(gg, p, problem);
            Eigen::MatrixXd a = j.transpose() * j;
            a.diagonal() += 1e-12 * diag;
            Eigen::VectorXd gn = p + a.ldlt().solve(-gg);
            project(gn, problem);
            const double gn_step = (gn - p).norm();
            out.converged = out.gradient_norm <= 1e3 * options.gradient_tolerance * j.norm() * std::sqrt(cost) ||
                            gn_step <= 1e-8 * (p.norm() + 1e-8) || cost <= std::numeric_limits<double>::min();
            break;
        }
        if (out.converged) break;
    }
    out.params = p;
    out.sum_squares = cost;
    return out;
}

}  // namespace critsense
