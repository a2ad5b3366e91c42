// Real symmetric tridiagonal eigensolvers.
//
// Two routes share one matrix type:
//   * implicit-shift QL with optional eigenvector accumulation (full spectrum),
//   * Sturm-sequence bisection plus inverse iteration (lowest k eigenpairs).
// The second route is O(n k) for eigenvalues and O(n k^2) for the final
// orthonormalization, which is what makes N ~ 1000 parameter scans cheap.

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace critsense {

class EigensolverError : public std::runtime_error {
public:
    EigensolverError(const std::string& what, Eigen::Index dimension, Eigen::Index index,
                     double matrix_norm);

    Eigen::Index dimension() const noexcept { return dimension_; }
    // Eigenvalue index that failed to converge.
    Eigen::Index index() const noexcept { return index_; }
    double matrix_norm() const noexcept { return matrix_norm_; }

private:
    Eigen::Index dimension_;
    Eigen::Index index_;
    double matrix_norm_;
};

struct SymmetricTridiagonal {
    Eigen::VectorXd diagonal;
    Eigen::VectorXd off_diagonal;  // size n-1, entry k couples rows k and k+1

    Eigen::Index size() const noexcept { return diagonal.size(); }

    // Throws std::invalid_argument on shape mismatch or non-finite entries.
    void validate() const;

    // Max absolute row sum; bounds every eigenvalue in magnitude.
    double norm_inf() const;

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd dense() const;
};

struct EigenDecomposition {
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXd vectors;  // column j pairs with values[j]
};

struct QlOptions {
    int max_iterations_per_value = 50;
};

// Full decomposition by implicit QL. Eigenvectors orthonormal, signs normalized
// so that the largest-magnitude component of each column is positive.
EigenDecomposition ql_eigensystem(const SymmetricTridiagonal& t, const QlOptions& options = {});

// Eigenvalues only (ascending).
Eigen::VectorXd ql_eigenvalues(const SymmetricTridiagonal& t, const QlOptions& options = {});

// Number of eigenvalues strictly below x.
Eigen::Index count_below(const SymmetricTridiagonal& t, double x);

// The k-th smallest eigenvalue (0-based), by bisection to full precision.
double bisect_eigenvalue(const SymmetricTridiagonal& t, Eigen::Index k);

// Lowest `count` eigenpairs by bisection and inverse iteration.
EigenDecomposition lowest_eigensystem(const SymmetricTridiagonal& t, Eigen::Index count);

// Flip each column so its largest-magnitude entry is positive (first one on ties).
void normalize_signs(Eigen::MatrixXd& vectors);

}  // namespace critsense
