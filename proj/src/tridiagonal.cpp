#include "critsense/tridiagonal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

namespace critsense {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kSafeMin = std::numeric_limits<double>::min();

std::string describe_failure(const char* what, Eigen::Index n, Eigen::Index index, double norm) {
    std::ostringstream os;
    os << what << " (dimension=" << n << ", eigenvalue index=" << index << ", |T|_inf=" << norm << ")";
    return os.str();
}

// Implicit-shift QL on (d, e) where e has length n with e[n-1] == 0 on entry.
// Rotations are accumulated into the columns of z when it is non-null.
void implicit_ql(Eigen::VectorXd& d, Eigen::VectorXd& e, Eigen::MatrixXd* z, int max_iterations,
                 double norm) {
    const Eigen::Index n = d.size();
    for (Eigen::Index l = 0; l < n; ++l) {
        int iteration = 0;
        Eigen::Index m = l;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= kEps * dd || std::abs(e[m]) <= kSafeMin) break;
            }
            if (m == l) break;
            if (iteration++ >= max_iterations) {
                throw EigensolverError(describe_failure("implicit QL did not converge", n, l, norm), n,
                                       l, norm);
            }
            double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            double r = std::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
            double s = 1.0;
            double c = 1.0;
            double p = 0.0;
            bool deflated = false;
            for (Eigen::Index i = m - 1; i >= l; --i) {
                double f = s * e[i];
                const double b = c * e[i];
                r = std::hypot(f, g);
                e[i + 1] = r;
                if (r == 0.0) {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if (z != nullptr) {
                    double* zi = z->col(i).data();
                    double* zj = z->col(i + 1).data();
                    for (Eigen::Index k = 0; k < n; ++k) {
                        const double t = zj[k];
                        zj[k] = s * zi[k] + c * t;
                        zi[k] = c * zi[k] - s * t;
                    }
                }
            }
            if (deflated) continue;
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        } while (m != l);
    }
}

std::vector<Eigen::Index> ascending_order(const Eigen::VectorXd& values) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return values[a] < values[b]; });
    return order;
}

// Sturm sequence counts on precomputed squared couplings.
class SturmCounter {
public:
    explicit SturmCounter(const SymmetricTridiagonal& t) : d_(t.diagonal) {
        const Eigen::Index n = t.size();
        e2_.resize(static_cast<std::size_t>(std::max<Eigen::Index>(n - 1, 0)));
        double max_e2 = 1.0;
        for (Eigen::Index i = 0; i + 1 < n; ++i) {
            e2_[static_cast<std::size_t>(i)] = t.off_diagonal[i] * t.off_diagonal[i];
            max_e2 = std::max(max_e2, e2_[static_cast<std::size_t>(i)]);
        }
        pivmin_ = kSafeMin * max_e2;
    }

    Eigen::Index count(double x) const {
        const Eigen::Index n = d_.size();
        Eigen::Index negatives = 0;
        double q = d_[0] - x;
        if (std::abs(q) < pivmin_) q = -pivmin_;
        if (q < 0.0) ++negatives;
        for (Eigen::Index i = 1; i < n; ++i) {
            q = d_[i] - x - e2_[static_cast<std::size_t>(i - 1)] / q;
            if (std::abs(q) < pivmin_) q = -pivmin_;
            if (q < 0.0) ++negatives;
        }
        return negatives;
    }

    // Counts for several shifts in one pass; the independent recurrences overlap
    // in the pipeline, so M shifts cost little more than one.
    template <int M>
    void count_many(const double* x, Eigen::Index* negatives) const {
        const Eigen::Index n = d_.size();
        double q[M];
        for (int j = 0; j < M; ++j) {
            negatives[j] = 0;
            q[j] = d_[0] - x[j];
            if (std::abs(q[j]) < pivmin_) q[j] = -pivmin_;
            if (q[j] < 0.0) ++negatives[j];
        }
        for (Eigen::Index i = 1; i < n; ++i) {
            const double di = d_[i];
            const double e2 = e2_[static_cast<std::size_t>(i - 1)];
            for (int j = 0; j < M; ++j) {
                q[j] = di - x[j] - e2 / q[j];
                if (std::abs(q[j]) < pivmin_) q[j] = -pivmin_;
                if (q[j] < 0.0) ++negatives[j];
            }
        }
    }

    double pivmin() const noexcept { return pivmin_; }

private:
    const Eigen::VectorXd& d_;
    std::vector<double> e2_;
    double pivmin_ = kSafeMin;
};

std::pair<double, double> gershgorin_interval(const SymmetricTridiagonal& t) {
    const Eigen::Index n = t.size();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (Eigen::Index i = 0; i < n; ++i) {
        double radius = 0.0;
        if (i > 0) radius += std::abs(t.off_diagonal[i - 1]);
        if (i + 1 < n) radius += std::abs(t.off_diagonal[i]);
        lo = std::min(lo, t.diagonal[i] - radius);
        hi = std::max(hi, t.diagonal[i] + radius);
    }
    const double pad = 2.0 * kEps * std::max(std::abs(lo), std::abs(hi)) + 4.0 * kSafeMin;
    return {lo - pad, hi + pad};
}

// Eigenvalues first..first+count-1 by multisection: each sweep evaluates
// kProbes Sturm counts and shrinks the bracket by a factor kProbes + 1. Brackets
// are shared across indices.
Eigen::VectorXd bisect_range(const SymmetricTridiagonal& t, Eigen::Index first, Eigen::Index count) {
    constexpr int kProbes = 4;
    const SturmCounter sturm(t);
    const auto [glo, ghi] = gershgorin_interval(t);
    const auto nk = static_cast<std::size_t>(count);
    std::vector<double> lower(nk, glo);
    std::vector<double> upper(nk, ghi);
    Eigen::VectorXd values(count);
    for (Eigen::Index k = 0; k < count; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        const Eigen::Index target = first + k;
        double lo = lower[ku];
        double hi = upper[ku];
        if (k > 0) lo = std::max(lo, values[k - 1] - 2.0 * kEps * std::abs(values[k - 1]));
        for (int it = 0; it < 256; ++it) {
            const double tol = 2.0 * kEps * std::max(std::abs(lo), std::abs(hi)) + sturm.pivmin();
            if (hi - lo <= tol) break;
            double x[kProbes];
            Eigen::Index c[kProbes];
            for (int j = 0; j < kProbes; ++j) x[j] = lo + (hi - lo) * (j + 1) / (kProbes + 1);
            sturm.count_many<kProbes>(x, c);
            double new_lo = lo, new_hi = hi;
            for (int j = 0; j < kProbes; ++j) {
                // c[j] eigenvalues lie below x[j]: indices < c[j] are bounded above, the rest below.
                if (c[j] > target) {
                    new_hi = std::min(new_hi, x[j]);
                } else {
                    new_lo = std::max(new_lo, x[j]);
                }
                for (Eigen::Index i = k + 1; i < count; ++i) {
                    const auto iu = static_cast<std::size_t>(i);
                    if (first + i < c[j]) {
                        upper[iu] = std::min(upper[iu], x[j]);
                    } else {
                        lower[iu] = std::max(lower[iu], x[j]);
                    }
                }
            }
            if (new_lo == lo && new_hi == hi) break;  // probes no longer separable in floating point
            lo = new_lo;
            hi = new_hi;
        }
        values[k] = 0.5 * (lo + hi);
    }
    return values;
}

Eigen::VectorXd bisect_lowest(const SymmetricTridiagonal& t, Eigen::Index count) { return bisect_range(t, 0, count); }

// LU factorization with partial pivoting of (T - shift I); U has two superdiagonals.
class ShiftedTridiagonalLU {
public:
    ShiftedTridiagonalLU(const SymmetricTridiagonal& t, double shift, double tiny) {
        const Eigen::Index n = t.size();
        u0_.resize(n);
        u1_.setZero(n);
        u2_.setZero(n);
        mult_.setZero(n);
        swapped_.assign(static_cast<std::size_t>(n), false);
        double diag = t.diagonal[0] - shift;
        double sup = (n > 1) ? t.off_diagonal[0] : 0.0;
        for (Eigen::Index k = 0; k + 1 < n; ++k) {
            const double sub = t.off_diagonal[k];
            const double next_diag = t.diagonal[k + 1] - shift;
            const double next_sup = (k + 2 < n) ? t.off_diagonal[k + 1] : 0.0;
            if (std::abs(diag) >= std::abs(sub)) {
                if (diag == 0.0) diag = tiny;
                const double m = sub / diag;
                u0_[k] = diag;
                u1_[k] = sup;
                mult_[k] = m;
                diag = next_diag - m * sup;
                sup = next_sup;
            } else {
                const double m = diag / sub;
                u0_[k] = sub;
                u1_[k] = next_diag;
                u2_[k] = next_sup;
                mult_[k] = m;
                swapped_[static_cast<std::size_t>(k)] = true;
                diag = sup - m * next_diag;
                sup = -m * next_sup;
            }
        }
        u0_[n - 1] = diag;
        for (Eigen::Index k = 0; k < n; ++k) {
            if (std::abs(u0_[k]) < tiny) u0_[k] = std::copysign(tiny, u0_[k] == 0.0 ? 1.0 : u0_[k]);
        }
    }

    void solve(Eigen::VectorXd& x) const {
        const Eigen::Index n = x.size();
        for (Eigen::Index k = 0; k + 1 < n; ++k) {
            if (swapped_[static_cast<std::size_t>(k)]) std::swap(x[k], x[k + 1]);
            x[k + 1] -= mult_[k] * x[k];
        }
        x[n - 1] /= u0_[n - 1];
        if (n > 1) x[n - 2] = (x[n - 2] - u1_[n - 2] * x[n - 1]) / u0_[n - 2];
        for (Eigen::Index k = n - 3; k >= 0; --k) {
            x[k] = (x[k] - u1_[k] * x[k + 1] - u2_[k] * x[k + 2]) / u0_[k];
        }
    }

private:
    Eigen::VectorXd u0_, u1_, u2_, mult_;
    std::vector<bool> swapped_;
};

void orthogonalize_against(Eigen::VectorXd& x, const Eigen::MatrixXd& basis, Eigen::Index begin,
                           Eigen::Index end) {
    for (Eigen::Index j = begin; j < end; ++j) {
        x.noalias() -= basis.col(j).dot(x) * basis.col(j);
    }
}

}  // namespace

EigensolverError::EigensolverError(const std::string& what, Eigen::Index dimension,
                                   Eigen::Index index, double matrix_norm)
    : std::runtime_error(what), dimension_(dimension), index_(index), matrix_norm_(matrix_norm) {}

void SymmetricTridiagonal::validate() const {
    if (diagonal.size() < 1) throw std::invalid_argument("tridiagonal matrix must have dimension >= 1");
    if (off_diagonal.size() != diagonal.size() - 1) {
        throw std::invalid_argument("off-diagonal length must be dimension - 1");
    }
    if (!diagonal.allFinite() || !off_diagonal.allFinite()) {
        throw std::invalid_argument("tridiagonal matrix has non-finite entries");
    }
}

double SymmetricTridiagonal::norm_inf() const {
    const Eigen::Index n = size();
    double best = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double row = std::abs(diagonal[i]);
        if (i > 0) row += std::abs(off_diagonal[i - 1]);
        if (i + 1 < n) row += std::abs(off_diagonal[i]);
        best = std::max(best, row);
    }
    return best;
}

Eigen::VectorXd SymmetricTridiagonal::apply(const Eigen::VectorXd& x) const {
    const Eigen::Index n = size();
    Eigen::VectorXd y = diagonal.cwiseProduct(x);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        y[i] += off_diagonal[i] * x[i + 1];
        y[i + 1] += off_diagonal[i] * x[i];
    }
    return y;
}

Eigen::MatrixXd SymmetricTridiagonal::dense() const {
    const Eigen::Index n = size();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    m.diagonal() = diagonal;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        m(i, i + 1) = off_diagonal[i];
        m(i + 1, i) = off_diagonal[i];
    }
    return m;
}

void normalize_signs(Eigen::MatrixXd& vectors) {
    for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
            // Strict comparison with a relative margin keeps the choice stable under roundoff.
            const double a = std::abs(vectors(i, j));
            if (a > best * (1.0 + 1e-12)) {
                best = a;
                arg = i;
            }
        }
        if (vectors(arg, j) < 0.0) vectors.col(j) *= -1.0;
    }
}

EigenDecomposition ql_eigensystem(const SymmetricTridiagonal& t, const QlOptions& options) {
    t.validate();
    const Eigen::Index n = t.size();
    Eigen::VectorXd d = t.diagonal;
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e.head(n - 1) = t.off_diagonal;
    Eigen::MatrixXd z = Eigen::MatrixXd::Identity(n, n);
    implicit_ql(d, e, &z, options.max_iterations_per_value, t.norm_inf());

    const auto order = ascending_order(d);
    EigenDecomposition out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index src = order[static_cast<std::size_t>(j)];
        out.values[j] = d[src];
        out.vectors.col(j) = z.col(src);
    }
    normalize_signs(out.vectors);
    return out;
}

Eigen::VectorXd ql_eigenvalues(const SymmetricTridiagonal& t, const QlOptions& options) {
    t.validate();
    const Eigen::Index n = t.size();
    Eigen::VectorXd d = t.diagonal;
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e.head(n - 1) = t.off_diagonal;
    implicit_ql(d, e, nullptr, options.max_iterations_per_value, t.norm_inf());
    std::sort(d.data(), d.data() + n);
    return d;
}

Eigen::Index count_below(const SymmetricTridiagonal& t, double x) {
    t.validate();
    return SturmCounter(t).count(x);
}

double bisect_eigenvalue(const SymmetricTridiagonal& t, Eigen::Index k) {
    t.validate();
    if (k < 0 || k >= t.size()) throw std::out_of_range("eigenvalue index out of range");
    return bisect_range(t, k, 1)[0];
}

EigenDecomposition lowest_eigensystem(const SymmetricTridiagonal& t, Eigen::Index count) {
    t.validate();
    const Eigen::Index n = t.size();
    if (count < 1 || count > n) throw std::out_of_range("eigenpair count out of range");

    EigenDecomposition out;
    out.values = bisect_lowest(t, count);
    out.vectors.resize(n, count);
    if (n == 1) {
        out.vectors(0, 0) = 1.0;
        return out;
    }

    const double norm = std::max(t.norm_inf(), kSafeMin);
    const double tiny = kEps * norm;
    const double cluster_gap = 1e-3 * norm;
    const double growth_target = 1.0 / (1e3 * std::sqrt(static_cast<double>(n)) * tiny);

    std::mt19937_64 rng(0x5eed5eedULL);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    Eigen::Index cluster_begin = 0;
    double previous_shift = 0.0;
    for (Eigen::Index j = 0; j < count; ++j) {
        double shift = out.values[j];
        if (j > 0) {
            if (out.values[j] - out.values[j - 1] > cluster_gap) {
                cluster_begin = j;
            } else if (shift - previous_shift < 10.0 * tiny) {
                shift = previous_shift + 10.0 * tiny;
            }
        }
        previous_shift = shift;

        const ShiftedTridiagonalLU lu(t, shift, tiny);
        Eigen::VectorXd x(n);
        for (Eigen::Index i = 0; i < n; ++i) x[i] = uniform(rng);
        x.normalize();
        bool converged = false;
        for (int it = 0; it < 6; ++it) {
            lu.solve(x);
            orthogonalize_against(x, out.vectors, cluster_begin, j);
            const double growth = x.norm();
            if (!(growth > 0.0) || !std::isfinite(growth)) {
                throw EigensolverError(
                    describe_failure("inverse iteration produced a degenerate vector", n, j, norm), n, j,
                    norm);
            }
            x /= growth;
            if (converged) break;  // one extra sweep after the growth test passes
            converged = growth >= growth_target;
        }
        out.vectors.col(j) = x;
    }

    // Two Gram-Schmidt passes bring orthonormality to working precision.
    for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index j = 0; j < count; ++j) {
            Eigen::VectorXd v = out.vectors.col(j);
            orthogonalize_against(v, out.vectors, 0, j);
            out.vectors.col(j) = v / v.norm();
        }
    }
    normalize_signs(out.vectors);
    return out;
}

}  // namespace critsense
