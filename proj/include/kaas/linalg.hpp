#pragma once
// Dense real-matrix kernel: row-major storage, products, one-sided Jacobi SVD
// and a central-difference gradient checker.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kaas/error.hpp"

namespace kaas {

using Vector = std::vector<double>;

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(std::initializer_list<std::initializer_list<double>> init) {
        rows_ = init.size();
        cols_ = rows_ == 0 ? 0 : init.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : init) {
            if (r.size() != cols_) throw DimensionError("ragged matrix initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    void fill(double value) { std::fill(data_.begin(), data_.end(), value); }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Four independent partial sums, combined in a fixed order.
inline double dot(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " times " + std::to_string(b.rows()) +
                             "x" + std::to_string(b.cols()));
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row(i);
        for (std::size_t p = 0; p < a.cols(); ++p) axpy(a(i, p), b.row(p), ci);
    }
    return c;
}

// a x
inline Vector matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw DimensionError("matvec: dimension mismatch");
    Vector y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
    return y;
}

// aᵀ x
inline Vector matvec_transposed(const Matrix& a, std::span<const double> x) {
    if (a.rows() != x.size()) throw DimensionError("matvec_transposed: dimension mismatch");
    Vector y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) axpy(x[i], a.row(i), y);
    return y;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError("matrix subtraction: shape mismatch");
    Matrix c = a;
    auto cd = c.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < cd.size(); ++i) cd[i] -= bd[i];
    return c;
}

inline double frobenius_norm(const Matrix& a) {
    return std::sqrt(dot(a.data(), a.data()));
}

inline double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double x : a.data()) m = std::max(m, std::abs(x));
    return m;
}

// a · diag(s)
inline Matrix scale_columns(Matrix a, std::span<const double> s) {
    if (a.cols() != s.size()) throw DimensionError("scale_columns: dimension mismatch");
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) a(i, j) *= s[j];
    return a;
}

// ‖aᵀa − I‖_max
inline double orthonormality_error(const Matrix& a) {
    Matrix g = matmul(transpose(a), a);
    return max_abs(g - Matrix::identity(g.rows()));
}

struct SvdResult {
    Matrix u;      // m×k
    Vector sigma;  // k, non-increasing
    Matrix v;      // n×k

    Matrix reconstruct() const { return matmul(scale_columns(u, sigma), transpose(v)); }
};

struct SvdOptions {
    std::size_t max_sweeps = 100;
};

// Singular values below this fraction of σ_max are treated as zero.
inline constexpr double kRankThreshold = 1e-10;

inline std::size_t numerical_rank(std::span<const double> sigma) {
    if (sigma.empty() || sigma.front() <= 0.0) return 0;
    const double cut = kRankThreshold * sigma.front();
    return static_cast<std::size_t>(
        std::count_if(sigma.begin(), sigma.end(), [cut](double s) { return s >= cut; }));
}

namespace detail {

// Hestenes one-sided Jacobi on a matrix with rows >= cols. Returns the full
// thin decomposition, columns sorted by singular value.
inline SvdResult jacobi_tall(const Matrix& a, std::size_t max_sweeps) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    std::vector<Vector> ucol(n, Vector(m));
    std::vector<Vector> vcol(n, Vector(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < m; ++i) ucol[j][i] = a(i, j);
        vcol[j][j] = 1.0;
    }

    const double eps = std::numeric_limits<double>::epsilon();
    const double tol = eps * static_cast<double>(m);
    // Columns this small are numerically null; rotating them against a large
    // parallel column just regenerates rounding residue.
    const double negligible = std::pow(eps * frobenius_norm(a), 2);
    bool converged = n < 2;
    for (std::size_t sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                Vector& up = ucol[p];
                Vector& uq = ucol[q];
                const double alpha = dot(up, up);
                const double beta = dot(uq, uq);
                const double gamma = dot(up, uq);
                if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                if (std::min(alpha, beta) <= negligible) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double x = up[i];
                    const double y = uq[i];
                    up[i] = c * x - s * y;
                    uq[i] = s * x + c * y;
                }
                Vector& vp = vcol[p];
                Vector& vq = vcol[q];
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = vp[i];
                    const double y = vq[i];
                    vp[i] = c * x - s * y;
                    vq[i] = s * x + c * y;
                }
            }
        }
        converged = !rotated;
    }
    if (!converged)
        throw ConvergenceError("svd: no convergence after " + std::to_string(max_sweeps) +
                               " sweeps");

    Vector norms(n);
    for (std::size_t j = 0; j < n; ++j) norms[j] = std::sqrt(dot(ucol[j], ucol[j]));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

    SvdResult r{Matrix(m, n), Vector(n), Matrix(n, n)};
    const double null_cut = norms[order[0]] * eps * static_cast<double>(std::max(m, n));
    std::vector<std::size_t> null_cols;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        const double s = norms[src];
        for (std::size_t i = 0; i < n; ++i) r.v(i, j) = vcol[src][i];
        if (s > null_cut && s > 0.0) {
            r.sigma[j] = s;
            for (std::size_t i = 0; i < m; ++i) r.u(i, j) = ucol[src][i] / s;
        } else {
            r.sigma[j] = 0.0;
            null_cols.push_back(j);
        }
    }

    // Complete u with an orthonormal basis for numerically null columns.
    std::vector<bool> ready(n);
    for (std::size_t j = 0; j < n; ++j) ready[j] = r.sigma[j] > 0.0;
    std::size_t candidate = 0;
    for (std::size_t j : null_cols) {
        while (candidate < m) {
            Vector e(m, 0.0);
            e[candidate++] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t c = 0; c < n; ++c) {
                    if (!ready[c]) continue;
                    double proj = 0.0;
                    for (std::size_t i = 0; i < m; ++i) proj += r.u(i, c) * e[i];
                    for (std::size_t i = 0; i < m; ++i) e[i] -= proj * r.u(i, c);
                }
            }
            const double norm = std::sqrt(dot(e, e));
            if (norm > 0.5) {
                for (std::size_t i = 0; i < m; ++i) r.u(i, j) = e[i] / norm;
                ready[j] = true;
                break;
            }
        }
    }
    return r;
}

}  // namespace detail

// Top-k singular triplets of `a`. The full decomposition is computed by
// one-sided Jacobi and then truncated. Each factor pair is sign-normalized so
// the largest-magnitude entry of every u column is positive.
inline SvdResult svd(const Matrix& a, std::size_t k, SvdOptions options = {}) {
    const std::size_t min_dim = std::min(a.rows(), a.cols());
    if (k < 1 || k > min_dim)
        throw DimensionError("svd: rank " + std::to_string(k) + " outside [1, " +
                             std::to_string(min_dim) + "]");
    if (!all_finite(a.data())) throw NumericError("svd: non-finite input");

    SvdResult full;
    if (a.rows() >= a.cols()) {
        full = detail::jacobi_tall(a, options.max_sweeps);
    } else {
        SvdResult t = detail::jacobi_tall(transpose(a), options.max_sweeps);
        full = SvdResult{std::move(t.v), std::move(t.sigma), std::move(t.u)};
    }

    SvdResult r{Matrix(a.rows(), k), Vector(full.sigma.begin(), full.sigma.begin() + k),
                Matrix(a.cols(), k)};
    for (std::size_t j = 0; j < k; ++j) {
        std::size_t arg = 0;
        for (std::size_t i = 1; i < a.rows(); ++i)
            if (std::abs(full.u(i, j)) > std::abs(full.u(arg, j))) arg = i;
        const double sign = full.u(arg, j) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < a.rows(); ++i) r.u(i, j) = sign * full.u(i, j);
        for (std::size_t i = 0; i < a.cols(); ++i) r.v(i, j) = sign * full.v(i, j);
    }
    return r;
}

// Rows of `a` expressed in the orthonormal column basis `v`, i.e. a·v.
inline Matrix project_onto_basis(const Matrix& a, const Matrix& v) {
    if (a.cols() != v.rows())
        throw DimensionError("project_onto_basis: a has " + std::to_string(a.cols()) +
                             " columns but basis has " + std::to_string(v.rows()) + " rows");
    return matmul(a, v);
}

using ScalarFunction = std::function<double(std::span<const double>)>;

// Max over coordinates of |analytic_i − central_i| / max(1, |analytic_i|, |central_i|).
// Non-differentiable points (a hinge kink, a max-pool tie) report large errors;
// probe away from them.
inline double grad_check(const ScalarFunction& f, std::span<const double> x,
                         std::span<const double> analytic, double h) {
    if (x.size() != analytic.size()) throw DimensionError("grad_check: gradient size mismatch");
    if (!(h > 0.0)) throw ValidationError("grad_check: step must be positive");
    Vector probe(x.begin(), x.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + h;
        const double plus = f(probe);
        probe[i] = saved - h;
        const double minus = f(probe);
        probe[i] = saved;
        if (!std::isfinite(plus) || !std::isfinite(minus))
            throw NumericError("grad_check: non-finite function value at coordinate " +
                               std::to_string(i));
        const double central = (plus - minus) / (2.0 * h);
        const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(central)});
        worst = std::max(worst, std::abs(analytic[i] - central) / denom);
    }
    return worst;
}

}  // namespace kaas
