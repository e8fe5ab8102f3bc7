#pragma once

// Small dense/banded linear-algebra kernel: cyclic Jacobi symmetric
// eigendecomposition, dense and banded Cholesky, and the band of the
// inverse of a banded SPD matrix (used for trace identities).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "osul/error.hpp"
#include "osul/matrix.hpp"

namespace osul {

/// Symmetric eigendecomposition A = V diag(values) Vᵀ, eigenvalues descending.
struct SymEigen {
    Vector values;
    Matrix vectors;  ///< column j pairs with values[j]
};

inline bool is_symmetric(const Matrix& a, double rel_tol = 1e-10) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(a.max_abs(), 1e-300);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(a(i, j) - a(j, i)) > rel_tol * scale) return false;
    return true;
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
/// 1e-12·‖A‖_F (or 100 sweeps).
inline SymEigen sym_eigen(const Matrix& input) {
    require(is_symmetric(input), ErrorCode::NotSymmetric, "sym_eigen: matrix is not symmetric");
    const std::size_t n = input.rows();
    Matrix a = input;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i) = 0.5 * (a(i, j) + a(j, i));
    Matrix v = Matrix::identity(n);

    const double norm = a.frobenius();
    const double target = 1e-12 * norm;
    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    constexpr int max_sweeps = 100;
    bool converged = norm == 0.0 || off_norm() <= target;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p), aqq = a(q, q);
                // negligible relative to both diagonal entries
                if (std::abs(apq) < 1e-300 ||
                    (std::abs(app) + std::abs(apq) * 1e18 == std::abs(app) &&
                     std::abs(aqq) + std::abs(apq) * 1e18 == std::abs(aqq))) {
                    a(p, q) = a(q, p) = 0.0;
                    continue;
                }
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
        converged = off_norm() <= target;
    }
    require(converged, ErrorCode::ConvergenceFailure, "sym_eigen: Jacobi sweeps did not converge");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
    SymEigen out{Vector(n), Matrix(n, n)};
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

/// Eigendecomposition of FᵀF from the factor F itself (one-sided Jacobi:
/// rotate columns of F until they are mutually orthogonal). Small
/// eigenvalues come out with far better relative accuracy than from
/// sym_eigen(FᵀF), because FᵀF is never formed.
inline SymEigen gram_eigen(const Matrix& f) {
    const std::size_t p = f.cols(), rows = f.rows();
    Matrix a = f.transpose();  // row j holds column j of F
    Matrix v = Matrix::identity(p);
    // pairs of columns this short are rounding noise of null directions
    const double frob = f.frobenius();
    const double negligible = std::pow(1e-13 * frob, 2);
    constexpr int max_sweeps = 100;
    bool converged = false;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        converged = true;
        for (std::size_t i = 0; i + 1 < p; ++i) {
            for (std::size_t j = i + 1; j < p; ++j) {
                auto ci = a.row(i), cj = a.row(j);
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t k = 0; k < rows; ++k) {
                    alpha += ci[k] * ci[k];
                    beta += cj[k] * cj[k];
                    gamma += ci[k] * cj[k];
                }
                if (gamma == 0.0 || std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) continue;
                if (std::min(alpha, beta) <= negligible &&
                    (std::max(alpha, beta) <= negligible || std::abs(gamma) <= 1e-17 * frob * std::sqrt(std::max(alpha, beta))))
                    continue;
                converged = false;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t), s = c * t;
                for (std::size_t k = 0; k < rows; ++k) {
                    const double x = ci[k], y = cj[k];
                    ci[k] = c * x - s * y;
                    cj[k] = s * x + c * y;
                }
                auto vi = v.row(i), vj = v.row(j);
                for (std::size_t k = 0; k < p; ++k) {
                    const double x = vi[k], y = vj[k];
                    vi[k] = c * x - s * y;
                    vj[k] = s * x + c * y;
                }
            }
        }
    }
    require(converged, ErrorCode::ConvergenceFailure, "gram_eigen: Jacobi sweeps did not converge");

    Vector norms(p);
    for (std::size_t j = 0; j < p; ++j) norms[j] = dot(a.row(j), a.row(j));
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return norms[i] > norms[j]; });
    SymEigen out{Vector(p), Matrix(p, p)};
    for (std::size_t j = 0; j < p; ++j) {
        out.values[j] = norms[order[j]];
        // v is stored transposed: row r of v is column r of the rotation
        for (std::size_t i = 0; i < p; ++i) out.vectors(i, j) = v(order[j], i);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dense Cholesky

/// Lower-triangular factor of a dense SPD matrix.
class Cholesky {
public:
    explicit Cholesky(const Matrix& a) : l_(a.rows(), a.rows()) {
        require(a.rows() == a.cols(), ErrorCode::InvalidInput, "Cholesky: matrix not square");
        const std::size_t n = a.rows();
        for (std::size_t j = 0; j < n; ++j) {
            double d = a(j, j);
            for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
            if (!(d > 0.0) || !std::isfinite(d))
                throw Error(ErrorCode::NotPositiveDefinite,
                            "Cholesky: non-positive pivot at index " + std::to_string(j));
            const double ljj = std::sqrt(d);
            l_(j, j) = ljj;
            for (std::size_t i = j + 1; i < n; ++i) {
                double s = a(i, j);
                for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
                l_(i, j) = s / ljj;
            }
        }
    }

    [[nodiscard]] const Matrix& factor() const noexcept { return l_; }
    [[nodiscard]] std::size_t size() const noexcept { return l_.rows(); }

    [[nodiscard]] Vector solve(std::span<const double> b) const {
        const std::size_t n = size();
        require(b.size() == n, ErrorCode::InvalidInput, "Cholesky::solve: size mismatch");
        Vector x(b.begin(), b.end());
        for (std::size_t i = 0; i < n; ++i) {
            double s = x[i];
            for (std::size_t k = 0; k < i; ++k) s -= l_(i, k) * x[k];
            x[i] = s / l_(i, i);
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x[i];
            for (std::size_t k = i + 1; k < n; ++k) s -= l_(k, i) * x[k];
            x[i] = s / l_(i, i);
        }
        return x;
    }

    [[nodiscard]] Matrix solve(const Matrix& b) const {
        Matrix x(b.rows(), b.cols());
        for (std::size_t j = 0; j < b.cols(); ++j) x.set_col(j, solve(b.col(j)));
        return x;
    }

    [[nodiscard]] Matrix inverse() const { return solve(Matrix::identity(size())); }

    [[nodiscard]] double log_det() const {
        double s = 0.0;
        for (std::size_t i = 0; i < size(); ++i) s += std::log(l_(i, i));
        return 2.0 * s;
    }

private:
    Matrix l_;
};

inline Vector solve_spd(const Matrix& a, std::span<const double> b) { return Cholesky(a).solve(b); }
inline Matrix solve_spd(const Matrix& a, const Matrix& b) { return Cholesky(a).solve(b); }

// ---------------------------------------------------------------------------
// Banded storage and Cholesky

/// Symmetric band matrix; stores the diagonal and `bandwidth` sub-diagonals.
class BandMatrix {
public:
    BandMatrix() = default;
    BandMatrix(std::size_t n, std::size_t bandwidth)
        : n_(n), w_(bandwidth), data_(n * (bandwidth + 1), 0.0) {}

    static BandMatrix from_dense(const Matrix& a, std::size_t bandwidth) {
        BandMatrix b(a.rows(), bandwidth);
        for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t j = (i > bandwidth ? i - bandwidth : 0); j <= i; ++j) b.at(i, j) = a(i, j);
        return b;
    }

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] std::size_t bandwidth() const noexcept { return w_; }

    /// Lower-band element (i ≥ j, i − j ≤ bandwidth).
    double& at(std::size_t i, std::size_t j) noexcept { return data_[i * (w_ + 1) + (i - j)]; }
    [[nodiscard]] double at(std::size_t i, std::size_t j) const noexcept {
        return data_[i * (w_ + 1) + (i - j)];
    }

    /// Symmetric access; zero outside the band.
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const noexcept {
        if (i < j) std::swap(i, j);
        return i - j > w_ ? 0.0 : at(i, j);
    }

    [[nodiscard]] Matrix to_dense() const {
        Matrix a(n_, n_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) a(i, j) = (*this)(i, j);
        return a;
    }

    /// this += s·other (other's band must fit inside this one)
    void add_scaled(const BandMatrix& other, double s) {
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = (i > other.w_ ? i - other.w_ : 0); j <= i; ++j) at(i, j) += s * other.at(i, j);
    }

    [[nodiscard]] Vector multiply(std::span<const double> x) const {
        Vector y(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = (i > w_ ? i - w_ : 0); j <= i; ++j) {
                const double v = at(i, j);
                y[i] += v * x[j];
                if (j != i) y[j] += v * x[i];
            }
        }
        return y;
    }

private:
    std::size_t n_ = 0;
    std::size_t w_ = 0;
    std::vector<double> data_;
};

/// Lower-triangular banded Cholesky factor; O(n·w²) factorization, O(n·w) solves.
class BandedCholesky {
public:
    explicit BandedCholesky(const BandMatrix& a) : l_(a) {
        const std::size_t n = l_.size(), w = l_.bandwidth();
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t k0 = j > w ? j - w : 0;
            double d = l_.at(j, j);
            for (std::size_t k = k0; k < j; ++k) d -= l_.at(j, k) * l_.at(j, k);
            if (!(d > 0.0) || !std::isfinite(d))
                throw Error(ErrorCode::NotPositiveDefinite,
                            "BandedCholesky: non-positive pivot at index " + std::to_string(j));
            const double ljj = std::sqrt(d);
            l_.at(j, j) = ljj;
            const std::size_t iend = std::min(n, j + w + 1);
            for (std::size_t i = j + 1; i < iend; ++i) {
                double s = l_.at(i, j);
                const std::size_t kk = std::max(k0, i > w ? i - w : 0);
                for (std::size_t k = kk; k < j; ++k) s -= l_.at(i, k) * l_.at(j, k);
                l_.at(i, j) = s / ljj;
            }
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return l_.size(); }
    [[nodiscard]] std::size_t bandwidth() const noexcept { return l_.bandwidth(); }
    [[nodiscard]] double factor(std::size_t i, std::size_t j) const noexcept { return l_.at(i, j); }

    [[nodiscard]] Vector solve(std::span<const double> b) const {
        const std::size_t n = size(), w = bandwidth();
        require(b.size() == n, ErrorCode::InvalidInput, "BandedCholesky::solve: size mismatch");
        Vector x(b.begin(), b.end());
        for (std::size_t i = 0; i < n; ++i) {
            double s = x[i];
            for (std::size_t k = (i > w ? i - w : 0); k < i; ++k) s -= l_.at(i, k) * x[k];
            x[i] = s / l_.at(i, i);
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x[i];
            const std::size_t kend = std::min(n, i + w + 1);
            for (std::size_t k = i + 1; k < kend; ++k) s -= l_.at(k, i) * x[k];
            x[i] = s / l_.at(i, i);
        }
        return x;
    }

    [[nodiscard]] double log_det() const {
        double s = 0.0;
        for (std::size_t i = 0; i < size(); ++i) s += std::log(l_.at(i, i));
        return 2.0 * s;
    }

    /// Entries of A⁻¹ inside the band of A (Hutchinson–de Hoog recursion).
    [[nodiscard]] BandMatrix inverse_band() const {
        const std::size_t n = size(), w = bandwidth();
        BandMatrix sigma(n, w);
        for (std::size_t i = n; i-- > 0;) {
            const double lii = l_.at(i, i);
            const std::size_t kend = std::min(n, i + w + 1);
            // off-diagonal entries Σ(j, i), j > i, from largest j down
            for (std::size_t j = kend; j-- > i + 1;) {
                double s = 0.0;
                for (std::size_t k = i + 1; k < kend; ++k) {
                    const double sig_kj = k >= j ? sigma.at(k, j) : sigma.at(j, k);
                    s += l_.at(k, i) * sig_kj;
                }
                sigma.at(j, i) = -s / lii;
            }
            double s = 0.0;
            for (std::size_t k = i + 1; k < kend; ++k) s += l_.at(k, i) * sigma.at(k, i);
            sigma.at(i, i) = (1.0 / lii - s) / lii;
        }
        return sigma;
    }

    /// Wraps an existing lower factor L (positive diagonal) of A = LLᵀ.
    static BandedCholesky from_factor(BandMatrix l) {
        for (std::size_t i = 0; i < l.size(); ++i)
            require(l.at(i, i) > 0.0 && std::isfinite(l.at(i, i)), ErrorCode::NotPositiveDefinite,
                    "BandedCholesky: factor has a non-positive diagonal at index " + std::to_string(i));
        BandedCholesky c;
        c.l_ = std::move(l);
        return c;
    }

private:
    BandedCholesky() = default;

    BandMatrix l_;
};

/// Row-by-row Givens QR of a tall banded least-squares problem
/// min ‖Aν − r‖ whose rows each have at most bandwidth + 1 consecutive
/// nonzeros. Keeps only the upper band of R and Qᵀr, so memory is O(p·w)
/// whatever the number of rows.
class BandedQR {
public:
    BandedQR(std::size_t p, std::size_t bandwidth)
        : p_(p), w_(bandwidth), r_(p * (bandwidth + 1), 0.0), z_(p, 0.0), window_(bandwidth + 1) {}

    [[nodiscard]] std::size_t size() const noexcept { return p_; }
    [[nodiscard]] std::size_t bandwidth() const noexcept { return w_; }

    /// Adds the row with entries `values` in columns offset, offset + 1, ...
    void add_row(std::size_t offset, std::span<const double> values, double rhs) {
        require(values.size() <= w_ + 1 && offset + values.size() <= p_, ErrorCode::InvalidInput,
                "BandedQR::add_row: row does not fit the band");
        std::fill(window_.begin(), window_.end(), 0.0);
        std::copy(values.begin(), values.end(), window_.begin());
        for (std::size_t c = offset; c < p_; ++c) {
            const double v = window_[0];
            if (v != 0.0) {
                double* rc = &r_[c * (w_ + 1)];
                const double d = rc[0];
                const double h = std::hypot(d, v);
                const double cs = d / h, sn = v / h;
                const std::size_t kend = std::min(w_ + 1, p_ - c);
                for (std::size_t k = 0; k < kend; ++k) {
                    const double a = rc[k], b = window_[k];
                    rc[k] = cs * a + sn * b;
                    window_[k] = cs * b - sn * a;
                }
                const double zc = z_[c];
                z_[c] = cs * zc + sn * rhs;
                rhs = cs * rhs - sn * zc;
            }
            std::rotate(window_.begin(), window_.begin() + 1, window_.end());
            window_.back() = 0.0;
            if (std::all_of(window_.begin(), window_.end(), [](double e) { return e == 0.0; })) break;
        }
        residual_ss_ += rhs * rhs;
    }

    /// R(i, j), j − i ≤ bandwidth.
    [[nodiscard]] double r(std::size_t i, std::size_t j) const noexcept { return r_[i * (w_ + 1) + (j - i)]; }
    [[nodiscard]] const Vector& qt_rhs() const noexcept { return z_; }
    /// Squared norm of the part of the right-hand side outside the range of A.
    [[nodiscard]] double residual_sum_of_squares() const noexcept { return residual_ss_; }

    /// Solves Rν = Qᵀr; throws NotPositiveDefinite when R is numerically singular.
    [[nodiscard]] Vector solve() const {
        check_rank();
        Vector x(z_);
        for (std::size_t i = p_; i-- > 0;) {
            double s = x[i];
            const std::size_t kend = std::min(w_ + 1, p_ - i);
            for (std::size_t k = 1; k < kend; ++k) s -= r(i, i + k) * x[i + k];
            x[i] = s / r(i, i);
        }
        return x;
    }

    /// Cholesky factor of AᵀA, that is Rᵀ with rows of R sign-normalized.
    [[nodiscard]] BandedCholesky cholesky() const {
        check_rank();
        BandMatrix l(p_, w_);
        for (std::size_t i = 0; i < p_; ++i) {
            const double sign = r(i, i) < 0.0 ? -1.0 : 1.0;
            const std::size_t kend = std::min(w_ + 1, p_ - i);
            for (std::size_t k = 0; k < kend; ++k) l.at(i + k, i) = sign * r(i, i + k);
        }
        return BandedCholesky::from_factor(std::move(l));
    }

private:
    void check_rank() const {
        double big = 0.0;
        for (std::size_t i = 0; i < p_; ++i) big = std::max(big, std::abs(r(i, i)));
        for (std::size_t i = 0; i < p_; ++i)
            if (!(std::abs(r(i, i)) > 1e-14 * big))
                throw Error(ErrorCode::NotPositiveDefinite,
                            "BandedQR: rank deficient at column " + std::to_string(i));
    }

    std::size_t p_;
    std::size_t w_;
    std::vector<double> r_;
    Vector z_;
    Vector window_;
    double residual_ss_ = 0.0;
};

inline Vector solve_banded_spd(const BandMatrix& a, std::span<const double> b) {
    return BandedCholesky(a).solve(b);
}

}  // namespace osul
