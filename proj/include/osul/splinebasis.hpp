#pragma once

/**
 * @file splinebasis.hpp
 * @brief Knot sequences and B-spline basis evaluation of degree 2m−1.
 *
 * Two knot layouts are supported. The clamped layout repeats each boundary
 * knot 2m times:
 *
 *     a = t_0 = … = t_{2m−1} < t_{2m} < … < t_{2m+K−1} < t_{2m+K} = … = t_{K+4m−1} = b
 *
 * giving K + 2m basis functions on [a, b]. The extended layout (equally
 * spaced knots continued 2m − 1 steps past each boundary, as used for
 * P-splines) has no repeated knots and the same number of functions.
 *
 * Evaluation uses the triangular Cox–de Boor table and its derivative
 * recurrence (de Boor; Piegl & Tiller, algorithm A2.3). Every routine works
 * on a single knot span, so a span can also be evaluated "interval-locally"
 * at points outside it, which yields the polynomial extension of that piece.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "osul/error.hpp"
#include "osul/matrix.hpp"

namespace osul {

enum class KnotLayout { Clamped, Extended };

class KnotSequence {
public:
    /// Order parameter m; the spline degree is 2m − 1.
    [[nodiscard]] int order() const noexcept { return m_; }
    [[nodiscard]] int degree() const noexcept { return 2 * m_ - 1; }
    [[nodiscard]] double lower() const noexcept { return a_; }
    [[nodiscard]] double upper() const noexcept { return b_; }
    [[nodiscard]] const Vector& interior() const noexcept { return interior_; }
    [[nodiscard]] const Vector& full() const noexcept { return full_; }
    [[nodiscard]] KnotLayout layout() const noexcept { return layout_; }
    [[nodiscard]] std::size_t num_interior() const noexcept { return interior_.size(); }
    [[nodiscard]] std::size_t num_basis() const noexcept { return full_.size() - 2 * static_cast<std::size_t>(m_); }

    /// Index ℓ of the first span [t_ℓ, t_{ℓ+1}) inside [a, b].
    [[nodiscard]] std::size_t first_span() const noexcept { return static_cast<std::size_t>(degree()); }
    /// Index of the last span inside [a, b]; t_{ℓ+1} = b.
    [[nodiscard]] std::size_t last_span() const noexcept { return full_.size() - 2 * static_cast<std::size_t>(m_) - 1; }

    [[nodiscard]] bool contains(double x) const noexcept { return x >= a_ && x <= b_; }

    /// Span used for point evaluation: right-continuous inside [a, b), the last
    /// span at b, and the nearest boundary span outside [a, b].
    [[nodiscard]] std::size_t find_span(double x) const noexcept {
        if (x <= a_) return first_span();
        if (x >= b_) return last_span();
        auto it = std::upper_bound(full_.begin(), full_.end(), x);
        auto span = static_cast<std::size_t>(std::distance(full_.begin(), it)) - 1;
        return std::clamp(span, first_span(), last_span());
    }

    /// Greville abscissae: the coefficients reproducing f(x) = x.
    [[nodiscard]] Vector greville() const {
        const auto p = static_cast<std::size_t>(degree());
        Vector g(num_basis());
        for (std::size_t k = 0; k < g.size(); ++k) {
            double s = 0.0;
            for (std::size_t j = 1; j <= p; ++j) s += full_[k + j];
            g[k] = p > 0 ? s / static_cast<double>(p) : full_[k];
        }
        return g;
    }

    /// The same knots mapped affinely so that [a, b] becomes [0, 1].
    [[nodiscard]] KnotSequence standardized() const {
        KnotSequence s = *this;
        const double w = b_ - a_;
        auto map = [&](double v) { return (v - a_) / w; };
        for (double& v : s.interior_) v = map(v);
        for (double& v : s.full_) v = map(v);
        s.a_ = 0.0;
        s.b_ = 1.0;
        return s;
    }

    friend KnotSequence make_knots(double a, double b, std::span<const double> interior, int m);
    friend KnotSequence make_extended_knots(double a, double b, std::size_t num_interior, int m);

private:
    KnotSequence() = default;

    int m_ = 2;
    double a_ = 0.0;
    double b_ = 1.0;
    Vector interior_;
    Vector full_;
    KnotLayout layout_ = KnotLayout::Clamped;
};

/// Clamped knot sequence with 2m copies of each boundary knot.
inline KnotSequence make_knots(double a, double b, std::span<const double> interior, int m) {
    require(m >= 1, ErrorCode::InvalidOrder, "make_knots: order m must be at least 1");
    require(std::isfinite(a) && std::isfinite(b) && a < b, ErrorCode::InvalidKnots,
            "make_knots: need finite a < b");
    for (std::size_t k = 0; k < interior.size(); ++k) {
        require(std::isfinite(interior[k]), ErrorCode::InvalidKnots, "make_knots: non-finite interior knot");
        require(interior[k] > a && interior[k] < b, ErrorCode::InvalidKnots,
                "make_knots: interior knot " + std::to_string(interior[k]) + " outside (a, b)");
        if (k > 0)
            require(interior[k] > interior[k - 1], ErrorCode::InvalidKnots,
                    "make_knots: interior knots must be strictly increasing");
    }
    KnotSequence s;
    s.m_ = m;
    s.a_ = a;
    s.b_ = b;
    s.interior_.assign(interior.begin(), interior.end());
    s.layout_ = KnotLayout::Clamped;
    const auto reps = static_cast<std::size_t>(2 * m);
    s.full_.reserve(interior.size() + 2 * reps);
    s.full_.insert(s.full_.end(), reps, a);
    s.full_.insert(s.full_.end(), interior.begin(), interior.end());
    s.full_.insert(s.full_.end(), reps, b);
    return s;
}

/// Equally spaced knots continued 2m − 1 spacings beyond each boundary.
inline KnotSequence make_extended_knots(double a, double b, std::size_t num_interior, int m) {
    require(m >= 1, ErrorCode::InvalidOrder, "make_extended_knots: order m must be at least 1");
    require(std::isfinite(a) && std::isfinite(b) && a < b, ErrorCode::InvalidKnots,
            "make_extended_knots: need finite a < b");
    KnotSequence s;
    s.m_ = m;
    s.a_ = a;
    s.b_ = b;
    s.layout_ = KnotLayout::Extended;
    const double h = (b - a) / static_cast<double>(num_interior + 1);
    const auto extra = static_cast<long>(2 * m - 1);
    const auto last = static_cast<long>(num_interior) + 1;
    for (long k = -extra; k <= last + extra; ++k) {
        double v = a + static_cast<double>(k) * h;
        if (k == 0) v = a;
        if (k == last) v = b;
        s.full_.push_back(v);
        if (k > 0 && k < last) s.interior_.push_back(v);
    }
    return s;
}

/// Uniform interior knots a + k(b − a)/(K + 1), k = 1..K.
inline Vector equal_interior_knots(double a, double b, std::size_t num_interior) {
    Vector out(num_interior);
    for (std::size_t k = 0; k < num_interior; ++k)
        out[k] = a + (b - a) * static_cast<double>(k + 1) / static_cast<double>(num_interior + 1);
    return out;
}

inline Vector sorted_unique(std::span<const double> x) {
    Vector u(x.begin(), x.end());
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    return u;
}

/// K interior knots at the j/(K+1) sample quantiles (j = 1..K) of the unique
/// x values, using linear interpolation between order statistics.
inline Vector quantile_knots(std::span<const double> x, std::size_t num_knots) {
    require(!x.empty(), ErrorCode::InsufficientData, "quantile_knots: empty input");
    const Vector u = sorted_unique(x);
    require(num_knots + 2 <= u.size(), ErrorCode::InsufficientData,
            "quantile_knots: " + std::to_string(num_knots) + " knots need at least " +
                std::to_string(num_knots + 2) + " unique values, have " + std::to_string(u.size()));
    Vector knots(num_knots);
    const double top = static_cast<double>(u.size() - 1);
    for (std::size_t j = 0; j < num_knots; ++j) {
        const double prob = static_cast<double>(j + 1) / static_cast<double>(num_knots + 1);
        const double h = top * prob;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, u.size() - 1);
        knots[j] = u[lo] + (h - static_cast<double>(lo)) * (u[hi] - u[lo]);
        if (j > 0)
            require(knots[j] > knots[j - 1], ErrorCode::DegenerateKnots, "quantile_knots: tied knots");
    }
    return knots;
}

enum class KnotRule { SmoothSpline, RWC };

/// Default number of interior knots.
///
/// SmoothSpline: K = n for n < 50, then log K linear in log n through the
/// anchors (50, 50), (200, 100), (800, 140), (3200, 200), and
/// K = 200 + (n − 3200)^{1/5} beyond 3200. RWC: K = min(⌊n_U/4⌋, 35).
inline std::size_t default_num_knots(std::size_t n, std::size_t n_unique, KnotRule rule) {
    require(n >= 1, ErrorCode::InvalidInput, "default_num_knots: n must be at least 1");
    if (rule == KnotRule::RWC) {
        require(n_unique >= 1, ErrorCode::InvalidInput, "default_num_knots: n_unique must be at least 1");
        return std::min<std::size_t>(n_unique / 4, 35);
    }
    if (n < 50) return n;
    const double nd = static_cast<double>(n);
    if (n > 3200) return static_cast<std::size_t>(std::lround(200.0 + std::pow(nd - 3200.0, 0.2)));
    constexpr double anchor_n[] = {50.0, 200.0, 800.0, 3200.0};
    constexpr double anchor_k[] = {50.0, 100.0, 140.0, 200.0};
    std::size_t seg = 0;
    while (seg < 2 && nd > anchor_n[seg + 1]) ++seg;
    const double t = (std::log(nd) - std::log(anchor_n[seg])) /
                     (std::log(anchor_n[seg + 1]) - std::log(anchor_n[seg]));
    const double logk = std::log(anchor_k[seg]) + t * (std::log(anchor_k[seg + 1]) - std::log(anchor_k[seg]));
    return static_cast<std::size_t>(std::lround(std::exp(logk)));
}

/// Spline basis: a knot sequence and its K + 2m functions.
struct BasisSpec {
    KnotSequence knots;

    explicit BasisSpec(KnotSequence k) : knots(std::move(k)) {}

    [[nodiscard]] std::size_t num_basis() const noexcept { return knots.num_basis(); }
    [[nodiscard]] int order() const noexcept { return knots.order(); }
    [[nodiscard]] int degree() const noexcept { return knots.degree(); }
    [[nodiscard]] double lower() const noexcept { return knots.lower(); }
    [[nodiscard]] double upper() const noexcept { return knots.upper(); }
};

/// Basis evaluations; row i holds the values at eval_points[i].
struct DesignMatrix {
    Matrix values;
    Vector eval_points;
    int deriv = 0;
    /// First column of the degree+1 wide nonzero window of each row.
    std::vector<std::size_t> offsets;
    std::size_t width = 0;

    [[nodiscard]] std::size_t rows() const noexcept { return values.rows(); }
    [[nodiscard]] std::size_t cols() const noexcept { return values.cols(); }

    /// B·c using the local support of each row.
    [[nodiscard]] Vector multiply(std::span<const double> coef) const {
        Vector out(rows(), 0.0);
        for (std::size_t i = 0; i < rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = offsets[i]; j < offsets[i] + width; ++j) s += values(i, j) * coef[j];
            out[i] = s;
        }
        return out;
    }
};

namespace detail {

inline double falling_factorial(int p, int k) {
    double r = 1.0;
    for (int j = 0; j < k; ++j) r *= static_cast<double>(p - j);
    return r;
}

}  // namespace detail

/// deriv-th derivatives of the degree+1 B-splines that are nonzero on span
/// [t_span, t_{span+1}), evaluated at x using that span's polynomial piece.
/// Entry r belongs to basis function span − degree + r.
inline Vector eval_local(const KnotSequence& knots, std::size_t span, double x, int deriv) {
    const int p = knots.degree();
    const Vector& t = knots.full();
    const auto P = static_cast<std::size_t>(p);
    Vector out(P + 1, 0.0);
    if (deriv > p) return out;

    Matrix ndu(P + 1, P + 1);
    Vector left(P + 1), right(P + 1);
    ndu(0, 0) = 1.0;
    for (std::size_t j = 1; j <= P; ++j) {
        left[j] = x - t[span + 1 - j];
        right[j] = t[span + j] - x;
        double saved = 0.0;
        for (std::size_t r = 0; r < j; ++r) {
            ndu(j, r) = right[r + 1] + left[j - r];
            const double temp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu(j, j) = saved;
    }
    if (deriv == 0) {
        for (std::size_t r = 0; r <= P; ++r) out[r] = ndu(r, P);
        return out;
    }

    Matrix a(2, P + 1);
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a(0, 0) = 1.0;
        double d = 0.0;
        for (int k = 1; k <= deriv; ++k) {
            d = 0.0;
            const int rk = r - k, pk = p - k;
            if (r >= k) {
                a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
                d = a(s2, 0) * ndu(rk, pk);
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
                d += a(s2, j) * ndu(rk + j, pk);
            }
            if (r <= pk) {
                a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
                d += a(s2, k) * ndu(r, pk);
            }
            std::swap(s1, s2);
        }
        out[static_cast<std::size_t>(r)] = d * detail::falling_factorial(p, deriv);
    }
    return out;
}

/// Design matrix of deriv-th derivatives at the given points. Points outside
/// [a, b] raise OutsideSupport unless `extrapolate` is set, in which case the
/// nearest boundary piece is extended.
inline DesignMatrix eval_basis(const BasisSpec& spec, std::span<const double> points, int deriv,
                               bool extrapolate = false) {
    const KnotSequence& knots = spec.knots;
    require(deriv >= 0 && deriv <= knots.degree(), ErrorCode::InvalidDerivative,
            "eval_basis: derivative order " + std::to_string(deriv) + " exceeds degree " +
                std::to_string(knots.degree()));
    const auto width = static_cast<std::size_t>(knots.degree()) + 1;
    DesignMatrix dm{Matrix(points.size(), spec.num_basis()), Vector(points.begin(), points.end()), deriv,
                    std::vector<std::size_t>(points.size()), width};
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double x = points[i];
        require(std::isfinite(x), ErrorCode::InvalidInput, "eval_basis: non-finite point");
        if (!extrapolate && !knots.contains(x))
            throw Error(ErrorCode::OutsideSupport, "eval_basis: point " + std::to_string(x) + " outside [a, b]");
        const std::size_t span = knots.find_span(x);
        const Vector local = eval_local(knots, span, x, deriv);
        const std::size_t first = span - width + 1;
        dm.offsets[i] = first;
        for (std::size_t r = 0; r < width; ++r) dm.values(i, first + r) = local[r];
    }
    return dm;
}

}  // namespace osul
