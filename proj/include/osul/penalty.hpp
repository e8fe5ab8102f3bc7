#pragma once

/**
 * @file penalty.hpp
 * @brief Roughness penalty matrices for penalized B-spline smoothers.
 *
 * The O'Sullivan penalty Ω^(m) has entries ∫_a^b B_k^(m)(x) B_k'^(m)(x) dx.
 * On each knot span the integrand is a polynomial of degree 2(m − 1), so a
 * closed (2m − 1)-point Newton–Cotes rule on every span of positive width
 * integrates it exactly:
 *
 *     Ω^(m) = B̃ᵀ diag(w) B̃,   x̃ = κ_ℓ + j·h_ℓ,   w = h_ℓ·ω_{m,j},
 *
 * with h_ℓ = (κ_{ℓ+1} − κ_ℓ)/(2m − 2) for m ≥ 2 and h_ℓ = κ_{ℓ+1} − κ_ℓ,
 * a single node at κ_ℓ, for m = 1. For cubic splines (m = 2) this is
 * Simpson's rule on each span.
 *
 * Nodes on a shared knot appear once per adjacent span; each node is
 * evaluated with the polynomial piece of the span being integrated, which
 * sidesteps the one-sided limit question at knots entirely.
 */

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "osul/error.hpp"
#include "osul/matrix.hpp"
#include "osul/splinebasis.hpp"

namespace osul {

/// Weights ω_{m,k}, k = 0..2m−2, of the closed Newton–Cotes rule on [0, 2m−2].
struct NewtonCotesWeights {
    int m = 0;
    Vector omega;
};

/// Tabulated weights for 1 ≤ m ≤ 4. Larger m is refused: the weights would
/// need exact rational computation.
inline NewtonCotesWeights newton_cotes_weights(int m) {
    switch (m) {
        case 1: return {1, {1.0}};
        case 2: return {2, {1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0}};
        case 3: return {3, {14.0 / 45.0, 64.0 / 45.0, 8.0 / 15.0, 64.0 / 45.0, 14.0 / 45.0}};
        case 4:
            return {4, {41.0 / 140.0, 54.0 / 35.0, 27.0 / 140.0, 68.0 / 35.0, 27.0 / 140.0, 54.0 / 35.0,
                        41.0 / 140.0}};
        default:
            throw Error(ErrorCode::UnsupportedOrder,
                        "newton_cotes_weights: order m = " + std::to_string(m) + " not supported (1..4)");
    }
}

enum class PenaltyKind { OSullivan, PSplineDiff };

struct PenaltyMatrix {
    Matrix values;
    PenaltyKind kind = PenaltyKind::OSullivan;
    /// m for OSullivan, the difference order k for PSplineDiff.
    int order = 2;
    /// Quadrature nodes and weights (OSullivan only), span by span.
    Vector nodes;
    Vector weights;
    /// Factor with values = rootᵀ·root: √w-weighted derivative rows for
    /// OSullivan, D_k for differences. Each row is banded.
    Matrix root;
    /// Number of nonzero sub-diagonals.
    std::size_t bandwidth = 0;
    /// Multiplier mapping `values` to the penalty of the basis on [a, b]
    /// rescaled to [0, 1]: (b − a)^{2m−1} for OSullivan, 1 for differences.
    double standardizing_factor = 1.0;

    [[nodiscard]] std::size_t size() const noexcept { return values.rows(); }

    [[nodiscard]] Matrix standardized() const { return values * standardizing_factor; }

    /// Lowest polynomial degree not annihilated by the penalty (m or k).
    [[nodiscard]] int null_space_dim() const noexcept { return order; }
};

namespace detail {

inline PenaltyMatrix empty_osullivan(const KnotSequence& knots) {
    PenaltyMatrix pen;
    pen.values = Matrix(knots.num_basis(), knots.num_basis());
    pen.kind = PenaltyKind::OSullivan;
    pen.order = knots.order();
    pen.bandwidth = static_cast<std::size_t>(knots.degree());
    pen.standardizing_factor = std::pow(knots.upper() - knots.lower(), 2 * knots.order() - 1);
    return pen;
}

}  // namespace detail

/// Exact Ω^(m) for any 1 ≤ m ≤ 4, accumulated span by span.
inline PenaltyMatrix osullivan_penalty(const KnotSequence& knots) {
    const int m = knots.order();
    const NewtonCotesWeights nc = newton_cotes_weights(m);
    PenaltyMatrix pen = detail::empty_osullivan(knots);
    const Vector& t = knots.full();
    const auto width = static_cast<std::size_t>(knots.degree()) + 1;
    const std::size_t num_nodes = nc.omega.size();
    std::size_t num_spans = 0;
    for (std::size_t span = knots.first_span(); span <= knots.last_span(); ++span)
        if (t[span + 1] > t[span]) ++num_spans;
    pen.root = Matrix(num_spans * num_nodes, knots.num_basis());
    std::size_t row = 0;

    for (std::size_t span = knots.first_span(); span <= knots.last_span(); ++span) {
        const double lo = t[span], hi = t[span + 1];
        if (!(hi > lo)) continue;
        const double h = m == 1 ? hi - lo : (hi - lo) / static_cast<double>(2 * m - 2);
        const std::size_t first = span + 1 - width;
        for (std::size_t j = 0; j < num_nodes; ++j) {
            const double x = j + 1 == num_nodes && m > 1 ? hi : lo + static_cast<double>(j) * h;
            const double w = h * nc.omega[j];
            pen.nodes.push_back(x);
            pen.weights.push_back(w);
            const Vector d = eval_local(knots, span, x, m);
            const double sw = std::sqrt(w);
            for (std::size_t r = 0; r < width; ++r) {
                pen.root(row, first + r) = sw * d[r];
                const double wr = w * d[r];
                for (std::size_t c = 0; c < width; ++c) pen.values(first + r, first + c) += wr * d[c];
            }
            ++row;
        }
    }
    return pen;
}

/// Cubic Ω via Simpson's rule: stack second-derivative rows at (κ, midpoint, κ')
/// of every span and form B̃''ᵀ diag(w) B̃'' with w = Δκ·(1, 4, 1)/6.
inline PenaltyMatrix osullivan_penalty_cubic(const KnotSequence& knots) {
    require(knots.order() == 2, ErrorCode::InvalidOrder, "osullivan_penalty_cubic: requires m = 2");
    PenaltyMatrix pen = detail::empty_osullivan(knots);
    const Vector& t = knots.full();
    const std::size_t p = knots.num_basis();

    std::vector<std::size_t> spans;
    for (std::size_t span = knots.first_span(); span <= knots.last_span(); ++span)
        if (t[span + 1] > t[span]) spans.push_back(span);

    Matrix bdd(3 * spans.size(), p);
    Vector w(3 * spans.size());
    constexpr std::array<double, 3> simpson{1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0};
    for (std::size_t s = 0; s < spans.size(); ++s) {
        const std::size_t span = spans[s];
        const double lo = t[span], hi = t[span + 1];
        const std::array<double, 3> xs{lo, 0.5 * (lo + hi), hi};
        for (std::size_t j = 0; j < 3; ++j) {
            const std::size_t row = 3 * s + j;
            const Vector d = eval_local(knots, span, xs[j], 2);
            for (std::size_t r = 0; r < 4; ++r) bdd(row, span - 3 + r) = d[r];
            w[row] = (hi - lo) * simpson[j];
            pen.nodes.push_back(xs[j]);
            pen.weights.push_back(w[row]);
        }
    }
    Matrix weighted = bdd;
    for (std::size_t i = 0; i < weighted.rows(); ++i)
        for (double& v : weighted.row(i)) v *= w[i];
    pen.values = bdd.transpose() * weighted;
    pen.root = std::move(bdd);
    for (std::size_t i = 0; i < pen.root.rows(); ++i)
        for (double& v : pen.root.row(i)) v *= std::sqrt(w[i]);
    return pen;
}

/// D_kᵀD_k with D_k the k-th order forward-difference matrix.
inline PenaltyMatrix pspline_penalty(std::size_t num_basis, int k) {
    require(k >= 1, ErrorCode::InvalidOrder, "pspline_penalty: difference order must be at least 1");
    require(static_cast<std::size_t>(k) < num_basis, ErrorCode::InvalidOrder,
            "pspline_penalty: difference order must be below the number of basis functions");
    // Row of D_k: binomial coefficients with alternating sign.
    Vector stencil{1.0};
    for (int j = 0; j < k; ++j) {
        Vector next(stencil.size() + 1, 0.0);
        for (std::size_t i = 0; i < stencil.size(); ++i) {
            next[i] -= stencil[i];
            next[i + 1] += stencil[i];
        }
        stencil = std::move(next);
    }
    const std::size_t rows = num_basis - static_cast<std::size_t>(k);
    Matrix d(rows, num_basis);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < stencil.size(); ++i) d(r, r + i) = stencil[i];

    PenaltyMatrix pen;
    pen.values = crossprod(d);
    pen.root = std::move(d);
    pen.kind = PenaltyKind::PSplineDiff;
    pen.order = k;
    pen.bandwidth = static_cast<std::size_t>(k);
    pen.standardizing_factor = 1.0;
    return pen;
}

/// Equally spaced knots with spacing (b − a)/(K + 1) continued beyond the
/// boundary instead of repeated (Eilers & Marx): 2m − 1 extra knots per side.
inline KnotSequence eilers_marx_knots(double a, double b, std::size_t num_interior, int m = 2) {
    require(num_interior >= 1, ErrorCode::InvalidInput, "eilers_marx_knots: need at least one interior knot");
    return make_extended_knots(a, b, num_interior, m);
}

/// Entries row[center − half .. center + half] of a penalty, optionally
/// rescaled so that the central entry equals `center_value`.
inline Vector band_row(const Matrix& values, std::size_t center, std::size_t half, double center_value = 0.0) {
    require(center >= half && center + half < values.rows(), ErrorCode::InvalidInput,
            "band_row: band does not fit inside the matrix");
    Vector out(2 * half + 1);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = values(center, center - half + j);
    if (center_value != 0.0) {
        const double s = center_value / values(center, center);
        for (double& v : out) v *= s;
    }
    return out;
}

}  // namespace osul
