#pragma once

/**
 * @file fit.hpp
 * @brief Penalized least-squares spline fits: ν̂ = (BᵀB + λΩ)⁻¹Bᵀy.
 *
 * λ is always on the standardized scale: the penalty used in the solve is
 * the one the basis would have after mapping [a, b] onto [0, 1]
 * (PenaltyMatrix::standardized()). Difference penalties are scale-free.
 *
 * All matrices involved are banded, so a fit costs O(n·w² + p·w²) for p
 * basis functions and bandwidth w. Effective degrees of freedom use the trace
 * identity tr(B(BᵀB + λΩ)⁻¹Bᵀ) = tr((BᵀB + λΩ)⁻¹BᵀB), which only needs the
 * band of the inverse.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "osul/error.hpp"
#include "osul/linalg.hpp"
#include "osul/matrix.hpp"
#include "osul/optimize.hpp"
#include "osul/penalty.hpp"
#include "osul/splinebasis.hpp"

namespace osul {

struct FitResult {
    Vector coefficients;
    double lambda = 0.0;
    double edf = 0.0;
    Vector fitted;
    double rss = 0.0;
    BasisSpec basis;
    PenaltyKind penalty_kind = PenaltyKind::OSullivan;
    int penalty_order = 2;

    [[nodiscard]] std::size_t n() const noexcept { return fitted.size(); }
    /// n·RSS/(n − edf)²; infinite when edf ≥ n. RSS is floored at
    /// 1e-20·‖ŷ‖², the rounding level of an exact fit, so exact fits at
    /// different λ compare by edf alone.
    [[nodiscard]] double gcv() const noexcept {
        const double nn = static_cast<double>(n());
        double scale = rss;
        for (double v : fitted) scale += v * v;
        const double r = std::max(rss, 1e-20 * scale);
        return nn > edf ? nn * r / ((nn - edf) * (nn - edf)) : std::numeric_limits<double>::infinity();
    }
};

/// Data, basis and penalty prepared once for repeated solves at different λ.
///
/// Each solve is a banded Givens QR of the stacked least-squares problem
/// ‖[B; √λ·R_Ω]ν − [y; 0]‖ with Ω = R_Ωᵀ R_Ω, which avoids squaring the
/// condition number when λ is very large or very small. The data rows are
/// reduced once to a p-row triangle, so a solve costs O(p·w²) independent of n.
class PenalizedProblem {
public:
    PenalizedProblem(std::span<const double> x, std::span<const double> y, BasisSpec spec,
                     const PenaltyMatrix& penalty)
        : spec_(std::move(spec)), y_(y.begin(), y.end()), kind_(penalty.kind), order_(penalty.order) {
        require(x.size() == y.size(), ErrorCode::InvalidInput, "fit: x and y lengths differ");
        require(!x.empty(), ErrorCode::InvalidInput, "fit: no data");
        require(penalty.size() == spec_.num_basis(), ErrorCode::InvalidInput,
                "fit: penalty size does not match the basis");
        require(penalty.root.cols() == spec_.num_basis(), ErrorCode::InvalidInput,
                "fit: penalty carries no square-root factor");
        for (std::size_t i = 0; i < y.size(); ++i)
            require(std::isfinite(x[i]) && std::isfinite(y[i]), ErrorCode::InvalidInput,
                    "fit: non-finite value at row " + std::to_string(i));
        if (sorted_unique(x).size() < static_cast<std::size_t>(penalty.null_space_dim()))
            throw Error(ErrorCode::SingularFit, "fit: too few distinct x values to determine the unpenalized part");

        design_ = eval_basis(spec_, x, 0);
        const std::size_t p = spec_.num_basis();
        bandwidth_ = std::max(design_.width - 1, penalty.bandwidth);

        btb_ = BandMatrix(p, bandwidth_);
        BandedQR data(p, bandwidth_);
        for (std::size_t i = 0; i < design_.rows(); ++i) {
            const std::size_t off = design_.offsets[i];
            const std::span<const double> vals(&design_.values(i, off), design_.width);
            data.add_row(off, vals, y_[i]);
            for (std::size_t r = 0; r < design_.width; ++r) {
                data_scale_ += vals[r] * vals[r];
                for (std::size_t c = 0; c <= r; ++c) btb_.at(off + r, off + c) += vals[r] * vals[c];
            }
        }
        for (std::size_t i = 0; i < p; ++i) {
            Row row{i, {}, data.qt_rhs()[i]};
            for (std::size_t k = 0; k <= bandwidth_ && i + k < p; ++k) row.values.push_back(data.r(i, i + k));
            data_rows_.push_back(std::move(row));
        }

        const double root_scale = std::sqrt(penalty.standardizing_factor);
        for (std::size_t i = 0; i < penalty.root.rows(); ++i) {
            const auto r = penalty.root.row(i);
            std::size_t first = p, last = 0;
            for (std::size_t j = 0; j < p; ++j) {
                if (r[j] == 0.0) continue;
                first = std::min(first, j);
                last = j;
            }
            if (first == p) continue;
            require(last - first <= bandwidth_, ErrorCode::InvalidInput, "fit: penalty root row wider than the band");
            Row row{first, {}, 0.0};
            for (std::size_t j = first; j <= last; ++j) {
                row.values.push_back(root_scale * r[j]);
                penalty_scale_ += row.values.back() * row.values.back();
            }
            penalty_rows_.push_back(std::move(row));
        }
        omega_ = BandMatrix::from_dense(penalty.standardized(), bandwidth_);
    }

    [[nodiscard]] const BasisSpec& basis() const noexcept { return spec_; }
    [[nodiscard]] const DesignMatrix& design() const noexcept { return design_; }
    [[nodiscard]] const BandMatrix& gram() const noexcept { return btb_; }
    [[nodiscard]] const BandMatrix& penalty() const noexcept { return omega_; }
    [[nodiscard]] const Vector& response() const noexcept { return y_; }
    [[nodiscard]] std::size_t bandwidth() const noexcept { return bandwidth_; }
    [[nodiscard]] int null_space_dim() const noexcept { return order_; }

    /// BᵀB + λΩ as a band matrix.
    [[nodiscard]] BandMatrix system(double lambda) const {
        BandMatrix a = btb_;
        a.add_scaled(omega_, lambda);
        return a;
    }

    [[nodiscard]] FitResult fit(double lambda) const { return fit_with_log_det(lambda).first; }

    /// The fit together with log det(BᵀB + λΩ).
    [[nodiscard]] std::pair<FitResult, double> fit_with_log_det(double lambda) const {
        const BandedQR qr = factor(lambda);
        const BandedCholesky chol = cholesky(qr);
        FitResult res{solve(qr), lambda, trace_term(chol), {}, 0.0, spec_, kind_, order_};
        res.fitted = design_.multiply(res.coefficients);
        for (std::size_t i = 0; i < y_.size(); ++i) res.rss += (y_[i] - res.fitted[i]) * (y_[i] - res.fitted[i]);
        return {std::move(res), chol.log_det()};
    }

    /// νᵀΩν on the standardized scale.
    [[nodiscard]] double roughness(std::span<const double> coef) const { return dot(coef, omega_.multiply(coef)); }

    /// tr((BᵀB + λΩ)⁻¹BᵀB)
    [[nodiscard]] double edf(double lambda) const { return trace_term(cholesky(factor(lambda))); }

private:
    struct Row {
        std::size_t offset;
        Vector values;
        double rhs;
    };

    [[nodiscard]] BandedQR factor(double lambda) const {
        require(std::isfinite(lambda) && lambda > 0.0, ErrorCode::InvalidLambda,
                "fit: smoothing parameter must be positive and finite");
        BandedQR qr(spec_.num_basis(), bandwidth_);
        const double s = std::sqrt(lambda);
        auto add_penalty = [&] {
            Vector scaled;
            for (const Row& r : penalty_rows_) {
                scaled.assign(r.values.begin(), r.values.end());
                for (double& v : scaled) v *= s;
                qr.add_row(r.offset, scaled, 0.0);
            }
        };
        auto add_data = [&] {
            for (const Row& r : data_rows_) qr.add_row(r.offset, r.values, r.rhs);
        };
        // heavier block first keeps the rotations well scaled
        if (lambda * penalty_scale_ >= data_scale_) {
            add_penalty();
            add_data();
        } else {
            add_data();
            add_penalty();
        }
        return qr;
    }

    static Vector solve(const BandedQR& qr) {
        try {
            return qr.solve();
        } catch (const Error& e) {
            throw Error(ErrorCode::SingularFit, std::string("fit: penalized least-squares problem is singular (") +
                                                    e.what() + ")");
        }
    }

    static BandedCholesky cholesky(const BandedQR& qr) {
        try {
            return qr.cholesky();
        } catch (const Error& e) {
            throw Error(ErrorCode::SingularFit, std::string("fit: penalized least-squares problem is singular (") +
                                                    e.what() + ")");
        }
    }

    [[nodiscard]] double trace_term(const BandedCholesky& chol) const {
        const BandMatrix inv = chol.inverse_band();
        const std::size_t p = btb_.size(), w = btb_.bandwidth();
        double tr = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
            tr += inv.at(i, i) * btb_.at(i, i);
            for (std::size_t j = (i > w ? i - w : 0); j < i; ++j) tr += 2.0 * inv.at(i, j) * btb_.at(i, j);
        }
        return tr;
    }

    BasisSpec spec_;
    Vector y_;
    PenaltyKind kind_;
    int order_;
    DesignMatrix design_;
    std::size_t bandwidth_ = 0;
    BandMatrix btb_;
    BandMatrix omega_;
    std::vector<Row> data_rows_;
    std::vector<Row> penalty_rows_;
    double data_scale_ = 0.0;
    double penalty_scale_ = 0.0;
};

inline FitResult fit_penalized(std::span<const double> x, std::span<const double> y, const BasisSpec& spec,
                               const PenaltyMatrix& penalty, double lambda) {
    return PenalizedProblem(x, y, spec, penalty).fit(lambda);
}

/// deriv-th derivative of the fitted spline; outside [a, b] the boundary
/// polynomial pieces are extended.
inline Vector predict(const FitResult& fit, std::span<const double> points, int deriv = 0) {
    return eval_basis(fit.basis, points, deriv, /*extrapolate=*/true).multiply(fit.coefficients);
}

struct Selection {
    double lambda = 0.0;
    FitResult fit;
};

/// λ = exp(t) for t equally spaced on [log_lo, log_hi] (natural log).
inline Vector log_lambda_grid(double log_lo, double log_hi, std::size_t count) {
    require(count >= 1, ErrorCode::InvalidInput, "log_lambda_grid: empty grid");
    Vector g(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = count == 1 ? log_lo
                                    : log_lo + (log_hi - log_lo) * static_cast<double>(i) / static_cast<double>(count - 1);
        g[i] = std::exp(t);
    }
    return g;
}

inline Vector default_gcv_grid() { return log_lambda_grid(-25.0, 15.0, 81); }

inline double gcv_score(const PenalizedProblem& problem, double lambda) {
    try {
        return problem.fit(lambda).gcv();
    } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
    }
}

/// GCV over a λ grid, then golden-section refinement on log λ inside the
/// cells adjacent to the best grid point (tolerance 1e-3). Ties go to the
/// larger λ.
inline Selection gcv_select(const PenalizedProblem& problem, std::span<const double> grid) {
    require(!grid.empty(), ErrorCode::InvalidInput, "gcv_select: empty grid");
    Vector sorted(grid.begin(), grid.end());
    std::sort(sorted.begin(), sorted.end());
    Vector scores(sorted.size());
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        scores[i] = gcv_score(problem, sorted[i]);
        if (!std::isfinite(scores[i])) continue;
        if (!best || scores[i] <= scores[*best]) best = i;
    }
    if (!best) throw Error(ErrorCode::SelectionFailure, "gcv_select: no grid point gives a valid GCV score");
    const std::size_t i = *best;
    if (sorted.size() == 1) return {sorted[0], problem.fit(sorted[0])};

    const double lo = std::log(sorted[i > 0 ? i - 1 : 0]);
    const double hi = std::log(sorted[std::min(i + 1, sorted.size() - 1)]);
    const auto refined = golden_section_minimize([&](double t) { return gcv_score(problem, std::exp(t)); }, lo, hi, 1e-3);
    const double lambda = refined.value < scores[i] ? std::exp(refined.x) : sorted[i];
    return {lambda, problem.fit(lambda)};
}

inline Selection gcv_select(std::span<const double> x, std::span<const double> y, const BasisSpec& spec,
                            const PenaltyMatrix& penalty, std::span<const double> grid) {
    return gcv_select(PenalizedProblem(x, y, spec, penalty), grid);
}

/// Bracket endpoints closer than this to the target count as a match.
inline constexpr double edf_match_tolerance = 1e-4;

/// λ with edf(λ) within `tol` of the target, by bisection on log λ ∈ [−20, 20].
/// An endpoint of the bracket within edf_match_tolerance of the target is
/// returned directly; BracketFailure means the target lies outside the edf
/// range the bracket can reach.
inline Selection match_edf(const PenalizedProblem& problem, double target, double tol = 1e-6) {
    const double p = static_cast<double>(problem.basis().num_basis());
    const double lower = static_cast<double>(problem.null_space_dim());
    if (!(target > lower && target < p))
        throw Error(ErrorCode::InfeasibleTarget, "match_edf: target edf " + std::to_string(target) +
                                                     " outside (" + std::to_string(lower) + ", " +
                                                     std::to_string(p) + ")");
    double lo = -20.0, hi = 20.0;
    const double edf_lo = problem.edf(std::exp(lo));
    const double edf_hi = problem.edf(std::exp(hi));
    const double accept = std::max(tol, edf_match_tolerance);
    if (std::abs(edf_hi - target) <= accept) return {std::exp(hi), problem.fit(std::exp(hi))};
    if (std::abs(edf_lo - target) <= accept) return {std::exp(lo), problem.fit(std::exp(lo))};
    if (!(edf_lo >= target && edf_hi <= target))
        throw Error(ErrorCode::BracketFailure, "match_edf: target edf " + std::to_string(target) +
                                                   " outside the range [" + std::to_string(edf_hi) + ", " +
                                                   std::to_string(edf_lo) + "] reached for log lambda in [-20, 20]");
    double mid = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        mid = 0.5 * (lo + hi);
        const double e = problem.edf(std::exp(mid));
        if (std::abs(e - target) <= tol) break;
        if (e > target)
            lo = mid;
        else
            hi = mid;
    }
    return {std::exp(mid), problem.fit(std::exp(mid))};
}

inline Selection match_edf(std::span<const double> x, std::span<const double> y, const BasisSpec& spec,
                           const PenaltyMatrix& penalty, double target, double tol = 1e-6) {
    return match_edf(PenalizedProblem(x, y, spec, penalty), target, tol);
}

}  // namespace osul
