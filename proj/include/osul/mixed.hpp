#pragma once

/**
 * @file mixed.hpp
 * @brief Mixed-model form of O'Sullivan penalized splines.
 *
 * With the spectral decomposition Ω = U diag(d) Uᵀ split into the null part
 * U_X and the positive part (U_Z, d_Z), the transform
 * L = [U_X | U_Z diag(d_Z^{-1/2})] puts the penalty in canonical form
 * LᵀΩL = blockdiag(0, I). Writing ν = L[β; u] turns the penalized fit into
 *
 *     y = Xβ + Zu + ε,   u ~ N(0, σ_u² I),   ε ~ N(0, σ_ε² I),
 *
 * with X = B U_X (or simply [1 x] for cubic splines) and Z = B U_Z diag(d_Z^{-1/2}).
 * The BLUP at λ = σ_ε²/σ_u² equals the penalized least-squares fit, and λ
 * is on the same standardized scale as in fit.hpp.
 *
 * Variance components are chosen by REML with σ_ε² profiled out:
 *
 *     −2ℓ_R = (n − p_X)·log(yᵀPy/(n − p_X)) + log|CᵀC + D| − Σ_j q_j·log λ_j + const,
 *
 * C = [X | Z_1 | Z_2 ...], D = blockdiag(0, λ_1 I_{q_1}, ...), and
 * yᵀPy = yᵀy − yᵀC(CᵀC + D)⁻¹Cᵀy.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "osul/error.hpp"
#include "osul/fit.hpp"
#include "osul/linalg.hpp"
#include "osul/matrix.hpp"
#include "osul/optimize.hpp"
#include "osul/penalty.hpp"
#include "osul/splinebasis.hpp"

namespace osul {

struct DRTransform {
    Matrix ux;  ///< p × m, null space of Ω
    Matrix uz;  ///< p × (p − m)
    Vector dz;  ///< positive eigenvalues, descending
    Matrix l;   ///< [U_X | U_Z diag(d_Z^{-1/2})]
    /// Sum of squares of LᵀΩL; equals p − m for an accurate decomposition.
    double canonical_sum_of_squares = 0.0;
    bool stable = true;

    [[nodiscard]] std::size_t null_dim() const noexcept { return ux.cols(); }
    [[nodiscard]] std::size_t random_dim() const noexcept { return uz.cols(); }
    /// U_Z diag(d_Z^{-1/2}): maps u to spline coefficients.
    [[nodiscard]] Matrix random_to_coef() const {
        Matrix out(l.rows(), random_dim());
        for (std::size_t i = 0; i < l.rows(); ++i)
            for (std::size_t j = 0; j < random_dim(); ++j) out(i, j) = l(i, null_dim() + j);
        return out;
    }
};

/// Demmler–Reinsch transform of the standardized penalty.
///
/// The eigenpairs come from the penalty's square-root factor (reduced to a
/// p × p triangle by banded QR), which keeps the small positive eigenvalues
/// accurate for higher orders and many knots.
inline DRTransform demmler_reinsch(const PenaltyMatrix& penalty) {
    const Matrix omega = penalty.standardized();
    const std::size_t p = omega.rows();
    const bool factored = penalty.root.cols() == p;
    const Matrix root = factored ? penalty.root * std::sqrt(penalty.standardizing_factor) : Matrix();
    const SymEigen eig = factored ? gram_eigen(root) : sym_eigen(omega);
    // relative cutoff on singular values of the factor, on eigenvalues otherwise
    const double tol = (factored ? 1e-20 : 1e-10) * eig.values.front();
    std::size_t positive = 0;
    while (positive < p && eig.values[positive] > tol) ++positive;
    const std::size_t zeros = p - positive;
    if (zeros != static_cast<std::size_t>(penalty.null_space_dim()))
        throw Error(ErrorCode::RankMismatch, "demmler_reinsch: found " + std::to_string(zeros) +
                                                 " zero eigenvalues, expected " +
                                                 std::to_string(penalty.null_space_dim()));
    DRTransform dr;
    dr.ux = Matrix(p, zeros);
    dr.uz = Matrix(p, positive);
    dr.dz.assign(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(positive));
    dr.l = Matrix(p, p);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < zeros; ++j) {
            dr.ux(i, j) = eig.vectors(i, positive + j);
            dr.l(i, j) = dr.ux(i, j);
        }
        for (std::size_t j = 0; j < positive; ++j) {
            dr.uz(i, j) = eig.vectors(i, j);
            dr.l(i, zeros + j) = dr.uz(i, j) / std::sqrt(dr.dz[j]);
        }
    }
    const Matrix canon = factored ? crossprod(root * dr.l) : dr.l.transpose() * (omega * dr.l);
    for (double v : canon.data()) dr.canonical_sum_of_squares += v * v;
    const double expect = static_cast<double>(positive);
    dr.stable = std::abs(dr.canonical_sum_of_squares - expect) <= 1e-4 * expect;
    return dr;
}

enum class FixedBasis {
    /// [1 x] for cubic splines, B·U_X otherwise.
    Auto,
    /// B·U_X for any order.
    NullSpace,
};

struct MixedDesign {
    Matrix x;  ///< n × m fixed-effects design of the spline
    Matrix z;  ///< n × (p − m) random-effects design
    /// p × m matrix mapping the fixed spline effects to B-spline coefficients.
    Matrix fixed_to_coef;
    /// p × (p − m) matrix mapping u to B-spline coefficients.
    Matrix random_to_coef;
};

inline MixedDesign build_design(std::span<const double> x, const BasisSpec& spec, const DRTransform& dr,
                                FixedBasis fixed = FixedBasis::Auto) {
    require(dr.l.rows() == spec.num_basis(), ErrorCode::InvalidInput,
            "build_design: transform does not match the basis");
    const Matrix b = eval_basis(spec, x, 0).values;
    MixedDesign d;
    d.random_to_coef = dr.random_to_coef();
    d.z = b * d.random_to_coef;
    if (fixed == FixedBasis::Auto && spec.order() == 2) {
        // B·1 = 1 and B·greville = x
        const Vector g = spec.knots.greville();
        d.fixed_to_coef = Matrix(spec.num_basis(), 2);
        for (std::size_t k = 0; k < g.size(); ++k) {
            d.fixed_to_coef(k, 0) = 1.0;
            d.fixed_to_coef(k, 1) = g[k];
        }
        d.x = Matrix(x.size(), 2);
        for (std::size_t i = 0; i < x.size(); ++i) {
            d.x(i, 0) = 1.0;
            d.x(i, 1) = x[i];
        }
    } else {
        d.fixed_to_coef = dr.ux;
        d.x = b * dr.ux;
    }
    return d;
}

struct MixedModelFit {
    /// Spline fixed effects first, then any extra covariates.
    Vector beta;
    /// Approximate standard errors of beta, √(σ̂_ε²·[M⁻¹]_ββ).
    Vector beta_se;
    /// Spline random effects.
    Vector u;
    /// Subject intercepts (additive model only), in increasing id order.
    Vector subject_effects;
    std::vector<long> subject_ids;
    double sigma_u2 = 0.0;
    double sigma_eps2 = 0.0;
    /// Subject-intercept variance (additive model only, NaN otherwise).
    double sigma_subject2 = std::numeric_limits<double>::quiet_NaN();
    /// σ_ε²/σ_u², the equivalent smoothing parameter of the direct fit.
    double lambda = 0.0;
    double lambda_subject = std::numeric_limits<double>::quiet_NaN();
    /// Restricted log-likelihood at the optimum.
    double reml_value = 0.0;
    Vector fitted;
    /// The smooth component as a B-spline fit: spline intercept and slope
    /// included, covariates and subject effects excluded.
    FitResult curve;
    /// Optimum on the edge of the search box.
    bool boundary_warning = false;
    bool stable_transform = true;
    bool converged = true;
    int iterations = 0;
};

struct RemlOptions {
    double log_lambda_lo = -20.0;
    double log_lambda_hi = 20.0;
    double tolerance = 1e-4;
    /// Grid scanned before the golden-section search to pick the bracket.
    std::size_t scan_points = 41;
};

namespace detail {

inline double variance(std::span<const double> y) {
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double s = 0.0;
    for (double v : y) s += (v - mean) * (v - mean);
    return s / static_cast<double>(y.size());
}

inline void require_response(std::span<const double> y) {
    require(variance(y) > 0.0, ErrorCode::DegenerateResponse, "mixed model: response has zero variance");
}

constexpr double log_two_pi = 1.8378770664093453;

}  // namespace detail

/// REML for the penalized-spline smoother y = Xβ + Zu + ε, evaluated through
/// the banded direct-fit path.
class RemlSmoother {
public:
    RemlSmoother(std::span<const double> x, std::span<const double> y, const BasisSpec& spec,
                 const PenaltyMatrix& penalty)
        : problem_(x, checked(y), spec, penalty), dr_(demmler_reinsch(penalty)), x_(x.begin(), x.end()) {
        for (double v : y) yty_ += v * v;
        for (double d : dr_.dz) log_det_l_ -= 0.5 * std::log(d);
    }

    [[nodiscard]] const PenalizedProblem& problem() const noexcept { return problem_; }
    [[nodiscard]] const DRTransform& transform() const noexcept { return dr_; }

    /// −2·(restricted log-likelihood) at λ = σ_ε²/σ_u² with σ_ε² profiled,
    /// for the fixed design X = B·U_X.
    [[nodiscard]] double objective(double lambda) const { return evaluate(lambda).value; }

    [[nodiscard]] MixedModelFit fit(const RemlOptions& opt = {}) const {
        auto f = [&](double t) {
            try {
                return objective(std::exp(t));
            } catch (const Error&) {
                return std::numeric_limits<double>::infinity();
            }
        };
        const std::size_t count = std::max<std::size_t>(opt.scan_points, 3);
        std::size_t best = 0;
        Vector ts(count), vs(count);
        for (std::size_t i = 0; i < count; ++i) {
            ts[i] = opt.log_lambda_lo +
                    (opt.log_lambda_hi - opt.log_lambda_lo) * static_cast<double>(i) / static_cast<double>(count - 1);
            vs[i] = f(ts[i]);
            if (vs[i] <= vs[best]) best = i;
        }
        if (!std::isfinite(vs[best]))
            throw Error(ErrorCode::ConvergenceFailure, "fit_reml_smoother: REML criterion not finite anywhere");
        const double lo = ts[best > 0 ? best - 1 : 0], hi = ts[std::min(best + 1, count - 1)];
        const auto m = golden_section_minimize(f, lo, hi, opt.tolerance);
        const double t = m.value < vs[best] ? m.x : ts[best];
        const double edge = 10.0 * opt.tolerance;
        MixedModelFit out = assemble(std::exp(t));
        out.boundary_warning = t - opt.log_lambda_lo < edge || opt.log_lambda_hi - t < edge;
        return out;
    }

    /// BLUPs and variance components at a given λ.
    [[nodiscard]] MixedModelFit assemble(double lambda) const {
        const Eval e = evaluate(lambda);
        const FitResult& f = e.fit;
        const MixedDesign design = build_design(x_, problem_.basis(), dr_);
        const std::size_t p = f.coefficients.size(), m = dr_.null_dim(), q = dr_.random_dim();

        // ν = F β + U_Z D^{-1/2} u; u from the positive part, β from the null-space part
        Vector u(q, 0.0), nu_null(p, 0.0);
        for (std::size_t j = 0; j < q; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < p; ++k) s += dr_.uz(k, j) * f.coefficients[k];
            u[j] = std::sqrt(dr_.dz[j]) * s;
        }
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < p; ++k) s += dr_.ux(k, j) * f.coefficients[k];
            for (std::size_t k = 0; k < p; ++k) nu_null[k] += s * dr_.ux(k, j);
        }
        const Matrix& fc = design.fixed_to_coef;
        const Vector beta = solve_spd(crossprod(fc), crossprod(fc, nu_null));

        // Cov(β̂) = σ̂_ε² [M⁻¹]_ββ for M = CᵀC + blockdiag(0, λI)
        const Matrix c = hcat(design.x, design.z);
        Matrix mm = crossprod(c);
        for (std::size_t j = 0; j < q; ++j) mm(m + j, m + j) += lambda;
        const Matrix minv = Cholesky(mm).inverse();
        Vector se(m);
        for (std::size_t j = 0; j < m; ++j) se[j] = std::sqrt(e.sigma_eps2 * minv(j, j));

        MixedModelFit out{.beta = beta,
                          .beta_se = se,
                          .u = u,
                          .subject_effects = {},
                          .subject_ids = {},
                          .sigma_u2 = e.sigma_eps2 / lambda,
                          .sigma_eps2 = e.sigma_eps2,
                          .sigma_subject2 = std::numeric_limits<double>::quiet_NaN(),
                          .lambda = lambda,
                          .lambda_subject = std::numeric_limits<double>::quiet_NaN(),
                          .reml_value = -0.5 * e.value,
                          .fitted = f.fitted,
                          .curve = f,
                          .boundary_warning = false,
                          .stable_transform = dr_.stable,
                          .converged = true,
                          .iterations = 0};
        return out;
    }

private:
    static std::span<const double> checked(std::span<const double> y) {
        require(y.size() >= 5, ErrorCode::InsufficientData, "fit_reml_smoother: need at least 5 observations");
        detail::require_response(y);
        return y;
    }

    struct Eval {
        FitResult fit;
        double value;
        double sigma_eps2;
    };

    [[nodiscard]] Eval evaluate(double lambda) const {
        auto [f, log_det] = problem_.fit_with_log_det(lambda);
        const double n = static_cast<double>(f.n());
        const double m = static_cast<double>(dr_.null_dim());
        const double q = static_cast<double>(dr_.random_dim());
        const double ypy = f.rss + lambda * problem_.roughness(f.coefficients);
        require(ypy > 0.0 && n > m, ErrorCode::DegenerateResponse, "fit_reml_smoother: zero residual quadratic form");
        const double sigma2 = ypy / (n - m);
        // log|CᵀC + λD| = log|BᵀB + λΩ| + 2 log|det L|
        const double value = (n - m) * (std::log(sigma2) + 1.0 + detail::log_two_pi) + log_det + 2.0 * log_det_l_ -
                             q * std::log(lambda);
        return {std::move(f), value, sigma2};
    }

    PenalizedProblem problem_;
    DRTransform dr_;
    Vector x_;
    double yty_ = 0.0;
    double log_det_l_ = 0.0;
};

inline MixedModelFit fit_reml_smoother(std::span<const double> x, std::span<const double> y, const BasisSpec& spec,
                                       const RemlOptions& opt = {}) {
    return RemlSmoother(x, y, spec, osullivan_penalty(spec.knots)).fit(opt);
}

// ---------------------------------------------------------------------------
// Additive mixed model with subject-specific random intercepts

struct AdditiveOptions {
    double log_lambda_lo = -20.0;
    double log_lambda_hi = 20.0;
    double diameter_tol = 1e-5;
    int max_iter = 500;
    /// Start grid: this many values of each log λ across the box.
    std::size_t seed_grid = 9;
};

/// y = Xβ + Z_subj U + Z_s u + ε with X = [spline fixed part | covariates],
/// subject intercepts U_g ~ N(0, σ_U²), spline effects u ~ N(0, σ_u²).
///
/// The subject indicator matrix is never formed: its cross-products are
/// diagonal, so the subject block is eliminated by a Schur complement using
/// per-subject sums, at O(n·r + G·r²) cost for r fixed plus spline columns.
class AdditiveMixedModel {
public:
    AdditiveMixedModel(std::span<const double> y, std::span<const double> x_spline, const Matrix& covariates,
                       std::span<const long> group, const BasisSpec& spec)
        : n_(y.size()), spec_(spec), x_spline_(x_spline.begin(), x_spline.end()) {
        require(x_spline.size() == n_ && group.size() == n_, ErrorCode::InvalidInput,
                "fit_additive_mixed: inputs have different lengths");
        require(covariates.rows() == n_ || (covariates.rows() == 0 && covariates.cols() == 0), ErrorCode::InvalidInput,
                "fit_additive_mixed: covariate rows differ from the response length");
        for (std::size_t i = 0; i < n_; ++i)
            require(std::isfinite(y[i]) && std::isfinite(x_spline[i]), ErrorCode::InvalidInput,
                    "fit_additive_mixed: non-finite value at row " + std::to_string(i));
        if (n_ <= 1 + covariates.cols() + static_cast<std::size_t>(spec.order()))
            throw Error(ErrorCode::Unidentifiable, "fit_additive_mixed: not enough observations for the fixed effects");
        detail::require_response(y);

        const PenaltyMatrix pen = osullivan_penalty(spec.knots);
        dr_ = demmler_reinsch(pen);
        design_ = build_design(x_spline, spec, dr_);
        const std::size_t ms = design_.x.cols(), c = covariates.cols(), q = design_.z.cols();
        p_fixed_ = ms + c;
        q_ = q;
        r_ = p_fixed_ + q;

        std::map<long, std::size_t> index;
        for (long g : group) index.emplace(g, 0);
        std::size_t k = 0;
        for (auto& [id, pos] : index) {
            pos = k++;
            ids_.push_back(id);
        }
        groups_ = ids_.size();
        if (n_ <= p_fixed_ || (groups_ == 1 && n_ == 1))
            throw Error(ErrorCode::Unidentifiable, "fit_additive_mixed: not enough observations for the fixed effects");

        // F = [X_spline | covariates | Z_spline], built row by row
        f_ = Matrix(n_, r_);
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < ms; ++j) f_(i, j) = design_.x(i, j);
            for (std::size_t j = 0; j < c; ++j) f_(i, ms + j) = covariates(i, j);
            for (std::size_t j = 0; j < q; ++j) f_(i, p_fixed_ + j) = design_.z(i, j);
        }
        {
            Matrix xtx(p_fixed_, p_fixed_);
            for (std::size_t i = 0; i < n_; ++i)
                for (std::size_t a = 0; a < p_fixed_; ++a)
                    for (std::size_t b = 0; b < p_fixed_; ++b) xtx(a, b) += f_(i, a) * f_(i, b);
            try {
                Cholesky chk(xtx);
                (void)chk;
            } catch (const Error&) {
                throw Error(ErrorCode::Unidentifiable, "fit_additive_mixed: fixed-effects design is rank deficient");
            }
        }
        ftf_ = crossprod(f_);
        fty_ = crossprod(f_, y);
        for (double v : y) yty_ += v * v;

        group_of_.resize(n_);
        counts_.assign(groups_, 0.0);
        group_y_.assign(groups_, 0.0);
        group_f_ = Matrix(groups_, r_);
        for (std::size_t i = 0; i < n_; ++i) {
            const std::size_t g = index.at(group[i]);
            group_of_[i] = g;
            counts_[g] += 1.0;
            group_y_[g] += y[i];
            for (std::size_t j = 0; j < r_; ++j) group_f_(g, j) += f_(i, j);
        }
    }

    [[nodiscard]] std::size_t num_groups() const noexcept { return groups_; }
    [[nodiscard]] std::size_t num_fixed() const noexcept { return p_fixed_; }
    [[nodiscard]] std::size_t num_spline_random() const noexcept { return q_; }

    /// −2ℓ_R at (λ_U, λ_s) = (σ_ε²/σ_U², σ_ε²/σ_u²).
    [[nodiscard]] double objective(double lambda_subject, double lambda_spline) const {
        return solve(lambda_subject, lambda_spline).value;
    }

    [[nodiscard]] MixedModelFit fit(const AdditiveOptions& opt = {}) const {
        const double lo = opt.log_lambda_lo, hi = opt.log_lambda_hi;
        auto f = [&](const std::vector<double>& t) {
            const double a = std::clamp(t[0], lo, hi), b = std::clamp(t[1], lo, hi);
            // outside the box: boundary value plus a steep wall
            const double wall = 1e3 * (std::abs(t[0] - a) + std::abs(t[1] - b));
            try {
                return objective(std::exp(a), std::exp(b)) + wall;
            } catch (const Error&) {
                return std::numeric_limits<double>::infinity();
            }
        };
        const std::size_t g = std::max<std::size_t>(opt.seed_grid, 2);
        std::vector<double> start{0.0, 0.0};
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < g; ++i) {
            for (std::size_t j = 0; j < g; ++j) {
                const std::vector<double> t{lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(g),
                                            lo + (hi - lo) * (static_cast<double>(j) + 0.5) / static_cast<double>(g)};
                const double v = f(t);
                if (v < best) {
                    best = v;
                    start = t;
                }
            }
        }
        if (!std::isfinite(best))
            throw Error(ErrorCode::ConvergenceFailure, "fit_additive_mixed: REML criterion not finite on the start grid");
        const double step = 0.5 * (hi - lo) / static_cast<double>(g);
        const auto nm = nelder_mead(f, start, step, opt.diameter_tol, opt.max_iter);
        if (!nm.converged)
            throw Error(ErrorCode::ConvergenceFailure,
                        "fit_additive_mixed: Nelder-Mead did not converge in " + std::to_string(opt.max_iter) +
                            " iterations");
        const double a = std::clamp(nm.x[0], lo, hi), b = std::clamp(nm.x[1], lo, hi);
        MixedModelFit out = assemble(std::exp(a), std::exp(b));
        const double edge = 1e-3;
        out.boundary_warning = a - lo < edge || hi - a < edge || b - lo < edge || hi - b < edge;
        out.iterations = nm.iterations;
        out.converged = nm.converged;
        return out;
    }

    /// BLUPs, standard errors and variance components at fixed (λ_U, λ_s).
    [[nodiscard]] MixedModelFit assemble(double lambda_subject, double lambda_spline) const {
        const Solution s = solve(lambda_subject, lambda_spline);
        const Matrix sinv = s.chol.inverse();
        Vector beta(s.theta.begin(), s.theta.begin() + static_cast<std::ptrdiff_t>(p_fixed_));
        Vector u(s.theta.begin() + static_cast<std::ptrdiff_t>(p_fixed_), s.theta.end());
        Vector se(p_fixed_);
        for (std::size_t j = 0; j < p_fixed_; ++j) se[j] = std::sqrt(s.sigma_eps2 * sinv(j, j));

        Vector fitted = f_ * s.theta;
        for (std::size_t i = 0; i < n_; ++i) fitted[i] += s.subject[group_of_[i]];

        // smooth component: spline fixed part plus Z_s u as B-spline coefficients
        const std::size_t ms = design_.x.cols();
        Vector coef(spec_.num_basis(), 0.0);
        for (std::size_t k = 0; k < coef.size(); ++k) {
            for (std::size_t j = 0; j < ms; ++j) coef[k] += design_.fixed_to_coef(k, j) * beta[j];
            for (std::size_t j = 0; j < q_; ++j) coef[k] += design_.random_to_coef(k, j) * u[j];
        }
        FitResult curve{coef, lambda_spline, std::numeric_limits<double>::quiet_NaN(), {}, 0.0, spec_,
                        PenaltyKind::OSullivan, spec_.order()};
        curve.fitted = eval_basis(spec_, x_spline_, 0).multiply(coef);

        MixedModelFit out{.beta = std::move(beta),
                          .beta_se = std::move(se),
                          .u = std::move(u),
                          .subject_effects = s.subject,
                          .subject_ids = ids_,
                          .sigma_u2 = s.sigma_eps2 / lambda_spline,
                          .sigma_eps2 = s.sigma_eps2,
                          .sigma_subject2 = s.sigma_eps2 / lambda_subject,
                          .lambda = lambda_spline,
                          .lambda_subject = lambda_subject,
                          .reml_value = -0.5 * s.value,
                          .fitted = std::move(fitted),
                          .curve = std::move(curve),
                          .boundary_warning = false,
                          .stable_transform = dr_.stable,
                          .converged = true,
                          .iterations = 0};
        return out;
    }

private:
    struct Solution {
        Vector theta;    ///< [β; u_spline]
        Vector subject;  ///< subject intercepts
        Cholesky chol;   ///< of the Schur complement S
        double value;
        double sigma_eps2;
    };

    [[nodiscard]] Solution solve(double lu, double ls) const {
        require(lu > 0.0 && ls > 0.0 && std::isfinite(lu) && std::isfinite(ls), ErrorCode::InvalidLambda,
                "fit_additive_mixed: variance ratios must be positive and finite");
        // S = FᵀF + blockdiag(0, λ_s I) − Σ_g s_g s_gᵀ/(n_g + λ_U)
        Matrix s = ftf_;
        for (std::size_t j = 0; j < q_; ++j) s(p_fixed_ + j, p_fixed_ + j) += ls;
        Vector rhs = fty_;
        double log_det = 0.0;
        for (std::size_t g = 0; g < groups_; ++g) {
            const double dg = counts_[g] + lu;
            log_det += std::log(dg);
            const auto sg = group_f_.row(g);
            for (std::size_t a = 0; a < r_; ++a) {
                const double va = sg[a] / dg;
                rhs[a] -= va * group_y_[g];
                for (std::size_t b = 0; b <= a; ++b) s(a, b) -= va * sg[b];
            }
        }
        for (std::size_t a = 0; a < r_; ++a)
            for (std::size_t b = a + 1; b < r_; ++b) s(a, b) = s(b, a);
        Cholesky chol(s);
        Vector theta = chol.solve(rhs);
        Vector subject(groups_);
        double fit_y = dot(theta, fty_);
        for (std::size_t g = 0; g < groups_; ++g) {
            subject[g] = (group_y_[g] - dot(group_f_.row(g), theta)) / (counts_[g] + lu);
            fit_y += subject[g] * group_y_[g];
        }
        const double ypy = yty_ - fit_y;
        require(ypy > 0.0, ErrorCode::DegenerateResponse, "fit_additive_mixed: zero residual quadratic form");
        const double n = static_cast<double>(n_), pf = static_cast<double>(p_fixed_);
        const double sigma2 = ypy / (n - pf);
        log_det += chol.log_det();
        const double value = (n - pf) * (std::log(sigma2) + 1.0 + detail::log_two_pi) + log_det -
                             static_cast<double>(groups_) * std::log(lu) - static_cast<double>(q_) * std::log(ls);
        return {std::move(theta), std::move(subject), std::move(chol), value, sigma2};
    }

    std::size_t n_;
    BasisSpec spec_;
    Vector x_spline_;
    DRTransform dr_;
    MixedDesign design_;
    std::size_t p_fixed_ = 0, q_ = 0, r_ = 0, groups_ = 0;
    std::vector<long> ids_;
    Matrix f_, ftf_;
    Vector fty_;
    double yty_ = 0.0;
    std::vector<std::size_t> group_of_;
    Vector counts_, group_y_;
    Matrix group_f_;
};

inline MixedModelFit fit_additive_mixed(std::span<const double> y, std::span<const double> x_spline,
                                        const Matrix& covariates, std::span<const long> group, const BasisSpec& spec,
                                        const AdditiveOptions& opt = {}) {
    return AdditiveMixedModel(y, x_spline, covariates, group, spec).fit(opt);
}

// ---------------------------------------------------------------------------
// Simulated longitudinal data: subjects with 1–4 yearly visits

struct LongitudinalSimSpec {
    std::size_t subjects = 230;
    std::size_t max_visits = 4;
    double beta = 0.1;
    double sigma_subject = 0.25;
    double sigma_eps = 0.05;
    double age_lo = 8.0;
    double age_hi = 28.0;
};

struct LongitudinalData {
    Vector y;
    Vector age;
    /// Binary subject-level covariate, one column.
    Matrix group_indicator;
    std::vector<long> subject;
};

/// Mean curve 1 + Φ((2x − 36)/5)/2.
inline double growth_curve(double x) {
    return 1.0 + 0.25 * std::erfc(-((2.0 * x - 36.0) / 5.0) / std::numbers::sqrt2);
}

inline LongitudinalData simulate_longitudinal(const LongitudinalSimSpec& spec, std::uint64_t seed) {
    require(spec.subjects >= 1 && spec.max_visits >= 1, ErrorCode::InvalidInput,
            "simulate_longitudinal: need at least one subject and one visit");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> visits(1, spec.max_visits);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    LongitudinalData d;
    std::vector<double> indicator;
    for (std::size_t s = 0; s < spec.subjects; ++s) {
        const std::size_t nv = visits(rng);
        const double u = spec.sigma_subject * std_normal(rng);
        const double last_start = spec.age_hi - static_cast<double>(nv - 1);
        const double start = std::uniform_real_distribution<double>(spec.age_lo, last_start)(rng);
        const double grp = coin(rng) ? 1.0 : 0.0;
        for (std::size_t v = 0; v < nv; ++v) {
            const double age = start + static_cast<double>(v);
            d.age.push_back(age);
            indicator.push_back(grp);
            d.subject.push_back(static_cast<long>(s + 1));
            d.y.push_back(growth_curve(age) + spec.beta * grp + u + spec.sigma_eps * std_normal(rng));
        }
    }
    d.group_indicator = Matrix(d.y.size(), 1);
    for (std::size_t i = 0; i < indicator.size(); ++i) d.group_indicator(i, 0) = indicator[i];
    return d;
}

}  // namespace osul
