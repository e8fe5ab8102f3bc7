#pragma once

/**
 * @file study.hpp
 * @brief Simulation harness comparing O-splines and P-splines against a
 * smoothing-spline reference.
 *
 * Each replication draws data from a SimSetting on [0, 1] and fits three
 * cubic penalized splines on (a, b) = (−0.1, 1.1):
 *
 *  - f̂_S: the maximal-knot O-spline (interior knots at every distinct x),
 *    λ chosen by GCV; this is the cubic smoothing spline;
 *  - f̂_O: K equally spaced interior knots, clamped boundary knots,
 *    integrated-squared-second-derivative penalty;
 *  - f̂_P: the Eilers–Marx extended equally spaced knots with a
 *    second-order difference penalty.
 *
 * f̂_O and f̂_P are matched to the effective degrees of freedom of f̂_S, and
 * both are compared with f̂_S through d(f, g; A) = ∫_A (f − g)² on the
 * regions (a, κ_first), (κ_first, κ_last), (κ_last, b) and (a, b), where
 * κ_first and κ_last are the outermost interior knots of f̂_O.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "osul/error.hpp"
#include "osul/fit.hpp"
#include "osul/matrix.hpp"
#include "osul/penalty.hpp"
#include "osul/splinebasis.hpp"

namespace osul {

enum class DesignKind { UniformGrid, UniformRandom };

struct SimSetting {
    std::string name;
    std::function<double(double)> f;
    double sigma = 0.1;
    std::size_t n = 200;
    DesignKind design = DesignKind::UniformRandom;
};

inline double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Smooth step from 0 to 1 centred at 0.5: f(x) = Φ((x − 0.5)/0.15).
inline SimSetting ramp_setting(double sigma = 0.1, std::size_t n = 200) {
    return {"ramp", [](double x) { return standard_normal_cdf((x - 0.5) / 0.15); }, sigma, n, DesignKind::UniformRandom};
}

/// Two periods of a sine wave: f(x) = sin(4πx).
inline SimSetting sine_setting(double sigma = 0.3, std::size_t n = 200) {
    return {"sine", [](double x) { return std::sin(4.0 * std::numbers::pi * x); }, sigma, n, DesignKind::UniformRandom};
}

inline SimSetting linear_setting(double intercept, double slope, double sigma, std::size_t n,
                                 DesignKind design = DesignKind::UniformGrid) {
    return {"linear", [=](double x) { return intercept + slope * x; }, sigma, n, design};
}

struct SimData {
    Vector x;
    Vector y;
};

/// Grid designs use x_i = (i − ½)/n; random designs draw x uniformly on [0, 1].
inline SimData simulate(const SimSetting& setting, std::mt19937_64& rng) {
    require(setting.n >= 2, ErrorCode::InvalidInput, "simulate: need n >= 2");
    require(setting.sigma >= 0.0 && std::isfinite(setting.sigma), ErrorCode::InvalidInput,
            "simulate: noise sd must be finite and nonnegative");
    require(static_cast<bool>(setting.f), ErrorCode::InvalidInput, "simulate: setting has no regression function");
    SimData d{Vector(setting.n), Vector(setting.n)};
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < setting.n; ++i)
        d.x[i] = setting.design == DesignKind::UniformGrid
                     ? (static_cast<double>(i) + 0.5) / static_cast<double>(setting.n)
                     : unif(rng);
    if (setting.design == DesignKind::UniformRandom) std::sort(d.x.begin(), d.x.end());
    for (std::size_t i = 0; i < setting.n; ++i) d.y[i] = setting.f(d.x[i]) + setting.sigma * noise(rng);
    return d;
}

/// Composite Simpson nodes and weights with 401 equally spaced nodes.
struct SimpsonRule {
    Vector nodes;
    Vector weights;
};

inline SimpsonRule simpson_rule(double lo, double hi, std::size_t num_nodes = 401) {
    require(lo < hi, ErrorCode::InvalidInput, "simpson_rule: need lo < hi");
    require(num_nodes >= 3 && num_nodes % 2 == 1, ErrorCode::InvalidInput, "simpson_rule: need an odd node count >= 3");
    SimpsonRule r{Vector(num_nodes), Vector(num_nodes)};
    const double h = (hi - lo) / static_cast<double>(num_nodes - 1);
    for (std::size_t i = 0; i < num_nodes; ++i) {
        r.nodes[i] = i + 1 == num_nodes ? hi : lo + static_cast<double>(i) * h;
        const double c = i == 0 || i + 1 == num_nodes ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        r.weights[i] = c * h / 3.0;
    }
    return r;
}

/// d(f, g; (lo, hi)) = ∫ (f − g)² for callables of one variable.
template <class F, class G>
double discrepancy(F&& f, G&& g, double lo, double hi) {
    const SimpsonRule rule = simpson_rule(lo, hi);
    double total = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double diff = f(rule.nodes[i]) - g(rule.nodes[i]);
        total += rule.weights[i] * diff * diff;
    }
    return total;
}

/// d(f̂, ĝ; (lo, hi)) for two fitted splines, extrapolating linearly-extended
/// boundary pieces when the region leaves a basis' support.
inline double discrepancy(const FitResult& f, const FitResult& g, double lo, double hi) {
    const SimpsonRule rule = simpson_rule(lo, hi);
    const Vector fv = predict(f, rule.nodes), gv = predict(g, rule.nodes);
    double total = 0.0;
    for (std::size_t i = 0; i < fv.size(); ++i) total += rule.weights[i] * (fv[i] - gv[i]) * (fv[i] - gv[i]);
    return total;
}

enum class Region { Left, Interior, Right, Total };
inline constexpr std::array<Region, 4> all_regions{Region::Left, Region::Interior, Region::Right, Region::Total};

constexpr std::string_view region_name(Region r) noexcept {
    switch (r) {
        case Region::Left: return "left";
        case Region::Interior: return "interior";
        case Region::Right: return "right";
        case Region::Total: return "total";
    }
    return "unknown";
}

struct RegionBounds {
    double a = 0.0;
    double first_knot = 0.0;
    double last_knot = 0.0;
    double b = 0.0;

    [[nodiscard]] std::pair<double, double> operator[](Region r) const noexcept {
        switch (r) {
            case Region::Left: return {a, first_knot};
            case Region::Interior: return {first_knot, last_knot};
            case Region::Right: return {last_knot, b};
            case Region::Total: break;
        }
        return {a, b};
    }
};

inline RegionBounds region_bounds(const KnotSequence& knots) {
    require(knots.num_interior() >= 1, ErrorCode::InvalidKnots, "region_bounds: need at least one interior knot");
    return {knots.lower(), knots.interior().front(), knots.interior().back(), knots.upper()};
}

struct RegionMeasures {
    double d_left = 0.0;
    double d_interior = 0.0;
    double d_right = 0.0;
    double d_total = 0.0;

    [[nodiscard]] double operator[](Region r) const noexcept {
        switch (r) {
            case Region::Left: return d_left;
            case Region::Interior: return d_interior;
            case Region::Right: return d_right;
            case Region::Total: break;
        }
        return d_total;
    }
};

inline RegionMeasures region_measures(const FitResult& f, const FitResult& g, const RegionBounds& bounds) {
    RegionMeasures m;
    m.d_left = discrepancy(f, g, bounds.a, bounds.first_knot);
    m.d_interior = discrepancy(f, g, bounds.first_knot, bounds.last_knot);
    m.d_right = discrepancy(f, g, bounds.last_knot, bounds.b);
    m.d_total = discrepancy(f, g, bounds.a, bounds.b);
    return m;
}

struct ComparisonOptions {
    std::size_t reps = 50;
    std::size_t num_knots = 100;
    std::uint64_t seed = 1;
    double a = -0.1;
    double b = 1.1;
    /// 0 means: OSUL_THREADS if set, otherwise the hardware concurrency.
    std::size_t threads = 0;
};

struct Replication {
    std::size_t rep = 0;
    SimData data;
    FitResult reference;
    FitResult ospline;
    FitResult pspline;
    RegionMeasures d_o;  ///< d(f̂_O, f̂_S; A)
    RegionMeasures d_p;  ///< d(f̂_P, f̂_S; A)
};

struct SkippedReplication {
    std::size_t rep = 0;
    std::string reason;
};

struct ComparisonResult {
    std::string setting;
    RegionBounds bounds;
    std::vector<Replication> reps;
    std::vector<SkippedReplication> skipped;
};

/// Independent stream per replication, fixed by (seed, rep) alone.
inline std::mt19937_64 replication_rng(std::uint64_t seed, std::size_t rep) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(static_cast<std::uint64_t>(rep) >> 32)};
    return std::mt19937_64(seq);
}

/// Thread count from OSUL_THREADS, falling back to the hardware concurrency.
inline std::size_t worker_threads(std::size_t requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("OSUL_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// One replication of the comparison on already simulated data.
inline Replication compare_once(const SimData& data, std::size_t num_knots, double a, double b) {
    require(num_knots >= 4, ErrorCode::InvalidInput, "compare_once: need at least 4 interior knots");
    const Vector unique_x = sorted_unique(data.x);
    const BasisSpec ref_spec(make_knots(a, b, unique_x, 2));
    FitResult reference = gcv_select(data.x, data.y, ref_spec, osullivan_penalty(ref_spec.knots), default_gcv_grid()).fit;
    const double target = reference.edf;

    const BasisSpec o_spec(make_knots(a, b, equal_interior_knots(a, b, num_knots), 2));
    FitResult ospline = match_edf(data.x, data.y, o_spec, osullivan_penalty(o_spec.knots), target).fit;

    const BasisSpec p_spec(eilers_marx_knots(a, b, num_knots, 2));
    FitResult pspline = match_edf(data.x, data.y, p_spec, pspline_penalty(p_spec.num_basis(), 2), target).fit;

    const RegionBounds bounds = region_bounds(o_spec.knots);
    Replication r{0, data, std::move(reference), std::move(ospline), std::move(pspline), {}, {}};
    r.d_o = region_measures(r.ospline, r.reference, bounds);
    r.d_p = region_measures(r.pspline, r.reference, bounds);
    return r;
}

/// Runs `reps` independent replications. Replications whose df-matching
/// fails are recorded in `skipped` with the error message; results are in
/// replication order and do not depend on the number of threads.
inline ComparisonResult run_comparison(const SimSetting& setting, const ComparisonOptions& opt) {
    require(opt.reps >= 1, ErrorCode::InvalidInput, "run_comparison: need reps >= 1");
    require(opt.num_knots >= 4, ErrorCode::InvalidInput, "run_comparison: need K >= 4");
    require(opt.a < 0.0 && opt.b > 1.0, ErrorCode::InvalidInput, "run_comparison: (a, b) must contain [0, 1]");

    ComparisonResult out;
    out.setting = setting.name;
    out.bounds = region_bounds(make_knots(opt.a, opt.b, equal_interior_knots(opt.a, opt.b, opt.num_knots), 2));

    std::vector<std::optional<Replication>> done(opt.reps);
    std::vector<std::string> failures(opt.reps);
    std::size_t next = 0;
    std::mutex mu;
    auto worker = [&] {
        for (;;) {
            std::size_t rep = 0;
            {
                std::lock_guard lock(mu);
                if (next == opt.reps) return;
                rep = next++;
            }
            auto rng = replication_rng(opt.seed, rep);
            const SimData data = simulate(setting, rng);
            try {
                Replication r = compare_once(data, opt.num_knots, opt.a, opt.b);
                r.rep = rep;
                done[rep] = std::move(r);
            } catch (const Error& e) {
                const ErrorCode c = e.code();
                if (c != ErrorCode::InfeasibleTarget && c != ErrorCode::BracketFailure) throw;
                failures[rep] = e.what();
            }
        }
    };
    const std::size_t nthreads = std::min(worker_threads(opt.threads), opt.reps);
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::exception_ptr> errors(nthreads);
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < nthreads; ++t)
            pool.emplace_back([&, t] {
                try {
                    worker();
                } catch (...) {
                    errors[t] = std::current_exception();
                    std::lock_guard lock(mu);
                    next = opt.reps;
                }
            });
        for (auto& th : pool) th.join();
        for (const auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    for (std::size_t rep = 0; rep < opt.reps; ++rep) {
        if (done[rep])
            out.reps.push_back(std::move(*done[rep]));
        else
            out.skipped.push_back({rep, failures[rep]});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test

enum class WilcoxonMethod { Auto, Exact, Normal };

struct WilcoxonResult {
    double statistic = 0.0;   ///< W⁺, the sum of ranks of positive differences
    std::size_t n_used = 0;   ///< number of nonzero differences
    double p_less = 0.0;      ///< P(W⁺ ≤ observed): alternative "differences tend to be negative"
    double p_greater = 0.0;   ///< P(W⁺ ≥ observed)
    double p_two_sided = 0.0;
    WilcoxonMethod method = WilcoxonMethod::Exact;
};

/// Signed-rank test with zeros dropped and average ranks for ties.
///
/// Auto uses the exact permutation distribution for n ≤ 12 and otherwise
/// the normal approximation with tie-corrected variance and a continuity
/// correction of ½. The exact distribution is built by counting sign
/// patterns over doubled (hence integer) ranks, so ties are handled exactly.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> diffs, WilcoxonMethod method = WilcoxonMethod::Auto) {
    require(!diffs.empty(), ErrorCode::InvalidInput, "wilcoxon_signed_rank: empty sample");
    std::vector<double> d;
    for (double v : diffs) {
        require(std::isfinite(v), ErrorCode::InvalidInput, "wilcoxon_signed_rank: non-finite difference");
        if (v != 0.0) d.push_back(v);
    }
    if (d.empty()) throw Error(ErrorCode::DegenerateSample, "wilcoxon_signed_rank: all differences are zero");
    const std::size_t n = d.size();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });
    // doubled ranks: tied groups share (first + last) in 1-based positions
    std::vector<long> rank2(n);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        const auto shared = static_cast<long>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = shared;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    long w2 = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (d[i] > 0.0) w2 += rank2[i];

    WilcoxonResult res;
    res.statistic = static_cast<double>(w2) / 2.0;
    res.n_used = n;
    res.method = method == WilcoxonMethod::Auto ? (n <= 12 ? WilcoxonMethod::Exact : WilcoxonMethod::Normal) : method;

    if (res.method == WilcoxonMethod::Exact) {
        require(n <= 64, ErrorCode::InvalidInput, "wilcoxon_signed_rank: exact mode limited to 64 differences");
        const auto total2 = static_cast<std::size_t>(std::accumulate(rank2.begin(), rank2.end(), 0L));
        std::vector<double> count(total2 + 1, 0.0);
        count[0] = 1.0;
        std::size_t reach = 0;
        for (long r : rank2) {
            const auto s = static_cast<std::size_t>(r);
            for (std::size_t v = reach + 1; v-- > 0;) count[v + s] += count[v];
            reach += s;
        }
        const double patterns = std::ldexp(1.0, static_cast<int>(n));
        double le = 0.0, ge = 0.0;
        for (std::size_t v = 0; v <= total2; ++v) {
            if (static_cast<long>(v) <= w2) le += count[v];
            if (static_cast<long>(v) >= w2) ge += count[v];
        }
        res.p_less = le / patterns;
        res.p_greater = ge / patterns;
    } else {
        const double nn = static_cast<double>(n);
        const double mean = nn * (nn + 1.0) / 4.0;
        const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
        if (!(var > 0.0)) throw Error(ErrorCode::DegenerateSample, "wilcoxon_signed_rank: zero variance");
        const double sd = std::sqrt(var);
        res.p_less = standard_normal_cdf((res.statistic - mean + 0.5) / sd);
        res.p_greater = 1.0 - standard_normal_cdf((res.statistic - mean - 0.5) / sd);
    }
    res.p_two_sided = std::min(1.0, 2.0 * std::min(res.p_less, res.p_greater));
    return res;
}

/// Index of the value at the given empirical percentile (nearest rank:
/// the ⌈p·N⌉-th smallest). Ties keep their original order.
inline std::size_t percentile_exemplar(std::span<const double> values, double percentile) {
    require(!values.empty(), ErrorCode::InvalidInput, "percentile_exemplar: empty table");
    require(percentile > 0.0 && percentile < 1.0, ErrorCode::InvalidInput,
            "percentile_exemplar: percentile must lie in (0, 1)");
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    const auto rank = static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(values.size())));
    return order[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

enum class Estimator { OSpline, PSpline };

constexpr std::string_view estimator_name(Estimator e) noexcept {
    return e == Estimator::OSpline ? "ospline" : "pspline";
}

/// Replication number whose d_total for the given estimator sits at the percentile.
inline std::size_t percentile_exemplar(const ComparisonResult& table, Estimator which, double percentile) {
    require(!table.reps.empty(), ErrorCode::InvalidInput, "percentile_exemplar: empty table");
    Vector totals;
    for (const auto& r : table.reps) totals.push_back(which == Estimator::OSpline ? r.d_o.d_total : r.d_p.d_total);
    return table.reps[percentile_exemplar(totals, percentile)].rep;
}

struct RegionSummary {
    Region region = Region::Total;
    double median_d_o = 0.0;
    double median_d_p = 0.0;
    WilcoxonResult test;  ///< on d_O − d_P; p_less small means O-splines are closer
};

inline double median(Vector v) {
    require(!v.empty(), ErrorCode::InvalidInput, "median: empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

inline std::vector<RegionSummary> summarize(const ComparisonResult& result) {
    require(!result.reps.empty(), ErrorCode::InvalidInput, "summarize: no completed replications");
    std::vector<RegionSummary> out;
    for (Region region : all_regions) {
        Vector o, p, diff;
        for (const auto& r : result.reps) {
            o.push_back(r.d_o[region]);
            p.push_back(r.d_p[region]);
            diff.push_back(r.d_o[region] - r.d_p[region]);
        }
        out.push_back({region, median(o), median(p), wilcoxon_signed_rank(diff)});
    }
    return out;
}

}  // namespace osul
