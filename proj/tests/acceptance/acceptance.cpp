// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <atomic>
#include <functional>
#include <random>
#include <sstream>
#include <thread>
#include <string>
#include <unistd.h>
#include <vector>

#include "oracles.hpp"
#include "osul/osul.hpp"

using namespace osul;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double sd(std::span<const double> v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

Vector linspace(double lo, double hi, std::size_t n) {
    Vector out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return out;
}

struct Sample {
    Vector x, y;
};

Sample noisy_sine(std::size_t n, double lo, double hi, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::normal_distribution<double> z(0.0, sigma);
    Sample s;
    for (std::size_t i = 0; i < n; ++i) s.x.push_back(u(rng));
    std::sort(s.x.begin(), s.x.end());
    for (double xi : s.x) s.y.push_back(std::sin(2.0 * M_PI * (xi - lo) / (hi - lo)) + z(rng));
    return s;
}

// ---------------------------------------------------------------------------
// 1, 2: penalty entries on random non-uniform knots

struct KnotConfig {
    std::size_t k;
    int m;
    KnotSequence knots;
};

std::vector<KnotConfig> penalty_configs() {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t ks[] = {0, 1, 5, 20};
    std::vector<KnotConfig> out;
    for (std::size_t c = 0; c < 40; ++c) {
        const std::size_t k = ks[c % 4];
        const int m = 1 + static_cast<int>((c / 4) % 4);
        const double a = -2.0 + 3.0 * u(rng), b = a + 0.5 + 3.5 * u(rng);
        Vector interior;
        while (interior.size() < k) {
            // squared uniforms cluster the knots near a
            const double v = u(rng);
            interior.push_back(a + (b - a) * (0.02 + 0.96 * v * v));
            interior = sorted_unique(interior);
        }
        out.push_back({k, m, make_knots(a, b, interior, m)});
    }
    return out;
}

Verdict penalty_exactness(const std::vector<KnotConfig>& configs) {
    double worst = 0.0;
    for (const auto& c : configs) {
        const Matrix om = osullivan_penalty(c.knots).values;
        const double scale = om.max_abs();
        const auto& t = c.knots.full();
        for (std::size_t i = 0; i < om.rows(); ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                auto run = [&](double tol) {
                    return oracle::penalty_entry(t, c.knots.degree(), c.m, i, j, c.knots.lower(), c.knots.upper(), tol);
                };
                const double rough = run(1e-8 * scale);
                const double ref = run(1e-11 * std::max(std::abs(rough), 1e-6 * scale));
                worst = std::max(worst, std::abs(om(i, j) - ref) / std::max(std::abs(ref), 1e-6 * scale));
            }
        }
    }
    return {worst <= 1e-9, fmt("max relative error %.2e over %zu configurations", worst, configs.size())};
}

Verdict cubic_fast_path(const std::vector<KnotConfig>& configs) {
    double worst = 0.0;
    std::size_t used = 0;
    for (const auto& c : configs) {
        if (c.m != 2) continue;
        ++used;
        const Matrix general = osullivan_penalty(c.knots).values;
        const Matrix fast = osullivan_penalty_cubic(c.knots).values;
        for (std::size_t i = 0; i < general.rows(); ++i)
            for (std::size_t j = 0; j < general.cols(); ++j) {
                const double diff = std::abs(general(i, j) - fast(i, j));
                if (diff == 0.0) continue;
                worst = std::max(worst, diff / std::abs(general(i, j)));
            }
    }
    return {worst <= 1e-12, fmt("max relative difference %.2e over %zu cubic configurations", worst, used)};
}

// ---------------------------------------------------------------------------
// 3, 4

Verdict band_reproduction() {
    const auto knots = make_knots(0.0, 1.0, equal_interior_knots(0.0, 1.0, 40), 2);
    const Matrix om = osullivan_penalty(knots).values;
    const Vector row = band_row(om, om.rows() / 2, 3, 80.0);
    const double expect[] = {5, 0, -45, 80, -45, 0, 5};
    double err = 0.0;
    for (std::size_t j = 0; j < 7; ++j) err = std::max(err, std::abs(row[j] - expect[j]));

    const Matrix dtd = pspline_penalty(30, 2).values;
    const Vector raw = band_row(dtd, 15, 2);
    const double diff2[] = {1, -4, 6, -4, 1};
    bool exact = raw.size() == 5;
    for (std::size_t j = 0; exact && j < 5; ++j) exact = raw[j] == diff2[j];
    return {err <= 1e-9 && exact, fmt("O-spline band max error %.2e; second-difference row %s", err,
                                      exact ? "exact" : "differs")};
}

Verdict penalty_rank() {
    std::string detail;
    bool ok = true;
    for (std::size_t k : {0u, 5u, 20u, 100u}) {
        const Matrix om = osullivan_penalty(make_knots(0.0, 1.0, equal_interior_knots(0.0, 1.0, k), 2)).values;
        const SymEigen e = sym_eigen(om);
        std::size_t small = 0;
        for (double v : e.values)
            if (v < 1e-10 * e.values.front()) ++small;
        ok = ok && small == 2;
        detail += fmt("%sK=%zu: %zu", detail.empty() ? "" : ", ", k, small);
    }
    return {ok, "near-zero eigenvalues " + detail};
}

// ---------------------------------------------------------------------------
// 5

/// Largest boundary |f''|, |f'''| or end-segment |f''| relative to the interior max |f''|.
double boundary_ratio(const FitResult& fit) {
    const auto& kn = fit.basis.knots;
    const double a = kn.lower(), b = kn.upper();
    const double first = kn.interior().front(), last = kn.interior().back();
    const Vector whole = linspace(a, b, 2001);
    double interior_max = 0.0;
    for (double v : predict(fit, whole, 2)) interior_max = std::max(interior_max, std::abs(v));
    double worst = 0.0;
    const Vector ends{a, b};
    for (int d : {2, 3})
        for (double v : predict(fit, ends, d)) worst = std::max(worst, std::abs(v));
    for (const Vector& seg : {linspace(a, first, 50), linspace(last, b, 50)})
        for (double v : predict(fit, seg, 2)) worst = std::max(worst, std::abs(v));
    return worst / interior_max;
}

Verdict natural_boundary() {
    double worst = 0.0, worst_all_knots = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Sample s = noisy_sine(100, 0.0, 1.0, 0.3, 500 + seed);
        const BasisSpec spec(make_knots(0.0, 1.0, quantile_knots(s.x, 20), 2));
        const auto sel = gcv_select(s.x, s.y, spec, osullivan_penalty(spec.knots), default_gcv_grid());
        worst = std::max(worst, boundary_ratio(sel.fit));

        const BasisSpec every(make_knots(0.0, 1.0, s.x, 2));
        const auto sel_all = gcv_select(s.x, s.y, every, osullivan_penalty(every.knots), default_gcv_grid());
        worst_all_knots = std::max(worst_all_knots, boundary_ratio(sel_all.fit));
    }
    return {worst <= 1e-6, fmt("20 fits with 20 quantile knots: worst ratio %.2e (limit 1e-6); "
                               "same data with a knot at every x: %.2e",
                               worst, worst_all_knots)};
}

// ---------------------------------------------------------------------------
// 6

Verdict limits() {
    const Sample s = noisy_sine(100, 0.0, 1.0, 0.3, 61);
    const BasisSpec spec(make_knots(0.0, 1.0, quantile_knots(s.x, 20), 2));
    const FitResult stiff = fit_penalized(s.x, s.y, spec, osullivan_penalty(spec.knots), 1e12);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        mx += s.x[i];
        my += s.y[i];
    }
    mx /= static_cast<double>(s.x.size());
    my /= static_cast<double>(s.y.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        sxy += (s.x[i] - mx) * (s.y[i] - my);
        sxx += (s.x[i] - mx) * (s.x[i] - mx);
    }
    const double slope = sxy / sxx;
    double line_err = 0.0;
    for (std::size_t i = 0; i < s.x.size(); ++i)
        line_err = std::max(line_err, std::abs(stiff.fitted[i] - (my + slope * (s.x[i] - mx))));
    line_err /= sd(s.y);

    // jittered design, noise-free responses
    Vector x, y;
    for (int i = 0; i < 25; ++i) {
        x.push_back((i + 0.3 + 0.4 * std::sin(3.0 * i)) / 25.0);
        y.push_back(std::sin(2.0 * M_PI * x.back()) + 0.5 * x.back() * x.back());
    }
    auto interpolation_gap = [](const Vector& xs, const Vector& ys) {
        const BasisSpec every(make_knots(xs.front() - 0.05, xs.back() + 0.05, xs, 2));
        const FitResult loose = fit_penalized(xs, ys, every, osullivan_penalty(every.knots), 1e-10);
        return max_abs_diff(loose.fitted, ys) / sd(ys);
    };
    const double interp_err = interpolation_gap(x, y);
    const Sample noisy = noisy_sine(25, 0.0, 1.0, 0.3, 62);
    const double noisy_err = interpolation_gap(noisy.x, noisy.y);
    return {line_err <= 1e-4 && interp_err <= 1e-6,
            fmt("lambda=1e12 vs least-squares line %.2e sd(y); K=n=25 at lambda=1e-10 residual %.2e sd(y) "
                "(noisy responses: %.2e sd(y))",
                line_err, interp_err, noisy_err)};
}

// ---------------------------------------------------------------------------
// 7

Verdict mixed_equivalence() {
    const Sample s = noisy_sine(100, 2.0, 5.0, 0.3, 71);
    const BasisSpec spec(make_knots(2.0, 5.0, quantile_knots(s.x, 20), 2));
    const PenaltyMatrix pen = osullivan_penalty(spec.knots);
    const DRTransform dr = demmler_reinsch(pen);

    const Matrix canon = dr.l.transpose() * (pen.standardized() * dr.l);
    double canon_err = 0.0;
    for (std::size_t i = 0; i < canon.rows(); ++i)
        for (std::size_t j = 0; j < canon.cols(); ++j) {
            const double target = (i == j && i >= dr.null_dim()) ? 1.0 : 0.0;
            canon_err = std::max(canon_err, std::abs(canon(i, j) - target));
        }

    const MixedDesign simple = build_design(s.x, spec, dr, FixedBasis::Auto);
    const MixedDesign full = build_design(s.x, spec, dr, FixedBasis::NullSpace);
    auto blup = [&](const MixedDesign& d, double lambda) {
        const Matrix c = hcat(d.x, d.z);
        Matrix m = crossprod(c);
        for (std::size_t j = d.x.cols(); j < c.cols(); ++j) m(j, j) += lambda;
        return solve_spd(m, crossprod(c, s.y));
    };
    const Vector grid = linspace(2.0, 5.0, 101);
    const Matrix grid_basis = eval_basis(spec, grid, 0).values;
    std::mt19937_64 rng(72);
    std::uniform_real_distribution<double> log_lambda(-12.0, 4.0);
    double curve_err = 0.0, fixed_err = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
        const double lambda = std::exp(log_lambda(rng));
        const Vector theta = blup(simple, lambda);
        Vector coef(spec.num_basis(), 0.0);
        for (std::size_t k = 0; k < coef.size(); ++k) {
            for (std::size_t j = 0; j < simple.x.cols(); ++j) coef[k] += simple.fixed_to_coef(k, j) * theta[j];
            for (std::size_t j = 0; j < simple.z.cols(); ++j)
                coef[k] += simple.random_to_coef(k, j) * theta[simple.x.cols() + j];
        }
        const Vector mixed_curve = grid_basis * coef;
        const Vector direct = predict(fit_penalized(s.x, s.y, spec, pen, lambda), grid);
        curve_err = std::max(curve_err, max_abs_diff(mixed_curve, direct));

        const Vector a = hcat(simple.x, simple.z) * theta;
        const Vector b = hcat(full.x, full.z) * blup(full, lambda);
        fixed_err = std::max(fixed_err, max_abs_diff(a, b));
    }
    return {canon_err <= 1e-8 && curve_err <= 1e-8 && fixed_err < 1e-8,
            fmt("canonical form %.2e; BLUP vs direct curve %.2e; [1 x] substitution %.2e", canon_err, curve_err,
                fixed_err)};
}

// ---------------------------------------------------------------------------
// 8

Verdict edf_machinery() {
    const Sample s = noisy_sine(200, 0.0, 1.0, 0.3, 81);
    const BasisSpec spec(make_knots(0.0, 1.0, quantile_knots(s.x, 20), 2));
    const PenalizedProblem problem(s.x, s.y, spec, osullivan_penalty(spec.knots));
    const Vector grid = log_lambda_grid(-20.0, 20.0, 9);
    bool decreasing = true;
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : grid) {
        const double e = problem.edf(lambda);
        decreasing = decreasing && e < prev;
        prev = e;
    }
    double worst = 0.0;
    for (double target : {3.0, 6.0, 12.0}) worst = std::max(worst, std::abs(match_edf(problem, target).fit.edf - target));
    return {decreasing && worst <= 1e-4,
            fmt("edf %s on 9-point grid; worst target miss %.2e", decreasing ? "strictly decreasing" : "NOT decreasing",
                worst)};
}

// ---------------------------------------------------------------------------
// 9

Verdict comparison_study() {
    const auto t0 = std::chrono::steady_clock::now();
    ComparisonOptions opt;
    opt.reps = 50;
    opt.num_knots = 100;
    opt.seed = 2024;
    bool ok = true;
    std::string detail;
    for (const SimSetting& setting : {ramp_setting(0.1, 200), sine_setting(0.3, 200)}) {
        const ComparisonResult res = run_comparison(setting, opt);
        const auto summary = summarize(res);
        detail += fmt("%s%s (%zu reps, %zu skipped):", detail.empty() ? "" : "; ", setting.name.c_str(),
                      res.reps.size(), res.skipped.size());
        for (const auto& r : summary) {
            detail += fmt(" %s p=%.1e", std::string(region_name(r.region)).c_str(), r.test.p_less);
            if (r.region != Region::Interior) ok = ok && r.test.p_less < 0.05;
        }
        ok = ok && res.skipped.empty();
    }
    const double elapsed = seconds_since(t0);
    ok = ok && elapsed < 300.0;
    return {ok, detail};
}

// ---------------------------------------------------------------------------
// 10

Verdict wilcoxon_correctness() {
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> size(1, 10), value(-6, 6);
    double exact_err = 0.0;
    int cases = 0;
    while (cases < 200) {
        std::vector<double> d(static_cast<std::size_t>(size(rng)));
        for (auto& v : d) v = value(rng) * 0.5;
        if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; })) continue;
        ++cases;
        const auto got = wilcoxon_signed_rank(d, WilcoxonMethod::Exact);
        const auto ref = oracle::wilcoxon_bruteforce(d);
        exact_err = std::max({exact_err, std::abs(got.p_less - ref.p_less), std::abs(got.p_greater - ref.p_greater),
                              std::abs(got.statistic - ref.w_plus)});
    }
    std::normal_distribution<double> z(0.3, 1.0);
    double approx_err = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> d(12);
        for (auto& v : d) v = z(rng);
        const auto ex = wilcoxon_signed_rank(d, WilcoxonMethod::Exact);
        const auto nm = wilcoxon_signed_rank(d, WilcoxonMethod::Normal);
        approx_err = std::max({approx_err, std::abs(ex.p_less - nm.p_less), std::abs(ex.p_greater - nm.p_greater),
                               std::abs(ex.p_two_sided - nm.p_two_sided)});
    }
    return {exact_err <= 1e-12 && approx_err <= 0.02,
            fmt("exact vs enumeration %.2e over %d cases; normal vs exact at n=12 %.4f", exact_err, cases, approx_err)};
}

// ---------------------------------------------------------------------------
// 11

Verdict additive_mixed() {
    const auto t0 = std::chrono::steady_clock::now();
    const LongitudinalSimSpec sim;  // beta 0.1, sigma_U 0.25, sigma_eps 0.05
    const std::size_t reps = 50;
    std::vector<int> covered(reps, 0);
    Vector sigma_u(reps, 0.0);
    std::vector<std::string> failures(reps);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r = next++; r < reps; r = next++) {
            try {
                const auto d = simulate_longitudinal(sim, 1000 + r);
                const auto [lo, hi] = std::minmax_element(d.age.begin(), d.age.end());
                const Vector unique = sorted_unique(d.age);
                const std::size_t k = std::min(default_num_knots(d.age.size(), unique.size(), KnotRule::RWC),
                                               unique.size() - 2);
                const BasisSpec spec(make_knots(*lo, *hi, quantile_knots(d.age, k), 2));
                const auto m = fit_additive_mixed(d.y, d.age, d.group_indicator, d.subject, spec);
                const double beta = m.beta[2], se = m.beta_se[2];
                covered[r] = std::abs(beta - sim.beta) <= 1.96 * se ? 1 : 0;
                sigma_u[r] = std::sqrt(m.sigma_subject2);
            } catch (const std::exception& e) {
                failures[r] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < worker_threads(); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (const auto& f : failures)
        if (!f.empty()) return {false, "fit failed: " + f};
    std::size_t hits = 0;
    for (int c : covered) hits += static_cast<std::size_t>(c);
    const double coverage = static_cast<double>(hits) / static_cast<double>(reps);
    const double med = median(sigma_u);
    const double elapsed = seconds_since(t0);
    return {coverage >= 0.9 && med >= 0.20 && med <= 0.30 && elapsed < 180.0,
            fmt("group-effect coverage %.2f; median sigma_U %.4f", coverage, med)};
}

// ---------------------------------------------------------------------------
// 12

Verdict banded_solver() {
    auto system_for = [](std::size_t k, std::uint64_t seed) {
        const Sample s = noisy_sine(std::max<std::size_t>(5 * k, 200), 0.0, 1.0, 0.3, seed);
        const BasisSpec spec(make_knots(0.0, 1.0, quantile_knots(s.x, k), 2));
        const PenalizedProblem problem(s.x, s.y, spec, osullivan_penalty(spec.knots));
        return std::pair{problem.system(1e-4), crossprod(problem.design().values, s.y)};
    };
    const auto [a100, rhs100] = system_for(100, 121);
    const Vector banded = BandedCholesky(a100).solve(rhs100);
    const Vector dense = solve_spd(a100.to_dense(), rhs100);
    const double agree = max_abs_diff(banded, dense);

    const auto [a400, rhs400] = system_for(400, 122);
    const Matrix a400_dense = a400.to_dense();
    double t_band = std::numeric_limits<double>::infinity(), t_dense = t_band;
    double sink = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
        auto t0 = std::chrono::steady_clock::now();
        sink += BandedCholesky(a400).solve(rhs400)[0];
        t_band = std::min(t_band, seconds_since(t0));
        t0 = std::chrono::steady_clock::now();
        sink += Cholesky(a400_dense).solve(rhs400)[0];
        t_dense = std::min(t_dense, seconds_since(t0));
    }
    return {agree <= 1e-8 && t_band <= 0.5 * t_dense && std::isfinite(sink),
            fmt("K=100 max difference %.2e; K=400 banded %.2e s vs dense %.2e s", agree, t_band, t_dense)};
}

// ---------------------------------------------------------------------------
// 13

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Verdict cli_contract() {
    const fs::path dir = fs::temp_directory_path() / ("osul_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    auto path = [&](const std::string& n) { return (dir / n).string(); };
    auto run = [](std::vector<std::string> args) {
        std::ostringstream out, err;
        return cli::run(args, out, err);
    };
    bool ok = true;
    std::string detail;

    for (const char* tag : {"a", "b"}) {
        const std::string t(tag);
        ok = ok && run({"compare", "--setting", "ramp", "--reps", "4", "--n", "80", "--num-knots", "20", "--seed", "9",
                        "--output", path(t + ".csv"), "--curves", path(t + "_curves.csv")}) == 0;
        ok = ok && run({"simulate", "--setting", "sine", "--reps", "2", "--n", "50", "--seed", "9", "--output",
                        path(t + "_sim.csv")}) == 0;
    }
    bool same = true;
    for (const char* f : {".csv", "_summary.csv", "_curves.csv", "_sim.csv"})
        same = same && slurp(path(std::string("a") + f)) == slurp(path(std::string("b") + f));
    detail += same ? "repeated runs byte-identical" : "repeated runs DIFFER";

    std::size_t mismatches = 0;
    const Vector interior{0.07, 0.31, 0.32, 0.8};
    for (int m = 1; m <= 4; ++m) {
        ok = ok && run({"penalty", "--order", std::to_string(m), "--a", "0", "--b", "1", "--interior",
                        "0.07,0.31,0.32,0.8", "--output", path("omega.csv")}) == 0;
        const Matrix back = csv::read_matrix(path("omega.csv"));
        const Matrix ref = osullivan_penalty(make_knots(0.0, 1.0, interior, m)).values;
        if (back.rows() != ref.rows() || back.cols() != ref.cols()) {
            ++mismatches;
            continue;
        }
        for (std::size_t i = 0; i < ref.rows(); ++i)
            for (std::size_t j = 0; j < ref.cols(); ++j) mismatches += back(i, j) != ref(i, j) ? 1 : 0;
    }
    detail += fmt("; penalty CSV round-trip mismatches %zu", mismatches);
    fs::remove_all(dir);
    return {ok && same && mismatches == 0, detail};
}

}  // namespace

int main() {
    const auto configs = penalty_configs();
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"penalty exactness", [&] {
             const auto t0 = std::chrono::steady_clock::now();
             Verdict v = penalty_exactness(configs);
             const double t = seconds_since(t0);
             v.pass = v.pass && t < 30.0;
             v.detail += fmt(" in %.1f s (limit 30 s)", t);
             return v;
         }},
        {"cubic fast path", [&] { return cubic_fast_path(configs); }},
        {"band reproduction", band_reproduction},
        {"penalty rank", penalty_rank},
        {"natural boundary", natural_boundary},
        {"lambda limits", limits},
        {"mixed-model equivalence", mixed_equivalence},
        {"edf machinery", edf_machinery},
        {"comparison study", comparison_study},
        {"wilcoxon correctness", wilcoxon_correctness},
        {"additive mixed model", additive_mixed},
        {"banded solver", banded_solver},
        {"cli determinism and round-trip", cli_contract},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failed += v.pass ? 0 : 1;
        std::printf("criterion %2zu %s  %-31s %s  [%.1f s]\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first,
                    v.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
    return failed == 0 ? 0 : 1;
}
