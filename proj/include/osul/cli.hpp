#pragma once

/**
 * @file cli.hpp
 * @brief The `osul` command-line driver.
 *
 * Subcommands:
 *
 *   fit           penalized spline fit of y on x (fixed λ, GCV or REML)
 *   fit-additive  REML fit of y = f(x) + covariates + subject intercept
 *   penalty       penalty matrix (or a normalized band row) as CSV
 *   simulate      data from one of the study settings
 *   compare       O-spline / P-spline comparison study
 *
 * Exit codes: 0 success, 2 bad input or configuration, 3 numerical failure.
 * Numbers are written with 17 significant digits, so identical
 * configurations produce identical bytes.
 */

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "osul/csv.hpp"
#include "osul/error.hpp"
#include "osul/fit.hpp"
#include "osul/mixed.hpp"
#include "osul/penalty.hpp"
#include "osul/splinebasis.hpp"
#include "osul/study.hpp"

namespace osul::cli {

enum class KnotChoice { Quantile, Equal, EilersMarx, Maximal };
enum class Method { DirectLambda, GCV, REML };

struct RunConfig {
    std::string input;
    std::string x_col = "x";
    std::string y_col = "y";
    std::string group_col;
    std::vector<std::string> covariates;
    Method method = Method::GCV;
    double lambda = 1.0;
    int order = 2;
    KnotChoice knots = KnotChoice::Quantile;
    std::size_t num_knots = 0;  ///< 0: the default rule for the subcommand
    std::size_t grid_size = 101;
    std::string output;
    std::string residuals;
    std::uint64_t seed = 1;
};

namespace detail {

inline std::string key_value(std::string_view key, double v) { return std::string(key) + "=" + csv::format(v) + "\n"; }

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::InputError, "cannot open output file '" + path + "'");
    return out;
}

/// "<stem><suffix>.csv" next to `path`, e.g. curve.csv -> curve_residuals.csv.
inline std::string sibling(const std::string& path, const std::string& suffix) {
    const auto slash = path.find_last_of('/');
    const auto dot = path.find_last_of('.');
    const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
    return (has_ext ? path.substr(0, dot) : path) + suffix + ".csv";
}

inline Vector linspace(double lo, double hi, std::size_t count) {
    require(count >= 2, ErrorCode::ConfigError, "grid size must be at least 2");
    Vector g(count);
    for (std::size_t i = 0; i < count; ++i)
        g[i] = i + 1 == count ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    return g;
}

struct Model {
    BasisSpec spec;
    PenaltyMatrix penalty;
};

/// Basis on [min x, max x] with the requested knot rule; the Eilers–Marx
/// layout is paired with a difference penalty of the same order.
inline Model build_model(const Vector& x, const RunConfig& cfg, KnotRule default_rule) {
    require(x.size() >= 2, ErrorCode::InputError, "need at least two observations");
    const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    const double a = *lo_it, b = *hi_it;
    require(a < b, ErrorCode::InputError, "x column is constant");
    const Vector unique = sorted_unique(x);
    const std::size_t room = unique.size() >= 2 ? unique.size() - 2 : 0;
    std::size_t k = cfg.num_knots;
    if (k == 0) k = std::min(default_num_knots(x.size(), unique.size(), default_rule), room);

    switch (cfg.knots) {
        case KnotChoice::Quantile: {
            BasisSpec spec(make_knots(a, b, quantile_knots(x, k), cfg.order));
            return {spec, osullivan_penalty(spec.knots)};
        }
        case KnotChoice::Equal: {
            BasisSpec spec(make_knots(a, b, equal_interior_knots(a, b, k), cfg.order));
            return {spec, osullivan_penalty(spec.knots)};
        }
        case KnotChoice::Maximal: {
            const Vector inner(unique.begin() + 1, unique.end() - 1);
            BasisSpec spec(make_knots(a, b, inner, cfg.order));
            return {spec, osullivan_penalty(spec.knots)};
        }
        case KnotChoice::EilersMarx: {
            BasisSpec spec(eilers_marx_knots(a, b, std::max<std::size_t>(k, 1), cfg.order));
            return {spec, pspline_penalty(spec.num_basis(), cfg.order)};
        }
    }
    throw Error(ErrorCode::ConfigError, "unknown knot rule");
}

inline void write_curve(const FitResult& fit, std::size_t grid_size, const std::string& path) {
    const Vector grid = linspace(fit.basis.lower(), fit.basis.upper(), grid_size);
    auto out = open_output(path);
    csv::write_columns(out, {"grid_x", "fitted", "deriv2"}, {grid, predict(fit, grid, 0), predict(fit, grid, 2)});
}

inline SimSetting make_setting(const std::string& name, double sigma, std::size_t n) {
    if (name == "ramp") return sigma > 0.0 ? ramp_setting(sigma, n) : ramp_setting(0.1, n);
    if (name == "sine") return sigma > 0.0 ? sine_setting(sigma, n) : sine_setting(0.3, n);
    if (name == "linear") return linear_setting(0.0, 1.0, std::max(sigma, 0.0), n, DesignKind::UniformRandom);
    throw Error(ErrorCode::ConfigError, "unknown setting '" + name + "' (ramp, sine, linear)");
}

}  // namespace detail

inline int cmd_fit(const RunConfig& cfg, std::ostream& out) {
    const auto table = csv::Table::read(cfg.input);
    const Vector x = table.numeric(cfg.x_col), y = table.numeric(cfg.y_col);
    require(!cfg.output.empty(), ErrorCode::ConfigError, "fit: --output is required");
    const auto model = detail::build_model(x, cfg, KnotRule::SmoothSpline);

    out << "method=" << (cfg.method == Method::DirectLambda ? "lambda" : cfg.method == Method::GCV ? "gcv" : "reml") << '\n';
    const FitResult fit = [&] {
        if (cfg.method == Method::REML) {
            require(model.penalty.kind == PenaltyKind::OSullivan, ErrorCode::ConfigError,
                    "fit: REML needs an O'Sullivan penalty (not --knots eilers-marx)");
            const MixedModelFit m = RemlSmoother(x, y, model.spec, model.penalty).fit();
            out << detail::key_value("sigma_u2", m.sigma_u2) << detail::key_value("sigma_eps2", m.sigma_eps2)
                << detail::key_value("reml", m.reml_value) << "boundary_warning=" << (m.boundary_warning ? 1 : 0) << '\n';
            return m.curve;
        }
        const PenalizedProblem problem(x, y, model.spec, model.penalty);
        FitResult f = cfg.method == Method::GCV ? gcv_select(problem, default_gcv_grid()).fit : problem.fit(cfg.lambda);
        out << detail::key_value("gcv", f.gcv());
        return f;
    }();
    out << detail::key_value("lambda", fit.lambda) << "lambda_scale=standardized\n"
        << detail::key_value("edf", fit.edf) << detail::key_value("rss", fit.rss) << "n=" << x.size() << '\n'
        << "num_knots=" << model.spec.knots.num_interior() << '\n';

    detail::write_curve(fit, cfg.grid_size, cfg.output);
    const std::string res_path = cfg.residuals.empty() ? detail::sibling(cfg.output, "_residuals") : cfg.residuals;
    auto res = detail::open_output(res_path);
    Vector r(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - fit.fitted[i];
    csv::write_columns(res, {"x", "y", "fitted", "residual"}, {x, y, fit.fitted, r});
    return 0;
}

inline int cmd_fit_additive(const RunConfig& cfg, std::ostream& out) {
    const auto table = csv::Table::read(cfg.input);
    require(!cfg.group_col.empty(), ErrorCode::ConfigError, "fit-additive: --group-col is required");
    const Vector x = table.numeric(cfg.x_col), y = table.numeric(cfg.y_col);
    const std::vector<long> group = table.integer(cfg.group_col);
    Matrix cov(x.size(), cfg.covariates.size());
    for (std::size_t j = 0; j < cfg.covariates.size(); ++j) {
        const Vector c = table.numeric(cfg.covariates[j]);
        for (std::size_t i = 0; i < c.size(); ++i) cov(i, j) = c[i];
    }
    require(cfg.knots == KnotChoice::Quantile || cfg.knots == KnotChoice::Equal, ErrorCode::ConfigError,
            "fit-additive: --knots must be quantile or equal");
    const auto model = detail::build_model(x, cfg, KnotRule::RWC);
    const MixedModelFit m = fit_additive_mixed(y, x, cov, group, model.spec);

    std::vector<std::string> names;
    for (std::size_t j = 0; j < static_cast<std::size_t>(model.spec.order()); ++j)
        names.push_back(j == 0 ? "intercept" : j == 1 ? cfg.x_col : cfg.x_col + "^" + std::to_string(j));
    for (const auto& c : cfg.covariates) names.push_back(c);
    for (std::size_t j = 0; j < names.size() && j < m.beta.size(); ++j) {
        out << detail::key_value("beta." + names[j], m.beta[j]) << detail::key_value("se." + names[j], m.beta_se[j])
            << detail::key_value("ci95_lower." + names[j], m.beta[j] - 1.96 * m.beta_se[j])
            << detail::key_value("ci95_upper." + names[j], m.beta[j] + 1.96 * m.beta_se[j]);
    }
    out << detail::key_value("sigma_subject", std::sqrt(m.sigma_subject2)) << detail::key_value("sigma_u", std::sqrt(m.sigma_u2))
        << detail::key_value("sigma_eps", std::sqrt(m.sigma_eps2)) << detail::key_value("lambda", m.lambda)
        << detail::key_value("lambda_subject", m.lambda_subject) << detail::key_value("reml", m.reml_value)
        << "groups=" << m.subject_ids.size() << '\n'
        << "num_knots=" << model.spec.knots.num_interior() << '\n'
        << "iterations=" << m.iterations << '\n'
        << "boundary_warning=" << (m.boundary_warning ? 1 : 0) << '\n';
    if (!cfg.output.empty()) detail::write_curve(m.curve, cfg.grid_size, cfg.output);
    return 0;
}

struct PenaltyConfig {
    int order = 2;
    std::size_t num_knots = 5;
    double a = 0.0;
    double b = 1.0;
    KnotChoice knots = KnotChoice::Equal;
    std::vector<double> interior;
    bool bands = false;
    double normalize_center = 0.0;
    bool standardized = false;
    std::string output;
};

inline int cmd_penalty(const PenaltyConfig& cfg, std::ostream& out) {
    PenaltyMatrix pen;
    if (cfg.knots == KnotChoice::EilersMarx) {
        pen = pspline_penalty(eilers_marx_knots(cfg.a, cfg.b, cfg.num_knots, cfg.order).num_basis(), cfg.order);
    } else {
        require(cfg.knots == KnotChoice::Equal, ErrorCode::ConfigError, "penalty: --knots must be equal or eilers-marx");
        const Vector interior = cfg.interior.empty() ? equal_interior_knots(cfg.a, cfg.b, cfg.num_knots) : cfg.interior;
        pen = osullivan_penalty(make_knots(cfg.a, cfg.b, interior, cfg.order));
    }
    const Matrix values = cfg.standardized ? pen.standardized() : pen.values;

    std::ofstream file;
    if (!cfg.output.empty()) file = detail::open_output(cfg.output);
    std::ostream& dst = cfg.output.empty() ? out : file;
    if (cfg.bands) {
        const std::size_t half = pen.bandwidth;
        const std::size_t center = values.rows() / 2;
        require(center >= half && center + half < values.rows(), ErrorCode::ConfigError,
                "penalty: too few knots for an interior band row");
        Matrix row(1, 2 * half + 1);
        const Vector band = band_row(values, center, half, cfg.normalize_center);
        for (std::size_t j = 0; j < band.size(); ++j) row(0, j) = band[j];
        csv::write_matrix(dst, row);
    } else {
        csv::write_matrix(dst, values);
    }
    return 0;
}

struct StudyConfig {
    std::string setting = "ramp";
    double sigma = -1.0;  ///< negative: the setting's default
    std::size_t n = 200;
    std::size_t reps = 50;
    std::size_t num_knots = 100;
    std::uint64_t seed = 1;
    std::size_t grid_size = 101;
    double percentile = 0.9;
    std::string output;
    std::string summary;
    std::string curves;
};

inline int cmd_simulate(const StudyConfig& cfg, std::ostream& out) {
    require(!cfg.output.empty(), ErrorCode::ConfigError, "simulate: --output is required");
    require(cfg.reps >= 1, ErrorCode::ConfigError, "simulate: --reps must be at least 1");
    const SimSetting s = detail::make_setting(cfg.setting, cfg.sigma, cfg.n);
    Vector rep, x, y, truth;
    for (std::size_t r = 0; r < cfg.reps; ++r) {
        auto rng = replication_rng(cfg.seed, r);
        const SimData d = simulate(s, rng);
        for (std::size_t i = 0; i < d.x.size(); ++i) {
            rep.push_back(static_cast<double>(r));
            x.push_back(d.x[i]);
            y.push_back(d.y[i]);
            truth.push_back(s.f(d.x[i]));
        }
    }
    auto file = detail::open_output(cfg.output);
    csv::write_columns(file, {"rep", "x", "y", "f"}, {rep, x, y, truth});
    out << "setting=" << s.name << '\n' << detail::key_value("sigma", s.sigma) << "n=" << s.n << '\n' << "reps=" << cfg.reps << '\n';
    return 0;
}

inline int cmd_compare(const StudyConfig& cfg, std::ostream& out, std::ostream& err) {
    require(!cfg.output.empty(), ErrorCode::ConfigError, "compare: --output is required");
    const SimSetting s = detail::make_setting(cfg.setting, cfg.sigma, cfg.n);
    ComparisonOptions opt;
    opt.reps = cfg.reps;
    opt.num_knots = cfg.num_knots;
    opt.seed = cfg.seed;
    const ComparisonResult res = run_comparison(s, opt);
    for (const auto& sk : res.skipped) err << "skipped replication " << sk.rep << ": " << sk.reason << '\n';
    if (res.reps.empty()) throw Error(ErrorCode::SelectionFailure, "compare: every replication was skipped");

    {
        auto file = detail::open_output(cfg.output);
        file << "rep,region,method,discrepancy,edf\n";
        for (const auto& r : res.reps)
            for (Region g : all_regions)
                for (Estimator e : {Estimator::OSpline, Estimator::PSpline}) {
                    const bool o = e == Estimator::OSpline;
                    file << r.rep << ',' << region_name(g) << ',' << estimator_name(e) << ','
                         << csv::format(o ? r.d_o[g] : r.d_p[g]) << ',' << csv::format(o ? r.ospline.edf : r.pspline.edf)
                         << '\n';
                }
    }
    {
        const std::string path = cfg.summary.empty() ? detail::sibling(cfg.output, "_summary") : cfg.summary;
        auto file = detail::open_output(path);
        file << "region,reps,median_d_ospline,median_d_pspline,w_plus,p_less,p_greater,p_two_sided,test\n";
        for (const auto& sm : summarize(res))
            file << region_name(sm.region) << ',' << sm.test.n_used << ',' << csv::format(sm.median_d_o) << ','
                 << csv::format(sm.median_d_p) << ',' << csv::format(sm.test.statistic) << ','
                 << csv::format(sm.test.p_less) << ',' << csv::format(sm.test.p_greater) << ','
                 << csv::format(sm.test.p_two_sided) << ','
                 << (sm.test.method == WilcoxonMethod::Exact ? "exact" : "normal") << '\n';
    }
    if (!cfg.curves.empty()) {
        auto file = detail::open_output(cfg.curves);
        file << "exemplar,rep,x,truth,reference,ospline,pspline\n";
        const Vector grid = detail::linspace(res.bounds.a, res.bounds.b, cfg.grid_size);
        for (Estimator e : {Estimator::OSpline, Estimator::PSpline}) {
            const std::size_t rep = percentile_exemplar(res, e, cfg.percentile);
            const auto it = std::find_if(res.reps.begin(), res.reps.end(), [&](const Replication& r) { return r.rep == rep; });
            const Vector fs = predict(it->reference, grid), fo = predict(it->ospline, grid), fp = predict(it->pspline, grid);
            for (std::size_t i = 0; i < grid.size(); ++i)
                file << estimator_name(e) << ',' << rep << ',' << csv::format(grid[i]) << ',' << csv::format(s.f(grid[i]))
                     << ',' << csv::format(fs[i]) << ',' << csv::format(fo[i]) << ',' << csv::format(fp[i]) << '\n';
        }
    }
    out << "setting=" << s.name << '\n'
        << "reps=" << res.reps.size() << '\n'
        << "skipped=" << res.skipped.size() << '\n';
    return 0;
}

/// Runs the driver on `args` (without the program name).
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"O'Sullivan penalized splines: fitting, penalties and simulation studies", "osul"};
    app.require_subcommand(1);

    RunConfig fit_cfg;
    std::string method = "gcv", knots = "quantile";
    auto* fit = app.add_subcommand("fit", "Penalized spline fit of one response on one predictor");
    fit->add_option("--input", fit_cfg.input, "CSV file with a header row")->required();
    fit->add_option("--x-col", fit_cfg.x_col, "Predictor column")->capture_default_str();
    fit->add_option("--y-col", fit_cfg.y_col, "Response column")->capture_default_str();
    fit->add_option("--method", method, "lambda, gcv or reml")->capture_default_str();
    fit->add_option("--lambda", fit_cfg.lambda, "Smoothing parameter for --method lambda (standardized scale)");
    fit->add_option("--order", fit_cfg.order, "Penalty order m; the spline degree is 2m-1")->capture_default_str();
    fit->add_option("--knots", knots, "quantile, equal, eilers-marx or maximal")->capture_default_str();
    fit->add_option("--num-knots", fit_cfg.num_knots, "Number of interior knots (default: by sample size)");
    fit->add_option("--grid-size", fit_cfg.grid_size, "Points in the output curve")->capture_default_str();
    fit->add_option("--output", fit_cfg.output, "Curve CSV (grid_x, fitted, deriv2)");
    fit->add_option("--residuals", fit_cfg.residuals, "Per-observation CSV (default: <output>_residuals.csv)");

    RunConfig add_cfg;
    std::string add_knots = "quantile";
    auto* additive = app.add_subcommand("fit-additive", "Additive mixed model with subject random intercepts");
    additive->add_option("--input", add_cfg.input, "CSV file with a header row")->required();
    additive->add_option("--x-col", add_cfg.x_col, "Column entering through the spline")->capture_default_str();
    additive->add_option("--y-col", add_cfg.y_col, "Response column")->capture_default_str();
    additive->add_option("--group-col", add_cfg.group_col, "Integer subject id column")->required();
    additive->add_option("--covariate", add_cfg.covariates, "Linear covariate column (repeatable)")->delimiter(',');
    additive->add_option("--order", add_cfg.order, "Penalty order m")->capture_default_str();
    additive->add_option("--knots", add_knots, "quantile or equal")->capture_default_str();
    additive->add_option("--num-knots", add_cfg.num_knots, "Number of interior knots (default: min(n_unique/4, 35))");
    additive->add_option("--grid-size", add_cfg.grid_size, "Points in the output curve")->capture_default_str();
    additive->add_option("--output", add_cfg.output, "Curve CSV for the smooth component");

    PenaltyConfig pen_cfg;
    std::string pen_knots = "equal";
    auto* penalty = app.add_subcommand("penalty", "Penalty matrix as a headerless CSV");
    penalty->add_option("--order", pen_cfg.order, "Penalty order m (1..4)")->capture_default_str();
    penalty->add_option("--num-knots", pen_cfg.num_knots, "Number of equally spaced interior knots")->capture_default_str();
    penalty->add_option("--a", pen_cfg.a, "Lower boundary")->capture_default_str();
    penalty->add_option("--b", pen_cfg.b, "Upper boundary")->capture_default_str();
    penalty->add_option("--knots", pen_knots, "equal or eilers-marx (difference penalty)")->capture_default_str();
    penalty->add_option("--interior", pen_cfg.interior, "Explicit interior knots, comma separated")->delimiter(',');
    penalty->add_flag("--bands", pen_cfg.bands, "Emit the central band row instead of the matrix");
    penalty->add_option("--normalize-center", pen_cfg.normalize_center, "Rescale the band row to this central value");
    penalty->add_flag("--standardized", pen_cfg.standardized, "Multiply by (b - a)^(2m-1)");
    penalty->add_option("--output", pen_cfg.output, "Output file (default: standard output)");

    StudyConfig sim_cfg;
    auto* sim = app.add_subcommand("simulate", "Draw data sets from a study setting");
    StudyConfig cmp_cfg;
    auto* cmp = app.add_subcommand("compare", "O-spline versus P-spline comparison against the smoothing spline");
    for (auto [sub, c] : {std::pair{sim, &sim_cfg}, std::pair{cmp, &cmp_cfg}}) {
        sub->add_option("--setting", c->setting, "ramp, sine or linear")->capture_default_str();
        sub->add_option("--sigma", c->sigma, "Noise standard deviation (default: per setting)");
        sub->add_option("--n", c->n, "Observations per data set")->capture_default_str();
        sub->add_option("--seed", c->seed, "Random seed")->capture_default_str();
        sub->add_option("--output", c->output, "Output CSV")->required();
    }
    sim->add_option("--reps", sim_cfg.reps, "Number of data sets")->default_val(1);
    cmp->add_option("--reps", cmp_cfg.reps, "Replications")->capture_default_str();
    cmp->add_option("--num-knots", cmp_cfg.num_knots, "Interior knots of the O- and P-splines")->capture_default_str();
    cmp->add_option("--summary", cmp_cfg.summary, "Wilcoxon summary CSV (default: <output>_summary.csv)");
    cmp->add_option("--curves", cmp_cfg.curves, "Plot-ready curves of the percentile exemplars");
    cmp->add_option("--percentile", cmp_cfg.percentile, "Exemplar percentile of d_total")->capture_default_str();
    cmp->add_option("--grid-size", cmp_cfg.grid_size, "Points per exemplar curve")->capture_default_str();

    static const std::map<std::string, KnotChoice> knot_names{{"quantile", KnotChoice::Quantile},
                                                              {"equal", KnotChoice::Equal},
                                                              {"eilers-marx", KnotChoice::EilersMarx},
                                                              {"maximal", KnotChoice::Maximal}};
    auto knot_choice = [](const std::string& name) {
        const auto it = knot_names.find(name);
        if (it == knot_names.end()) throw Error(ErrorCode::ConfigError, "unknown knot rule '" + name + "'");
        return it->second;
    };

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (fit->parsed()) {
            if (method == "lambda")
                fit_cfg.method = Method::DirectLambda;
            else if (method == "gcv")
                fit_cfg.method = Method::GCV;
            else if (method == "reml")
                fit_cfg.method = Method::REML;
            else
                throw Error(ErrorCode::ConfigError, "unknown method '" + method + "' (lambda, gcv, reml)");
            if (fit_cfg.method == Method::DirectLambda && fit->count("--lambda") == 0)
                throw Error(ErrorCode::ConfigError, "--method lambda needs --lambda");
            fit_cfg.knots = knot_choice(knots);
            return cmd_fit(fit_cfg, out);
        }
        if (additive->parsed()) {
            add_cfg.knots = knot_choice(add_knots);
            add_cfg.method = Method::REML;
            return cmd_fit_additive(add_cfg, out);
        }
        if (penalty->parsed()) {
            pen_cfg.knots = knot_choice(pen_knots);
            return cmd_penalty(pen_cfg, out);
        }
        if (sim->parsed()) return cmd_simulate(sim_cfg, out);
        if (cmp->parsed()) return cmd_compare(cmp_cfg, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return is_numerical(e.code()) ? 3 : 2;
    }
    return 2;
}

}  // namespace osul::cli
