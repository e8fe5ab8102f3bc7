#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "osul/splinebasis.hpp"
#include "oracles.hpp"

using namespace osul;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an osul::Error";
    return ErrorCode::ConfigError;
}

KnotSequence random_knots(std::mt19937_64& rng, std::size_t k, int m, double a = -1.0, double b = 2.0) {
    std::uniform_real_distribution<double> u(a, b);
    Vector interior;
    while (interior.size() < k) {
        const double v = u(rng);
        if (v > a && v < b) interior.push_back(v);
        interior = sorted_unique(interior);
    }
    return make_knots(a, b, interior, m);
}

}  // namespace

TEST(MakeKnots, NoInteriorKnotsGivesBernsteinLayout) {
    const auto k = make_knots(0.0, 1.0, Vector{}, 2);
    EXPECT_EQ(k.full(), (Vector{0, 0, 0, 0, 1, 1, 1, 1}));
    EXPECT_EQ(k.num_basis(), 4u);
}

TEST(MakeKnots, LinearSplines) {
    const auto k = make_knots(0.0, 1.0, Vector{0.5}, 1);
    EXPECT_EQ(k.full(), (Vector{0, 0, 0.5, 1, 1}));
    EXPECT_EQ(k.num_basis(), 3u);
}

TEST(MakeKnots, TwentyInteriorKnotsGiveTwentyFourCubics) {
    const Vector interior = equal_interior_knots(85.0, 130.0, 20);
    const auto k = make_knots(85.0, 130.0, interior, 2);
    EXPECT_EQ(k.full().size(), 28u);
    EXPECT_EQ(BasisSpec(k).num_basis(), 24u);
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(k.full()[i], 85.0);
        EXPECT_EQ(k.full()[27 - i], 130.0);
    }
    EXPECT_TRUE(std::is_sorted(k.full().begin(), k.full().end()));
}

TEST(MakeKnots, Errors) {
    EXPECT_EQ(code_of([] { make_knots(0, 1, Vector{0.6, 0.4}, 2); }), ErrorCode::InvalidKnots);
    EXPECT_EQ(code_of([] { make_knots(0, 1, Vector{0.5, 0.5}, 2); }), ErrorCode::InvalidKnots);
    EXPECT_EQ(code_of([] { make_knots(0, 1, Vector{1.5}, 2); }), ErrorCode::InvalidKnots);
    EXPECT_EQ(code_of([] { make_knots(0, 1, Vector{0.0}, 2); }), ErrorCode::InvalidKnots);
    EXPECT_EQ(code_of([] { make_knots(1, 0, Vector{}, 2); }), ErrorCode::InvalidKnots);
    EXPECT_EQ(code_of([] { make_knots(0, 1, Vector{}, 0); }), ErrorCode::InvalidOrder);
}

TEST(QuantileKnots, MedianOfSymmetricGrid) {
    Vector x(11);
    std::iota(x.begin(), x.end(), 1.0);
    const Vector k = quantile_knots(x, 1);
    ASSERT_EQ(k.size(), 1u);
    EXPECT_DOUBLE_EQ(k[0], 6.0);
}

TEST(QuantileKnots, MatchesOrderStatisticOracle) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vector x(200);
    for (double& v : x) v = u(rng);
    const Vector k = quantile_knots(x, 20);
    ASSERT_EQ(k.size(), 20u);
    for (std::size_t j = 0; j < 20; ++j)
        EXPECT_NEAR(k[j], oracle::quantile7(x, static_cast<double>(j + 1) / 21.0), 1e-14);
}

TEST(QuantileKnots, UsesUniqueValuesOnly) {
    // heavy duplication at 0 must not drag the knots
    Vector x{0, 0, 0, 0, 0, 0, 1, 2, 3, 4};
    const Vector k = quantile_knots(x, 3);
    EXPECT_EQ(k, (Vector{1, 2, 3}));
}

TEST(QuantileKnots, TooFewUniqueValues) {
    EXPECT_EQ(code_of([] { quantile_knots(Vector{1, 1, 2, 2}, 1); }), ErrorCode::InsufficientData);
    EXPECT_EQ(code_of([] { quantile_knots(Vector{}, 0); }), ErrorCode::InsufficientData);
}

TEST(DefaultNumKnots, TableAnchors) {
    EXPECT_EQ(default_num_knots(200, 200, KnotRule::SmoothSpline), 100u);
    EXPECT_EQ(default_num_knots(800, 800, KnotRule::SmoothSpline), 140u);
    EXPECT_EQ(default_num_knots(30, 30, KnotRule::SmoothSpline), 30u);
    EXPECT_EQ(default_num_knots(50, 50, KnotRule::SmoothSpline), 50u);
    EXPECT_EQ(default_num_knots(3200, 3200, KnotRule::SmoothSpline), 200u);
    // 200 + 32^{1/5} = 202
    EXPECT_EQ(default_num_knots(3232, 3232, KnotRule::SmoothSpline), 202u);
    // log-log midpoint between (200, 100) and (800, 140): sqrt(100·140)
    EXPECT_EQ(default_num_knots(400, 400, KnotRule::SmoothSpline),
              static_cast<std::size_t>(std::lround(std::sqrt(100.0 * 140.0))));
}

TEST(DefaultNumKnots, RuppertWandCarrollRule) {
    EXPECT_EQ(default_num_knots(534, 534, KnotRule::RWC), 35u);
    EXPECT_EQ(default_num_knots(100, 60, KnotRule::RWC), 15u);
    EXPECT_EQ(code_of([] { default_num_knots(0, 0, KnotRule::SmoothSpline); }), ErrorCode::InvalidInput);
}

TEST(EvalBasis, PartitionOfUnityAndNonNegativity) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 2.0);
    for (int m = 1; m <= 4; ++m) {
        for (std::size_t k : {0u, 1u, 5u, 20u}) {
            const BasisSpec spec(random_knots(rng, k, m));
            Vector pts(50);
            for (double& v : pts) v = u(rng);
            pts.push_back(-1.0);
            pts.push_back(2.0);
            pts.insert(pts.end(), spec.knots.interior().begin(), spec.knots.interior().end());
            const auto dm = eval_basis(spec, pts, 0);
            for (std::size_t i = 0; i < dm.rows(); ++i) {
                double s = 0.0;
                for (double v : dm.values.row(i)) {
                    s += v;
                    EXPECT_GE(v, -1e-15);
                }
                EXPECT_NEAR(s, 1.0, 1e-12);
            }
        }
    }
}

TEST(EvalBasis, BernsteinEndpoint) {
    const BasisSpec spec(make_knots(0, 1, Vector{}, 2));
    const auto dm = eval_basis(spec, Vector{0.0, 1.0}, 0);
    EXPECT_EQ(Vector(dm.values.row(0).begin(), dm.values.row(0).end()), (Vector{1, 0, 0, 0}));
    EXPECT_EQ(Vector(dm.values.row(1).begin(), dm.values.row(1).end()), (Vector{0, 0, 0, 1}));
}

TEST(EvalBasis, LocalSupport) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1.0, 2.0);
    for (int m = 1; m <= 3; ++m) {
        const BasisSpec spec(random_knots(rng, 8, m));
        const Vector& t = spec.knots.full();
        Vector pts(200);
        for (double& v : pts) v = u(rng);
        const auto dm = eval_basis(spec, pts, 0);
        std::size_t width = 2 * static_cast<std::size_t>(m);
        for (std::size_t i = 0; i < dm.rows(); ++i) {
            std::size_t nonzero = 0;
            for (std::size_t j = 0; j < dm.cols(); ++j) {
                if (dm.values(i, j) != 0.0) {
                    ++nonzero;
                    EXPECT_GE(pts[i], t[j]);
                    EXPECT_LE(pts[i], t[j + width]);
                }
            }
            EXPECT_LE(nonzero, width);
        }
    }
}

TEST(EvalBasis, MatchesTextbookRecursion) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1.0, 2.0);
    for (int m = 1; m <= 4; ++m) {
        const BasisSpec spec(random_knots(rng, 6, m));
        const Vector& t = spec.knots.full();
        const int p = spec.degree();
        for (int d = 0; d <= p; ++d) {
            Vector pts(20);
            for (double& v : pts) v = u(rng);
            const auto dm = eval_basis(spec, pts, d);
            for (std::size_t i = 0; i < pts.size(); ++i) {
                const std::size_t span = oracle::span_of(t, p, pts[i]);
                for (std::size_t j = 0; j < dm.cols(); ++j) {
                    const double ref = oracle::bspline_piece_deriv(t, j, p, d, span, pts[i]);
                    EXPECT_NEAR(dm.values(i, j), ref, 1e-9 * (1.0 + std::abs(ref))) << "m=" << m << " d=" << d;
                }
            }
        }
    }
}

TEST(EvalBasis, SecondDerivativeMatchesFiniteDifferences) {
    const BasisSpec spec(make_knots(0, 1, equal_interior_knots(0, 1, 6), 2));
    const double h = 1e-5;
    for (double x : {0.05, 0.23, 0.5 + 1e-3, 0.61, 0.93}) {
        const auto d2 = eval_basis(spec, Vector{x}, 2);
        const auto f = eval_basis(spec, Vector{x - h, x, x + h}, 0);
        for (std::size_t j = 0; j < spec.num_basis(); ++j) {
            const double fd = (f.values(0, j) - 2.0 * f.values(1, j) + f.values(2, j)) / (h * h);
            EXPECT_NEAR(d2.values(0, j), fd, 1e-4 * std::max(1.0, std::abs(d2.values(0, j))));
        }
    }
}

TEST(EvalBasis, DerivativeConsistencyAwayFromKnots) {
    std::mt19937_64 rng(4);
    const double h = 1e-6;
    for (int m = 2; m <= 4; ++m) {
        const BasisSpec spec(random_knots(rng, 5, m, 0.0, 1.0));
        const Vector& knots = spec.knots.full();
        for (int d = 1; d <= spec.degree(); ++d) {
            for (double x : {0.11, 0.37, 0.52, 0.78}) {
                bool near_knot = false;
                for (double t : knots) near_knot |= std::abs(t - x) < 1e-4;
                if (near_knot) continue;
                const auto hi = eval_basis(spec, Vector{x + h}, d - 1);
                const auto lo = eval_basis(spec, Vector{x - h}, d - 1);
                const auto dd = eval_basis(spec, Vector{x}, d);
                const double scale = dd.values.max_abs();
                for (std::size_t j = 0; j < spec.num_basis(); ++j) {
                    const double fd = (hi.values(0, j) - lo.values(0, j)) / (2.0 * h);
                    EXPECT_NEAR(dd.values(0, j), fd, 1e-4 * std::max(1.0, scale));
                }
            }
        }
    }
}

TEST(EvalBasis, KnotConventionRightLimitExceptAtUpperBoundary) {
    // linear splines: derivative jumps at every knot
    const BasisSpec spec(make_knots(0, 1, Vector{0.5}, 1));
    const auto d = eval_basis(spec, Vector{0.5, 1.0}, 1);
    // on [0.5, 1] the middle hat falls and the last one rises
    EXPECT_DOUBLE_EQ(d.values(0, 1), -2.0);
    EXPECT_DOUBLE_EQ(d.values(0, 2), 2.0);
    EXPECT_DOUBLE_EQ(d.values(1, 1), -2.0);
    EXPECT_DOUBLE_EQ(d.values(1, 2), 2.0);
}

TEST(EvalBasis, Errors) {
    const BasisSpec spec(make_knots(0, 1, Vector{0.5}, 2));
    EXPECT_EQ(code_of([&] { eval_basis(spec, Vector{0.5}, 4); }), ErrorCode::InvalidDerivative);
    EXPECT_EQ(code_of([&] { eval_basis(spec, Vector{1.5}, 0); }), ErrorCode::OutsideSupport);
    const auto ext = eval_basis(spec, Vector{1.5}, 0, true);
    double s = 0.0;
    for (double v : ext.values.row(0)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(ExtendedKnots, PartitionOfUnityOnDomain) {
    const auto k = make_extended_knots(0.0, 1.0, 4, 2);
    EXPECT_EQ(k.full().size(), 12u);
    EXPECT_NEAR(k.full().front(), -0.6, 1e-15);
    EXPECT_NEAR(k.full().back(), 1.6, 1e-15);
    const BasisSpec spec(k);
    EXPECT_EQ(spec.num_basis(), 8u);
    const auto dm = eval_basis(spec, Vector{0.0, 0.13, 0.5, 0.77, 1.0}, 0);
    for (std::size_t i = 0; i < dm.rows(); ++i) {
        double s = 0.0;
        for (double v : dm.values.row(i)) s += v;
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}
