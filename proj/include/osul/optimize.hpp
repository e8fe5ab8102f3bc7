#pragma once

// Derivative-free minimizers used for smoothing-parameter and
// variance-component selection.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

namespace osul {

struct ScalarMinimum {
    double x = 0.0;
    double value = 0.0;
};

/// Golden-section search for a minimum of f on [lo, hi], stopping once the
/// bracket is narrower than tol.
template <class F>
ScalarMinimum golden_section_minimize(F&& f, double lo, double hi, double tol) {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    return fc < fd ? ScalarMinimum{c, fc} : ScalarMinimum{d, fd};
}

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Nelder–Mead simplex minimization. Converges when the largest distance
/// from the best vertex to any other vertex drops below `diameter_tol`.
template <class F>
NelderMeadResult nelder_mead(F&& f, std::vector<double> start, double initial_step, double diameter_tol,
                             int max_iter) {
    const std::size_t n = start.size();
    std::vector<std::vector<double>> simplex(n + 1, start);
    for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += initial_step;
    std::vector<double> values(n + 1);
    for (std::size_t i = 0; i <= n; ++i) values[i] = f(simplex[i]);

    auto diameter = [&](std::size_t best) {
        double d = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += (simplex[i][k] - simplex[best][k]) * (simplex[i][k] - simplex[best][k]);
            d = std::max(d, std::sqrt(s));
        }
        return d;
    };

    std::vector<std::size_t> order(n + 1);
    NelderMeadResult res;
    for (int iter = 0; iter < max_iter; ++iter) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
        res.iterations = iter;
        if (diameter(best) < diameter_tol) {
            res.converged = true;
            break;
        }
        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / static_cast<double>(n);
        }
        auto along = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t k = 0; k < n; ++k) p[k] = centroid[k] + t * (simplex[worst][k] - centroid[k]);
            return p;
        };
        auto reflected = along(-1.0);
        const double fr = f(reflected);
        if (fr < values[best]) {
            auto expanded = along(-2.0);
            const double fe = f(expanded);
            if (fe < fr) {
                simplex[worst] = std::move(expanded);
                values[worst] = fe;
            } else {
                simplex[worst] = std::move(reflected);
                values[worst] = fr;
            }
        } else if (fr < values[second]) {
            simplex[worst] = std::move(reflected);
            values[worst] = fr;
        } else {
            const bool outside = fr < values[worst];
            auto contracted = along(outside ? -0.5 : 0.5);
            const double fc = f(contracted);
            if (fc < (outside ? fr : values[worst])) {
                simplex[worst] = std::move(contracted);
                values[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t k = 0; k < n; ++k)
                        simplex[i][k] = simplex[best][k] + 0.5 * (simplex[i][k] - simplex[best][k]);
                    values[i] = f(simplex[i]);
                }
            }
        }
    }
    const auto best = static_cast<std::size_t>(std::distance(values.begin(), std::min_element(values.begin(), values.end())));
    res.x = simplex[best];
    res.value = values[best];
    if (!res.converged) res.converged = diameter(best) < diameter_tol;
    return res;
}

}  // namespace osul
