#pragma once

// Independent reference computations for the tests. Nothing here calls the
// library's own quadrature or walk code.

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

inline double Phi(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

/// Mass at 0 of Brownian motion from x stopped at 0, after time a.
inline double atom(double x, double a) { return 2.0 * Phi(-x / std::sqrt(a)); }

/// Sub-density on (0, ∞) of the same variable, by the method of images.
inline double image_density(double y, double x, double a) {
    const double s = std::sqrt(a);
    return (phi((y - x) / s) - phi((y + x) / s)) / s;
}

/// Adaptive Gauss–Kronrod integral of u against the image density on (0, ∞).
inline double kronrod_part(const std::function<double(double)>& u, double x, double a) {
    if (x <= 0.0) return 0.0;
    auto f = [&](double y) { return u(y) * image_density(y, x, a); };
    const double top = x + 40.0 * std::sqrt(a);
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, top, 15, 1e-13);
}

/// E u(ξ) for absorbed Brownian motion, split at the kinks of u for accuracy.
inline double absorbed_mean(const std::function<double(double)>& u, double x, double a,
                            const std::vector<double>& kinks = {}) {
    if (x <= 0.0) return u(0.0);
    auto f = [&](double y) { return u(y) * image_density(y, x, a); };
    std::vector<double> cuts{0.0};
    for (double k : kinks) {
        if (k > 0.0) cuts.push_back(k);
    }
    cuts.push_back(std::max(cuts.back(), x) + 40.0 * std::sqrt(a));
    double total = atom(x, a) * u(0.0);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, cuts[i], cuts[i + 1], 15, 1e-13);
    }
    return total;
}

/// Adaptive Gauss–Kronrod integral of f over [lo, hi].
inline double integrate(const std::function<double(double)>& f, double lo, double hi) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-13);
}

/// Average of row[X_L] over all 2^L sign sequences of a walk from X absorbed at 0.
inline double walk_enumeration(const std::vector<double>& row, long X, int L) {
    double total = 0.0;
    const unsigned long count = 1UL << L;
    for (unsigned long signs = 0; signs < count; ++signs) {
        long pos = X;
        for (int j = 0; j < L; ++j) {
            if (pos == 0) break;
            pos += ((signs >> j) & 1UL) ? 1 : -1;
        }
        total += row[static_cast<std::size_t>(pos)];
    }
    return total / static_cast<double>(count);
}

}  // namespace oracle
