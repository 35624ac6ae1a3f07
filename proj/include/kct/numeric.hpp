#ifndef KCT_NUMERIC_HPP
#define KCT_NUMERIC_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "kct/errors.hpp"

namespace kct {

// Pairwise (cascade) summation; this is the documented reduction policy for
// every Monte Carlo mean in the toolkit.
inline double pairwise_sum(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n <= 16) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return pairwise_sum(xs) / static_cast<double>(xs.size());
}

// Unbiased sample variance.
inline double variance(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n < 2) return 0.0;
    const double m = mean(xs);
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = (xs[i] - m) * (xs[i] - m);
    return pairwise_sum(sq) / static_cast<double>(n - 1);
}

// Standard error of the sample mean.
inline double standard_error(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    return std::sqrt(variance(xs) / static_cast<double>(xs.size()));
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

// Ordinary least squares y = intercept + slope * x.
// Throws DegenerateFit when all abscissae coincide.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) throw DegenerateFit("linear_fit: need >= 2 paired samples");
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw DegenerateFit("linear_fit: zero variance in abscissae");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = (syy == 0.0) ? 1.0 : (sxy * sxy) / (sxx * syy);
    return fit;
}

// Relative spread (max-min)/min of a set of positive values; the stability
// measure used by the ratio-style inequality reports.
inline double relative_spread(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    double lo = xs[0], hi = xs[0];
    for (double x : xs) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (lo <= 0.0) return std::numeric_limits<double>::infinity();
    return (hi - lo) / lo;
}

}  // namespace kct

#endif  // KCT_NUMERIC_HPP
