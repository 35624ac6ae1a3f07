#ifndef KCT_QUADRATURE_HPP
#define KCT_QUADRATURE_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace kct {

struct GaussRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

// Gauss-Legendre nodes/weights by Newton iteration on P_n.
inline GaussRule gauss_legendre(int n) {
    GaussRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[static_cast<std::size_t>(i)] = -x;
        rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        rule.weights[static_cast<std::size_t>(i)] = w;
        rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
    return rule;
}

// integral of f over [a, b] with an n-point rule
inline double gauss_integrate(const std::function<double(double)>& f, double a, double b, int n) {
    const GaussRule rule = gauss_legendre(n);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double s = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        s += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return half * s;
}

}  // namespace kct

#endif  // KCT_QUADRATURE_HPP
