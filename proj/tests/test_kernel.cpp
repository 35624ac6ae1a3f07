#include <doctest.h>

#include <cmath>
#include <thread>

#include "kct/kernel.hpp"
#include "kct/quadrature.hpp"

using namespace kct;

namespace {

// Fourier-multiplier oracle for the fractional Laplacian of exp(-x^2/2):
// (2/sqrt(2 pi)) int_0^inf xi^alpha exp(-xi^2/2) cos(x xi) dxi
double gaussian_pv_oracle(double x, double alpha) {
    return 2.0 / std::sqrt(2.0 * M_PI) *
           gauss_integrate(
               [&](double xi) {
                   return std::pow(xi, alpha) * std::exp(-0.5 * xi * xi) * std::cos(x * xi);
               },
               0.0, 40.0, 2000);
}

KernelSpec cauchy_spec() {
    // heavy algebraic tails need a wide torus for the 1e-4 mass budget
    KernelSpec spec;
    spec.alpha = 1.0;
    spec.d = 1;
    spec.extent = 32768.0;
    spec.n = 1 << 18;
    spec.method = KernelMethod::SpectralInversion;
    return spec;
}

KernelSpec gaussian_spec(KernelMethod method) {
    KernelSpec spec;
    spec.alpha = 2.0;
    spec.d = 1;
    spec.extent = 40.0;
    spec.n = 2048;
    spec.method = method;
    return spec;
}

}  // namespace

TEST_CASE("frac_laplacian_constant: closed values and the alpha = 2 pole") {
    CHECK(frac_laplacian_constant(1, 1.0) == doctest::Approx(1.0 / M_PI).epsilon(1e-13));
    CHECK(frac_laplacian_constant(2, 1.0) == doctest::Approx(1.0 / (2.0 * M_PI)).epsilon(1e-13));
    CHECK_THROWS_AS(frac_laplacian_constant(1, 2.0), DomainError);
    CHECK_THROWS_AS(frac_laplacian_constant(1, 0.0), DomainError);
    CHECK_THROWS_AS(frac_laplacian_constant(1, 2.5), DomainError);
}

TEST_CASE("fractional_laplacian_pv: constants annihilate") {
    const double v = fractional_laplacian_pv([](double) { return 3.0; }, 0.2, 1.0);
    CHECK(std::abs(v) < 1e-10);
}

TEST_CASE("fractional_laplacian_pv: Gaussian against the spectral oracle") {
    const auto gaussian = [](double x) { return std::exp(-0.5 * x * x); };
    for (double alpha : {0.6, 1.0, 1.4}) {
        const double got = fractional_laplacian_pv(gaussian, 0.0, alpha);
        CHECK(got == doctest::Approx(gaussian_pv_oracle(0.0, alpha)).epsilon(1e-6));
        // closed form at x = 0: (2/sqrt(2 pi)) 2^((alpha-1)/2) Gamma((alpha+1)/2)
        const double closed = 2.0 / std::sqrt(2.0 * M_PI) * std::pow(2.0, 0.5 * (alpha - 1.0)) *
                              std::tgamma(0.5 * (alpha + 1.0));
        CHECK(got == doctest::Approx(closed).epsilon(1e-6));
    }
    CHECK(fractional_laplacian_pv(gaussian, 0.7, 1.0) ==
          doctest::Approx(gaussian_pv_oracle(0.7, 1.0)).epsilon(1e-6));
}

TEST_CASE("fractional_laplacian_pv: unreachable tolerance raises QuadratureFailure") {
    PvQuadratureSpec quad;
    quad.rel_tol = 1e-16;  // below what node doubling can certify
    CHECK_THROWS_AS(
        fractional_laplacian_pv([](double x) { return std::exp(-0.5 * x * x); }, 0.0, 1.4, quad),
        QuadratureFailure);
}

TEST_CASE("fractional_laplacian_pv: linearity") {
    const auto f1 = [](double x) { return std::exp(-0.5 * x * x); };
    const auto f2 = [](double x) { return std::exp(-x * x); };
    const double a = 2.0, b = -0.7;
    const double lhs = fractional_laplacian_pv(
        [&](double x) { return a * f1(x) + b * f2(x); }, 0.3, 1.2);
    const double rhs = a * fractional_laplacian_pv(f1, 0.3, 1.2) +
                       b * fractional_laplacian_pv(f2, 0.3, 1.2);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
}

TEST_CASE("kernel_eval: closed-form point values") {
    const KernelEvaluation g = kernel_eval(gaussian_spec(KernelMethod::ClosedForm), 1.0);
    // center of the offset grid is index n/2, coordinate 0
    CHECK(g.values[static_cast<std::size_t>(g.spec.n) / 2] ==
          doctest::Approx(std::pow(4.0 * M_PI, -0.5)).epsilon(1e-14));
    CHECK(std::abs(g.mass - 1.0) <= g.spec.mass_tol);

    KernelSpec cf = cauchy_spec();
    cf.method = KernelMethod::ClosedForm;
    const KernelEvaluation c = kernel_eval(cf, 1.0);
    CHECK(c.values[static_cast<std::size_t>(c.spec.n) / 2] ==
          doctest::Approx(1.0 / M_PI).epsilon(1e-14));
    CHECK(std::abs(c.mass - 1.0) <= c.spec.mass_tol);
}

TEST_CASE("kernel_eval: spectral inversion matches the closed forms") {
    for (KernelSpec spec : {gaussian_spec(KernelMethod::SpectralInversion), cauchy_spec()}) {
        KernelSpec closed = spec;
        closed.method = KernelMethod::ClosedForm;
        const KernelEvaluation ks = kernel_eval(spec, 1.0);
        const KernelEvaluation kc = kernel_eval(closed, 1.0);
        double sup = 0.0;
        for (std::size_t j = 0; j < ks.values.size(); ++j)
            sup = std::max(sup, std::abs(ks.values[j] - kc.values[j]));
        CHECK(sup < 1e-6);
        CHECK(std::abs(ks.mass - 1.0) < 1e-12);  // exact for the spectral route
        CHECK(ks.min_value >= -1e-8);
    }
}

TEST_CASE("kernel_eval: mass deficit on an undersized grid") {
    KernelSpec tiny;
    tiny.alpha = 1.0;
    tiny.d = 1;
    tiny.extent = 32.0;
    tiny.n = 1024;
    tiny.method = KernelMethod::SpectralInversion;
    CHECK_THROWS_AS(kernel_eval(tiny, 1.0), MassDeficit);
    CHECK_THROWS_AS(kernel_eval(gaussian_spec(KernelMethod::ClosedForm), 0.0), ConfigError);
}

TEST_CASE("kernel_eval: d = 2 spectral matches the Gaussian product form") {
    KernelSpec spec;
    spec.alpha = 2.0;
    spec.d = 2;
    spec.extent = 30.0;
    spec.n = 128;
    spec.method = KernelMethod::SpectralInversion;
    const KernelEvaluation k = kernel_eval(spec, 0.5);
    const double norm = std::pow(4.0 * M_PI * 0.5, -1.0);
    double sup = 0.0;
    for (int i = 0; i < spec.n; ++i) {
        for (int j = 0; j < spec.n; ++j) {
            const double x = spec.coord(i), y = spec.coord(j);
            const double ref = norm * std::exp(-(x * x + y * y) / 2.0);
            sup = std::max(sup, std::abs(k.values[static_cast<std::size_t>(i * spec.n + j)] - ref));
        }
    }
    CHECK(sup < 1e-8);
    CHECK(std::abs(k.mass - 1.0) < 1e-12);
}

TEST_CASE("kernel_convolve: constants, spikes and grid mismatch") {
    const KernelSpec spec = gaussian_spec(KernelMethod::SpectralInversion);
    const KernelEvaluation k = kernel_eval(spec, 0.7);

    std::vector<double> ones(k.values.size(), 1.0);
    for (double v : kernel_convolve(k, ones)) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

    // delta-like spike recovers the kernel shape, circularly shifted
    std::vector<double> spike(k.values.size(), 0.0);
    const std::size_t j0 = static_cast<std::size_t>(spec.n) / 2 + 37;
    spike[j0] = 1.0 / spec.dx();
    const std::vector<double> conv = kernel_convolve(k, spike);
    for (std::size_t probe : {j0, j0 + 11, j0 - 23}) {
        const std::size_t shifted =
            (probe - j0 + static_cast<std::size_t>(spec.n) / 2) % static_cast<std::size_t>(spec.n);
        CHECK(conv[probe] == doctest::Approx(k.values[shifted]).epsilon(1e-9));
    }

    std::vector<double> wrong(k.values.size() - 1, 0.0);
    CHECK_THROWS_AS(kernel_convolve(k, wrong), GridMismatch);
}

TEST_CASE("semigroup identity K(t) * K(s) = K(t+s)") {
    // alpha = 2 via closed form, alpha = 1 via spectral inversion
    {
        const KernelSpec spec = gaussian_spec(KernelMethod::ClosedForm);
        const KernelEvaluation kt = kernel_eval(spec, 0.4);
        const KernelEvaluation ks = kernel_eval(spec, 0.6);
        const KernelEvaluation kts = kernel_eval(spec, 1.0);
        const std::vector<double> conv = kernel_convolve(kt, ks.values);
        double sup = 0.0;
        for (std::size_t j = 0; j < conv.size(); ++j)
            sup = std::max(sup, std::abs(conv[j] - kts.values[j]));
        CHECK(sup < 1e-6);
    }
    {
        const KernelSpec spec = cauchy_spec();
        const KernelEvaluation kt = kernel_eval(spec, 0.4);
        const KernelEvaluation ks = kernel_eval(spec, 0.6);
        const KernelEvaluation kts = kernel_eval(spec, 1.0);
        const std::vector<double> conv = kernel_convolve(kt, ks.values);
        double sup = 0.0;
        for (std::size_t j = 0; j < conv.size(); ++j)
            sup = std::max(sup, std::abs(conv[j] - kts.values[j]));
        CHECK(sup < 1e-6);
    }
    // interior alpha with a relaxed mass budget: the spectral route keeps the
    // semigroup identity to roundoff regardless of periodization
    for (double alpha : {0.5, 1.5}) {
        KernelSpec spec;
        spec.alpha = alpha;
        spec.d = 1;
        spec.extent = 400.0;
        spec.n = 4096;
        spec.method = KernelMethod::SpectralInversion;
        spec.mass_tol = 0.1;
        const KernelEvaluation kt = kernel_eval(spec, 0.3);
        const KernelEvaluation ks = kernel_eval(spec, 0.7);
        const KernelEvaluation kts = kernel_eval(spec, 1.0);
        const std::vector<double> conv = kernel_convolve(kt, ks.values);
        double sup = 0.0;
        for (std::size_t j = 0; j < conv.size(); ++j)
            sup = std::max(sup, std::abs(conv[j] - kts.values[j]));
        CHECK(sup < 1e-8);
    }
}

TEST_CASE("self-similar scaling K(t,x) = t^{-d/alpha} K(1, t^{-1/alpha} x)") {
    // periodizations coincide exactly when the second grid is rescaled by
    // t^{-1/alpha}, so this is a near-roundoff identity
    const double alpha = 1.5, t = 0.6;
    KernelSpec spec1;
    spec1.alpha = alpha;
    spec1.d = 1;
    spec1.extent = 200.0;
    spec1.n = 4096;
    spec1.method = KernelMethod::SpectralInversion;
    spec1.mass_tol = 0.01;
    KernelSpec spec2 = spec1;
    spec2.extent = spec1.extent * std::pow(t, -1.0 / alpha);

    const KernelEvaluation k1 = kernel_eval(spec1, t);
    const KernelEvaluation k2 = kernel_eval(spec2, 1.0);
    const double scale = std::pow(t, -1.0 / alpha);
    double sup = 0.0;
    for (std::size_t j = 0; j < k1.values.size(); ++j)
        sup = std::max(sup, std::abs(k1.values[j] - scale * k2.values[j]));
    CHECK(sup < 1e-9);
}

TEST_CASE("kernel cache: stable references under concurrent readers") {
    KernelCache cache;
    const KernelSpec spec = gaussian_spec(KernelMethod::ClosedForm);
    const KernelEvaluation* first = &cache.get(spec, 0.5);
    const KernelEvaluation* again = &cache.get(spec, 0.5);
    CHECK(first == again);
    CHECK(&cache.get(spec, 0.25) != first);

    std::vector<std::thread> readers;
    std::vector<const KernelEvaluation*> seen(8, nullptr);
    for (int i = 0; i < 8; ++i)
        readers.emplace_back([&cache, &spec, &seen, i] { seen[static_cast<std::size_t>(i)] = &cache.get(spec, 0.5); });
    for (auto& th : readers) th.join();
    for (const KernelEvaluation* p : seen) CHECK(p == first);
}

TEST_CASE("kernel spec serialization and CSV export") {
    const KernelSpec spec = gaussian_spec(KernelMethod::SpectralInversion);
    const KernelSpec round = KernelSpec::from_json(spec.to_json());
    CHECK(round.alpha == spec.alpha);
    CHECK(round.n == spec.n);
    CHECK(round.method == spec.method);

    KernelSpec small = spec;
    small.n = 64;
    small.extent = 40.0;
    small.mass_tol = 0.05;  // coarse grid only for the CSV shape
    const KernelEvaluation k = kernel_eval(small, 1.0);
    const std::string csv = k.to_csv();
    CHECK(csv.rfind("x1,value\n", 0) == 0);

    CHECK_THROWS_AS(KernelSpec::from_json({{"alpha", 1.5},
                                           {"d", 1},
                                           {"L", 32.0},
                                           {"n", 1024},
                                           {"method", "closed_form"}}),
                    ConfigError);  // no closed form off alpha in {1,2}
}
