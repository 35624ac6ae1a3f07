#include <doctest.h>

#include <cmath>

#include "kct/numeric.hpp"
#include "kct/spde.hpp"

using namespace kct;

namespace {

LevyConfig standard_levy(double mass = 2.0) {
    LevyConfig cfg;
    cfg.c = 1.0;
    cfg.d_jump = 1;
    cfg.nu = NuSpec::uniform_interval(mass, 0.0, 1.0);
    cfg.horizon = 1.0;
    return cfg;
}

// extent 10 pi makes sin(x) exactly periodic on the torus (frequency index 5)
KernelSpec sine_kernel(int n = 512) {
    KernelSpec spec;
    spec.alpha = 2.0;
    spec.d = 1;
    spec.extent = 10.0 * M_PI;
    spec.n = n;
    spec.method = KernelMethod::SpectralInversion;
    return spec;
}

std::vector<double> uniform_times(int count, double t_max = 1.0) {
    std::vector<double> t;
    for (int i = 1; i <= count; ++i)
        t.push_back(t_max * static_cast<double>(i) / static_cast<double>(count));
    return t;
}

// closed-form path for g(t,v,x) = v sin(x) under alpha = 2: sin is an
// eigenfunction with unit eigenvalue, so
//   u(t,x) = sin(x) [ sum_{t_j <= t} v_j e^{-(t - t_j)} - m1 (1 - e^{-t}) ]
double eigen_amplitude(const PoissonMeasureSample& atoms, double t, double m1) {
    double a = 0.0;
    for (const Atom& atom : atoms.atoms)
        if (atom.t <= t) a += atom.v.at(0) * std::exp(-(t - atom.t));
    return a - m1 * (1.0 - std::exp(-t));
}

}  // namespace

TEST_CASE("mild solution: eigenfunction closed form") {
    const LevyConfig levy = standard_levy();
    const KernelSpec kernel = sine_kernel();
    const ForcingSpec forcing = forcing_sine(levy, 2.0);
    const std::vector<double> times = uniform_times(8);

    for (std::uint64_t seed : {11u, 12u, 13u}) {
        const PoissonMeasureSample atoms = sample_prm(levy, seed);
        const MildSolutionField field = mild_solution(atoms, forcing, kernel, times);

        double sup_diff = 0.0, sup_ref = 0.0;
        const std::size_t n = kernel.grid_size();
        for (std::size_t ti = 0; ti < times.size(); ++ti) {
            const double amp = eigen_amplitude(atoms, times[ti], 1.0);
            for (std::size_t j = 0; j < n; ++j) {
                const double ref = amp * std::sin(kernel.coord(static_cast<std::int64_t>(j)));
                sup_diff = std::max(sup_diff, std::abs(field.values[ti * n + j] - ref));
                sup_ref = std::max(sup_ref, std::abs(ref));
            }
        }
        CHECK(sup_diff <= 1e-9 * std::max(1.0, sup_ref));
        CHECK(field.comp_error == 0.0);  // exact compensator route
    }
}

TEST_CASE("mild solution: jump identity u(t_j) - u(t_j-) = g(t_j, v_j, .)") {
    const LevyConfig levy = standard_levy();
    const KernelSpec kernel = sine_kernel(256);
    const ForcingSpec forcing = forcing_sine(levy, 2.0);
    const PoissonMeasureSample atoms = sample_prm(levy, 2121);

    const std::size_t n = kernel.grid_size();
    for (const Atom& atom : atoms.atoms) {
        const std::vector<double> right = mild_solution_at(atoms, forcing, kernel, atom.t, false);
        const std::vector<double> left = mild_solution_at(atoms, forcing, kernel, atom.t, true);
        for (std::size_t j = 0; j < n; ++j) {
            const double g = atom.v.at(0) * std::sin(kernel.coord(static_cast<std::int64_t>(j)));
            CHECK(right[j] - left[j] == doctest::Approx(g).epsilon(1e-10));
        }
    }
}

TEST_CASE("mild solution: zero initial condition and zero forcing") {
    const LevyConfig levy = standard_levy();
    const KernelSpec kernel = sine_kernel(256);
    const PoissonMeasureSample atoms = sample_prm(levy, 5);

    const MildSolutionField at0 =
        mild_solution(atoms, forcing_sine(levy, 2.0), kernel, {0.0});
    for (double v : at0.values) CHECK(v == 0.0);

    const MildSolutionField zf = mild_solution(atoms, forcing_zero(), kernel, uniform_times(4));
    for (double v : zf.values) CHECK(v == 0.0);
}

TEST_CASE("mild solution: pre-jump path is pure compensator") {
    const LevyConfig levy = standard_levy();
    const KernelSpec kernel = sine_kernel(256);
    PoissonMeasureSample atoms;
    atoms.atoms.push_back({0.7, {0.5}});

    const ForcingSpec forcing = forcing_mark_constant(levy, 2.0);
    const MildSolutionField field =
        mild_solution(atoms, forcing, kernel, {0.25, 0.5});
    const std::size_t n = kernel.grid_size();
    for (std::size_t ti = 0; ti < 2; ++ti) {
        const double t = field.times[ti];
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(field.jump_part[ti * n + j] == 0.0);
            // m1 = mass * mean mark = 1, shape = 1, lambda = 0 mode: comp = t
            CHECK(field.values[ti * n + j] == doctest::Approx(-t).epsilon(1e-12));
        }
    }
}

TEST_CASE("mild solution: linear in the forcing on common atoms") {
    const LevyConfig levy = standard_levy();
    const KernelSpec kernel = sine_kernel(256);
    const PoissonMeasureSample atoms = sample_prm(levy, 77);
    const std::vector<double> times = uniform_times(4);

    const ForcingSpec sine = forcing_sine(levy, 2.0);
    const ForcingSpec constant = forcing_mark_constant(levy, 2.0);
    ForcingSpec combined = sine;
    combined.name = "sine_plus_one";
    combined.g = [](double, const std::vector<double>& v, std::span<const double> x) {
        return v.at(0) * (std::sin(x[0]) + 1.0);
    };
    combined.shape = [](std::span<const double> x) { return std::sin(x[0]) + 1.0; };

    const MildSolutionField a = mild_solution(atoms, sine, kernel, times);
    const MildSolutionField b = mild_solution(atoms, constant, kernel, times);
    const MildSolutionField c = mild_solution(atoms, combined, kernel, times);
    for (std::size_t i = 0; i < c.values.size(); ++i)
        CHECK(c.values[i] == doctest::Approx(a.values[i] + b.values[i]).epsilon(1e-10));
}

TEST_CASE("mild solution: quadrature compensator routes agree with the closed form") {
    // g(t,v,x) = v e^{-t} sin(x): jump part evolves to e^{-t} sum v_j sin(x),
    // compensator m1 t e^{-t} sin(x)
    const LevyConfig levy = standard_levy();
    const KernelSpec kernel = sine_kernel(256);
    const PoissonMeasureSample atoms = sample_prm(levy, 303);
    const std::vector<double> times = uniform_times(4);

    ForcingSpec decayed = forcing_sine(levy, 2.0);
    decayed.name = "decayed_sine";
    decayed.g = [](double t, const std::vector<double>& v, std::span<const double> x) {
        return v.at(0) * std::exp(-t) * std::sin(x[0]);
    };
    decayed.coeff = [](double t, const std::vector<double>& v) {
        return v.at(0) * std::exp(-t);
    };
    decayed.time_invariant = false;
    decayed.coeff_nu_mean = [](double r) { return std::exp(-r); };  // m1 = 1

    SpdeQuad quad;
    quad.time_nodes = 24;
    quad.mark_nodes = 12;

    auto check_field = [&](const MildSolutionField& field) {
        const std::size_t n = kernel.grid_size();
        for (std::size_t ti = 0; ti < times.size(); ++ti) {
            const double t = times[ti];
            double jumps = 0.0;
            for (const Atom& atom : atoms.atoms)
                if (atom.t <= t) jumps += atom.v.at(0);
            const double amp = std::exp(-t) * (jumps - t);
            for (std::size_t j = 0; j < n; ++j) {
                const double ref = amp * std::sin(kernel.coord(static_cast<std::int64_t>(j)));
                CHECK(field.values[ti * n + j] == doctest::Approx(ref).epsilon(1e-8));
            }
        }
    };

    const MildSolutionField separable = mild_solution(atoms, decayed, kernel, times, quad);
    CHECK(separable.comp_error > 0.0);
    CHECK(separable.comp_error < 1e-8);
    check_field(separable);

    ForcingSpec general = decayed;
    general.name = "decayed_sine_general";
    general.separable = false;
    check_field(mild_solution(atoms, general, kernel, times, quad));
}

TEST_CASE("mild solution: unreachable compensator tolerance raises QuadratureFailure") {
    const LevyConfig levy = standard_levy();
    const KernelSpec kernel = sine_kernel(256);
    const PoissonMeasureSample atoms = sample_prm(levy, 303);

    ForcingSpec decayed = forcing_sine(levy, 2.0);
    decayed.g = [](double t, const std::vector<double>& v, std::span<const double> x) {
        return v.at(0) * std::exp(-t) * std::sin(x[0]);
    };
    decayed.coeff = [](double t, const std::vector<double>& v) {
        return v.at(0) * std::exp(-t);
    };
    decayed.time_invariant = false;
    decayed.coeff_nu_mean = [](double r) { return std::exp(-r); };

    SpdeQuad quad;
    quad.time_nodes = 8;
    quad.rel_tol = 1e-17;
    CHECK_THROWS_AS(mild_solution(atoms, decayed, kernel, {0.5, 1.0}, quad), QuadratureFailure);
}

TEST_CASE("mild solution: kernel mass deficit propagates") {
    const LevyConfig levy = standard_levy();
    KernelSpec tiny;
    tiny.alpha = 2.0;
    tiny.d = 1;
    tiny.extent = 4.0;
    tiny.n = 64;
    tiny.method = KernelMethod::SpectralInversion;
    const PoissonMeasureSample atoms = sample_prm(levy, 5);
    CHECK_THROWS_AS(mild_solution(atoms, forcing_sine(levy, 2.0), tiny, {1.0}), MassDeficit);
}

TEST_CASE("mild solution: zero mean for deterministic forcing") {
    SpdeExperiment exp;
    exp.levy = standard_levy();
    exp.kernel = sine_kernel(256);
    exp.forcing = forcing_det_sine(exp.levy, 2.0);
    exp.times = uniform_times(4);
    exp.n_rep = 400;
    exp.master_seed = 909;

    const std::size_t n = exp.kernel.grid_size();
    const std::size_t probe = n / 2 + 25;  // sin != 0 there
    std::vector<double> samples(static_cast<std::size_t>(exp.n_rep));
    for_each_replication(exp, [&](std::size_t rep, const MildSolutionField& field) {
        samples[rep] = field.values[(exp.times.size() - 1) * n + probe];
    });
    const double se = standard_error(samples);
    CHECK(std::abs(mean(samples)) < 4.0 * se);
}

TEST_CASE("forcing certificate: tight for the eigen sine, broken when mis-declared") {
    const LevyConfig levy = standard_levy();
    const ForcingSpec good = forcing_sine(levy, 2.0);
    const PassFailReport ok = forcing_certificate_check(good, levy, 1.0, 512, 99);
    CHECK(ok.pass);
    CHECK(ok.n_failures == 0);
    CHECK(ok.worst_factor <= 1.0 + 1e-9);

    // sin(3x) declared with the unit-frequency certificate
    const ForcingSpec bad = forcing_sine(levy, 2.0, 3.0, 1.0);
    const PassFailReport fail = forcing_certificate_check(bad, levy, 1.0, 512, 99);
    CHECK_FALSE(fail.pass);
    CHECK(fail.n_failures > 0);
    CHECK_FALSE(fail.witness.empty());
}

TEST_CASE("convolution inherits the modulus certificate") {
    const LevyConfig levy = standard_levy();
    const KernelSpec kernel = sine_kernel(512);
    const SpdeQuad quad;

    const PassFailReport ok =
        convolution_modulus_lemma(forcing_sine(levy, 2.0), kernel, levy, 1.0, 64, 4, quad);
    CHECK(ok.pass);

    const PassFailReport flat =
        convolution_modulus_lemma(forcing_mark_constant(levy, 2.0), kernel, levy, 1.0, 32, 4, quad);
    CHECK(flat.pass);  // constant in x: zero increments

    const PassFailReport fail = convolution_modulus_lemma(forcing_sine(levy, 2.0, 3.0, 1.0),
                                                          kernel, levy, 1.0, 64, 4, quad);
    CHECK_FALSE(fail.pass);
    CHECK_FALSE(fail.witness.empty());
}

TEST_CASE("modulus_estimate_check: eigen forcing recovers slope d + eps") {
    SpdeExperiment exp;
    exp.levy = standard_levy();
    exp.kernel = sine_kernel(512);
    exp.forcing = forcing_sine(exp.levy, 2.0);  // p = 2, phi = Power(1), eps = 1
    exp.times = uniform_times(8);
    exp.n_rep = 200;
    exp.master_seed = 4711;
    exp.threads = 2;

    const SlopeReport rep = modulus_estimate_check(exp, 2.0, exp.forcing.phi, 40);
    CHECK(rep.consistent);
    CHECK(rep.slope_distance == doctest::Approx(2.0).epsilon(0.1));
    CHECK(rep.slope_envelope == doctest::Approx(1.0).epsilon(0.1));

    SpdeExperiment zero = exp;
    zero.forcing = forcing_zero();
    zero.n_rep = 4;
    const SlopeReport zrep = modulus_estimate_check(zero, 2.0, exp.forcing.phi, 16);
    CHECK(zrep.trivial_zero);
    CHECK(zrep.consistent);

    SpdeExperiment one = exp;
    one.n_rep = 1;
    CHECK_THROWS_AS(modulus_estimate_check(one, 2.0, exp.forcing.phi, 16),
                    InsufficientReplications);
}

TEST_CASE("holder_conclusion_check: stable seminorm across nested levels") {
    SpdeExperiment exp;
    exp.levy = standard_levy();
    exp.kernel = sine_kernel(512);
    exp.forcing = forcing_sine(exp.levy, 2.0);
    exp.times = uniform_times(4);
    exp.n_rep = 80;
    exp.master_seed = 31;
    exp.threads = 2;

    const SeminormLevelReport rep =
        holder_conclusion_check(exp, 2.0, exp.forcing.phi, 0.25, 0.25, {2, 3, 4});
    CHECK(rep.stable);
    CHECK(rep.seminorm.size() == 3);
    for (std::size_t i = 0; i + 1 < rep.seminorm.size(); ++i)
        CHECK(rep.seminorm[i] <= rep.seminorm[i + 1] * (1.0 + 1e-12));  // nested probes

    // beta outside (0, 1/p - theta]
    CHECK_THROWS_AS(holder_conclusion_check(exp, 2.0, exp.forcing.phi, 0.25, 0.3, {2, 3}),
                    ConfigError);
    CHECK_THROWS_AS(holder_conclusion_check(exp, 2.0, exp.forcing.phi, 0.6, 0.1, {2, 3}),
                    ConfigError);
}

TEST_CASE("sup_bound_check: ratio stability and exact mass scaling") {
    SpdeExperiment exp;
    exp.levy = standard_levy(2.0);
    exp.kernel = sine_kernel(256);
    exp.forcing = forcing_sine(exp.levy, 2.0);
    exp.times = uniform_times(4);
    exp.master_seed = 6060;
    exp.threads = 2;

    const InequalityReport rep = sup_bound_check(exp, {60, 240});
    CHECK(rep.consistent);
    REQUIRE(rep.rhs_components.size() == 1);
    CHECK(rep.rhs_components[0] == 1.0);  // T * int |v| dnu = 1 * 2 * 1/2

    SpdeExperiment doubled = exp;
    doubled.levy = standard_levy(4.0);
    doubled.forcing = forcing_sine(doubled.levy, 2.0);
    const InequalityReport rep2 = sup_bound_check(doubled, {60, 240});
    CHECK(rep2.rhs_components[0] == 2.0 * rep.rhs_components[0]);  // exact doubling
}

TEST_CASE("solution CSV carries the decomposition") {
    const LevyConfig levy = standard_levy();
    const KernelSpec kernel = sine_kernel(256);
    const PoissonMeasureSample atoms = sample_prm(levy, 1);
    const MildSolutionField field =
        mild_solution(atoms, forcing_sine(levy, 2.0), kernel, {0.5, 1.0});
    const std::string csv = field.to_csv();
    CHECK(csv.rfind("time,x1,u,jump_part,comp_part\n", 0) == 0);
}
