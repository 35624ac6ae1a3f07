#include <doctest.h>

#include <cmath>

#include "kct/levy.hpp"
#include "kct/numeric.hpp"

using namespace kct;

namespace {

LevyConfig uniform01_config(double mass, double T = 1.0) {
    LevyConfig cfg;
    cfg.c = 1.0;
    cfg.d_jump = 1;
    cfg.nu = NuSpec::uniform_interval(mass, 0.0, 1.0);
    cfg.horizon = T;
    return cfg;
}

}  // namespace

TEST_CASE("sample_prm: determinism and structure") {
    const LevyConfig cfg = uniform01_config(2.0);
    const PoissonMeasureSample a = sample_prm(cfg, 42);
    const PoissonMeasureSample b = sample_prm(cfg, 42);
    REQUIRE(a.atoms.size() == b.atoms.size());
    for (std::size_t j = 0; j < a.atoms.size(); ++j) {
        CHECK(a.atoms[j].t == b.atoms[j].t);  // bit-identical
        CHECK(a.atoms[j].v == b.atoms[j].v);
    }

    double prev = 0.0;
    for (const Atom& atom : a.atoms) {
        CHECK(atom.t > 0.0);
        CHECK(atom.t <= cfg.horizon);
        CHECK(atom.t >= prev);
        prev = atom.t;
        CHECK(atom.v.at(0) > 0.0);
        CHECK(atom.v.at(0) < 1.0);
    }

    const PoissonMeasureSample c = sample_prm(cfg, 43);
    bool differs = (c.atoms.size() != a.atoms.size());
    for (std::size_t j = 0; !differs && j < a.atoms.size(); ++j)
        differs = (a.atoms[j].t != c.atoms[j].t);
    CHECK(differs);
}

TEST_CASE("sample_prm: count statistics at nu(E) T = 2") {
    const LevyConfig cfg = uniform01_config(2.0);
    const std::size_t n = 100000;
    std::vector<double> counts(n);
    for (std::size_t rep = 0; rep < n; ++rep)
        counts[rep] = static_cast<double>(
            sample_prm(cfg, derive_replication_seed(1234, rep)).atoms.size());

    // Poisson(2): mean 2 (SE sqrt(2/n)), variance 2 (SE ~ sqrt((mu4 - var^2)/n),
    // mu4 = lambda(1 + 3 lambda) = 14)
    const double m = mean(counts);
    CHECK(std::abs(m - 2.0) < 4.0 * std::sqrt(2.0 / static_cast<double>(n)));
    const double v = variance(counts);
    CHECK(std::abs(v - 2.0) < 4.0 * std::sqrt(10.0 / static_cast<double>(n)));
}

TEST_CASE("sample_prm: disjoint windows are uncorrelated") {
    const LevyConfig cfg = uniform01_config(2.0);
    const std::size_t n = 20000;
    std::vector<double> first(n), second(n);
    for (std::size_t rep = 0; rep < n; ++rep) {
        const PoissonMeasureSample s = sample_prm(cfg, derive_replication_seed(777, rep));
        double c1 = 0, c2 = 0;
        for (const Atom& a : s.atoms) (a.t <= 0.5 ? c1 : c2) += 1.0;
        first[rep] = c1;
        second[rep] = c2;
    }
    const double m1 = mean(first), m2 = mean(second);
    double cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) cov += (first[i] - m1) * (second[i] - m2);
    cov /= static_cast<double>(n - 1);
    const double rho = cov / std::sqrt(variance(first) * variance(second));
    CHECK(std::abs(rho) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("nu moments: closed forms") {
    const NuSpec uni = NuSpec::uniform_interval(2.0, 0.0, 1.0);
    CHECK(uni.moment_abs(1.0) == doctest::Approx(1.0));        // 2 * 1/2
    CHECK(uni.moment_abs(2.0) == doctest::Approx(2.0 / 3.0));  // 2 * 1/3

    const NuSpec ball = NuSpec::uniform_ball(3.0, 2, 0.5);
    // mass * d/(d+p) * R^p with d = 2, p = 2: 3 * 1/2 * 1/4
    CHECK(ball.moment_abs(2.0) == doctest::Approx(0.375));

    const NuSpec pm = NuSpec::point_mass(2.0, {0.5});
    CHECK(pm.moment_abs(3.0) == doctest::Approx(2.0 * 0.125));
}

TEST_CASE("compensated integral: centered Poisson path structure") {
    const LevyConfig cfg = uniform01_config(2.0);
    const PoissonMeasureSample s = sample_prm(cfg, 2025);
    const Integrand psi = psi_one(cfg);
    const CompensatedIntegralPath path = compensated_integral(s, psi, cfg, {}, {0.25, 0.5, 1.0});

    // I_t = N_t - 2t with exactly one discontinuity per atom
    CHECK(path.value(1.0) ==
          doctest::Approx(static_cast<double>(s.atoms.size()) - 2.0).epsilon(1e-14));
    for (std::size_t j = 0; j < s.atoms.size(); ++j) {
        const double tj = s.atoms[j].t;
        CHECK(path.value(tj) - path.left_limit(tj) == doctest::Approx(1.0).epsilon(1e-12));
    }
    // affine drift between atoms: slope -nu(E)
    double lo = 0.0, hi = s.atoms.empty() ? 1.0 : s.atoms.front().t;
    const double mid = 0.5 * (lo + hi);
    CHECK(path.value(mid) == doctest::Approx(-2.0 * mid).epsilon(1e-12));
    CHECK(path.values.size() == 3);
}

TEST_CASE("compensated integral: exact sup on a hand-built path") {
    // single atom at t = 1/2, psi = 1, mass 2: I = -2t then jumps by 1;
    // sup |I| = 1, attained from the left at the jump and at t = 1
    PoissonMeasureSample s;
    s.atoms.push_back({0.5, {0.5}});
    const LevyConfig cfg = uniform01_config(2.0);
    const CompensatedIntegralPath path = compensated_integral(s, psi_one(cfg), cfg);
    CHECK(path.sup_abs(1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(path.value(0.5) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(path.left_limit(0.5) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("compensated integral: martingale and isometry statistics") {
    const LevyConfig cfg = uniform01_config(2.0);
    const Integrand psi = psi_one(cfg);
    const std::size_t n = 20000;
    const std::vector<double> probes = {0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0};
    std::vector<std::vector<double>> vals(probes.size(), std::vector<double>(n));
    std::vector<double> sq(n);
    for (std::size_t rep = 0; rep < n; ++rep) {
        const PoissonMeasureSample s = sample_prm(cfg, derive_replication_seed(31337, rep));
        const CompensatedIntegralPath path = compensated_integral(s, psi, cfg);
        for (std::size_t k = 0; k < probes.size(); ++k) vals[k][rep] = path.value(probes[k]);
        sq[rep] = path.value(1.0) * path.value(1.0);
    }
    for (std::size_t k = 0; k < probes.size(); ++k) {
        // Var I_t = t * int psi^2 dnu = 2t
        const double se = std::sqrt(2.0 * probes[k] / static_cast<double>(n));
        CHECK(std::abs(mean(vals[k])) < 4.0 * se);
    }
    // E|I_1|^2 = 2, fourth moment of I_1 gives the SE
    const double se2 = std::sqrt(variance(sq) / static_cast<double>(n));
    CHECK(std::abs(mean(sq) - 2.0) < 4.0 * se2);
}

TEST_CASE("compensated integral: quadrature matches closed forms") {
    const LevyConfig cfg = uniform01_config(2.0);
    const PoissonMeasureSample s = sample_prm(cfg, 99);

    // psi(t,v) = t without hooks forces the tensor quadrature route
    Integrand bare;
    bare.eval = [](double t, const std::vector<double>&) { return t; };
    bare.name = "bare_time";
    const CompensatedIntegralPath path = compensated_integral(s, bare, cfg);
    // closed form: mass * t^2/2
    CHECK(path.compensator(0.7) == doctest::Approx(2.0 * 0.49 / 2.0).epsilon(1e-10));
    CHECK(path.compensator(1.0) == doctest::Approx(1.0).epsilon(1e-10));

    // psi(t,v) = t |v| mixes both axes
    Integrand mixed;
    mixed.eval = [](double t, const std::vector<double>& v) { return t * v.at(0); };
    mixed.name = "t_mark";
    const CompensatedIntegralPath path2 = compensated_integral(s, mixed, cfg);
    // int_0^1 r dr * int v dnu = 1/2 * 1
    CHECK(path2.compensator(1.0) == doctest::Approx(0.5).epsilon(1e-10));

    // no quadrature rule for ball marks
    LevyConfig ball = cfg;
    ball.nu = NuSpec::uniform_ball(2.0, 1, 0.5);
    const PoissonMeasureSample sb = sample_prm(ball, 7);
    CHECK_THROWS_AS(compensated_integral(sb, bare, ball), QuadratureFailure);
}

TEST_CASE("kunita p >= 2: psi = 1 with lambda0 = 2") {
    const LevyConfig cfg = uniform01_config(2.0);
    CheckOptions opts;
    opts.batch_sizes = {1000, 4000};
    const InequalityReport rep = kunita_check_p_ge2(psi_one(cfg), cfg, 2.0, 5150, opts);
    // RHS = (int psi^2)^{p/2} + int psi^p = 2 + 2
    REQUIRE(rep.rhs_components.size() == 2);
    CHECK(rep.rhs_components[0] == doctest::Approx(2.0));
    CHECK(rep.rhs_components[1] == doctest::Approx(2.0));
    // Doob-type sanity: E sup |I|^2 <= 4 E|I_1|^2 = 8, so the ratio sits in (1/2, 2)
    CHECK(rep.ratio > 0.5);
    CHECK(rep.ratio <= 2.0);
    CHECK(rep.consistent);
    CHECK(rep.batch_ratios.size() == 2);

    CHECK_THROWS_AS(kunita_check_p_ge2(psi_one(cfg), cfg, 1.5, 1, opts), ConfigError);
}

TEST_CASE("kunita p < 2: single term") {
    const LevyConfig cfg = uniform01_config(2.0);
    CheckOptions opts;
    opts.batch_sizes = {1000, 4000};
    const InequalityReport rep = kunita_check_p_lt2(psi_one(cfg), cfg, 1.0, 808, opts);
    REQUIRE(rep.rhs_components.size() == 1);
    CHECK(rep.rhs_components[0] == doctest::Approx(2.0));
    CHECK(rep.consistent);
    CHECK(rep.ratio > 0.0);

    CHECK_THROWS_AS(kunita_check_p_lt2(psi_one(cfg), cfg, 2.0, 1, opts), ConfigError);
}

TEST_CASE("kunita: mark integrand uses closed-form nu moments") {
    const LevyConfig cfg = uniform01_config(2.0);
    CheckOptions opts;
    opts.batch_sizes = {500, 2000};
    const InequalityReport rep = kunita_check_p_ge2(psi_mark_abs(cfg), cfg, 3.0, 31, opts);
    // (int |v|^2 dnu)^{3/2} = (2/3)^{3/2}, int |v|^3 dnu = 2/4
    CHECK(rep.rhs_components[0] == doctest::Approx(std::pow(2.0 / 3.0, 1.5)).epsilon(1e-12));
    CHECK(rep.rhs_components[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep.consistent);
}

TEST_CASE("kunita: zero integrand is vacuously consistent") {
    const LevyConfig cfg = uniform01_config(2.0);
    Integrand zero;
    zero.eval = [](double, const std::vector<double>&) { return 0.0; };
    zero.time_integral = [](double) { return 0.0; };
    zero.abs_moment = [](double, double) { return 0.0; };
    zero.name = "zero";
    CheckOptions opts;
    opts.batch_sizes = {100, 400};
    const InequalityReport rep = kunita_check_p_ge2(zero, cfg, 2.0, 5, opts);
    CHECK(rep.lhs_estimate == 0.0);
    CHECK(rep.rhs_total == 0.0);
    CHECK(rep.consistent);
}

TEST_CASE("kunita: batch validation") {
    const LevyConfig cfg = uniform01_config(2.0);
    CheckOptions opts;
    opts.batch_sizes = {};
    CHECK_THROWS_AS(kunita_check_p_ge2(psi_one(cfg), cfg, 2.0, 1, opts),
                    InsufficientReplications);
    opts.batch_sizes = {100, 50};
    CHECK_THROWS_AS(kunita_check_p_ge2(psi_one(cfg), cfg, 2.0, 1, opts), ConfigError);
    opts.batch_sizes = {1};
    CHECK_THROWS_AS(kunita_check_p_ge2(psi_one(cfg), cfg, 2.0, 1, opts),
                    InsufficientReplications);
}

TEST_CASE("linfty check: point-mass marks reduce to the scalar case") {
    // f(t,v,x) = v sin(x) with nu = mass * delta_{0.5}: the sup over x of
    // |F_t| equals 0.5 |N_t - mass t| when the grid contains pi/2
    LevyConfig cfg;
    cfg.c = 1.0;
    cfg.d_jump = 1;
    cfg.nu = NuSpec::point_mass(2.0, {0.5});
    cfg.horizon = 1.0;

    SupIntegrand f;
    f.eval = [](double, const std::vector<double>& v, double x) { return v.at(0) * std::sin(x); };
    f.sup_norm = [](double, const std::vector<double>& v) { return std::abs(v.at(0)); };
    f.comp_integral = [](double t, double x) { return 1.0 * t * std::sin(x); };  // mass*mark = 1
    f.sup_integral = [](double T) { return 1.0 * T; };  // int |v| dnu = 1
    f.sup_moment = [](double p, double T) { return 2.0 * std::pow(0.5, p) * T; };

    std::vector<double> x_grid;
    for (int i = 0; i <= 16; ++i)
        x_grid.push_back(-M_PI / 2 + M_PI * static_cast<double>(i) / 16.0);

    CheckOptions opts;
    opts.batch_sizes = {500, 2000};
    const double p = 2.0;
    const InequalityReport rep = linfty_moment_check(f, cfg, p, x_grid, 4242, opts);

    const InequalityReport scalar = kunita_check_p_ge2(psi_one(cfg), cfg, p, 4242, opts);
    // same seeds, same atoms: LHS differs exactly by the factor 0.5^p
    CHECK(rep.lhs_estimate ==
          doctest::Approx(std::pow(0.5, p) * scalar.lhs_estimate).epsilon(1e-12));
    CHECK(rep.consistent);
    // RHS components: (0.5 * 2 * 1/2 * T)^p? here: (int ||f|| dnu T)^p = 1, int ||f||^p = 0.5
    CHECK(rep.rhs_components[0] == doctest::Approx(1.0));
    CHECK(rep.rhs_components[1] == doctest::Approx(0.5));
}

TEST_CASE("report serialization carries the wire fields") {
    const LevyConfig cfg = uniform01_config(2.0);
    CheckOptions opts;
    opts.batch_sizes = {100, 200};
    const InequalityReport rep = kunita_check_p_lt2(psi_one(cfg), cfg, 1.0, 12, opts);
    const nlohmann::json j = rep.to_json();
    for (const char* key :
         {"lhs_estimate", "rhs_components", "ratio", "batch_ratios", "n_rep", "seed"})
        CHECK(j.contains(key));

    const PoissonMeasureSample s = sample_prm(cfg, 5);
    const std::string csv = s.to_csv();
    CHECK(csv.rfind("t,v1\n", 0) == 0);

    const LevyConfig round = LevyConfig::from_json(cfg.to_json());
    CHECK(round.nu.total_mass == cfg.nu.total_mass);
    CHECK(round.horizon == cfg.horizon);
}
