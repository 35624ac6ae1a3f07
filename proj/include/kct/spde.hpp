#ifndef KCT_SPDE_HPP
#define KCT_SPDE_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kct/chaining.hpp"
#include "kct/kernel.hpp"
#include "kct/levy.hpp"
#include "kct/modulus.hpp"

namespace kct {

// Mild solution of the nonlocal stochastic heat equation with zero initial
// condition, driven by a compensated Poisson random measure:
//
//   u(t,x) = sum_{t_j <= t} [K(t - t_j) * g(t_j, ., v_j)](x)
//          - int_0^t int_E [K(t - r) * g(r, ., v)](x) nu(dv) dr
//
// computed in frequency space on the kernel grid (the multiplier route is
// the spectral kernel_convolve; K(0) acts as the identity, so an atom at the
// evaluation time contributes g itself). The jump sum is exact over atoms;
// the compensator uses a closed form for separable time-invariant forcing
// and clustered Gauss-Legendre quadrature otherwise.

// Forcing g(t, v, x) with a declared sup norm and a spatial-modulus
// certificate |g(t,v,x) - g(t,v,y)| <= h(t,v) |x-y|^(d/p) phi^(1/p)(|x-y|).
struct ForcingSpec {
    std::string name = "forcing";
    std::function<double(double t, const std::vector<double>& v, std::span<const double> x)> g;
    std::function<double(double t, const std::vector<double>& v)> sup_norm;

    // certificate data
    std::function<double(double t, const std::vector<double>& v)> h;
    double p = 2.0;
    ModulusFunction phi = ModulusFunction::power(1.0);
    double cert_tol = 1e-9;

    // separable structure g = coeff(t,v) * shape(x); unlocks the fast
    // compensator routes
    bool separable = false;
    bool time_invariant = false;  // coeff does not depend on t
    std::function<double(double t, const std::vector<double>& v)> coeff;
    std::function<double(std::span<const double> x)> shape;
    std::function<double(double r)> coeff_nu_mean;  // int_E coeff(r, v) nu(dv)

    // integrability of the certificate and the sup norm against nu
    std::function<double(double T)> h_l1;             // int_0^T int h dnu dr
    std::function<double(double pp, double T)> h_lp;  // int_0^T int h^p dnu dr
    std::function<double(double T)> sup_nu_integral;  // int_0^T int ||g||_inf dnu dr

    // the intensity measure, needed by the quadrature fallbacks when the
    // closed-form hooks above are absent
    std::optional<NuSpec> nu;
};

// Built-in forcings (d = 1 space):
//   g(t,v,x) = v_1 sin(freq x). The certificate is h = freq |v_1| with
//   phi = Power(p-1), tight for freq = 1; pass h_scale to deliberately
//   mis-declare it (negative testing). Requires p > 1.
ForcingSpec forcing_sine(const LevyConfig& levy, double p, double freq = 1.0,
                         std::optional<double> h_scale = std::nullopt);
// deterministic variant, coeff = 1 (used for the zero-mean property)
ForcingSpec forcing_det_sine(const LevyConfig& levy, double p);
// g(t,v,x) = v_1 (constant in x)
ForcingSpec forcing_mark_constant(const LevyConfig& levy, double p);
ForcingSpec forcing_zero();

struct SpdeQuad {
    int time_nodes = 64;
    int mark_nodes = 32;
    bool sqrt_substitution = true;  // cluster nodes near r = t
    double rel_tol = 1e-6;
};

struct MildSolutionField {
    KernelSpec kernel;
    LevyConfig levy;
    std::string forcing_name;
    std::vector<double> times;
    PoissonMeasureSample atoms;
    std::uint64_t seed = 0;
    double comp_error = 0.0;

    std::vector<double> values;     // [time][grid]
    std::vector<double> jump_part;  // [time][grid]
    std::vector<double> comp_part;  // [time][grid]

    std::span<const double> at(std::size_t time_index) const {
        const std::size_t n = kernel.grid_size();
        return {values.data() + time_index * n, n};
    }

    std::string to_csv() const;  // columns: time, x1..xd, u, jump_part, comp_part
};

// Throws MassDeficit (propagated from the kernel mass check at the latest
// evaluation time) and QuadratureFailure (compensator node-doubling).
MildSolutionField mild_solution(const PoissonMeasureSample& atoms, const ForcingSpec& forcing,
                                const KernelSpec& kernel, std::vector<double> times,
                                const SpdeQuad& quad = {});

// Single snapshot; left_limit drops atoms sitting exactly at t, which
// realizes u(t-). Skips the kernel mass check (callers run it via
// mild_solution).
std::vector<double> mild_solution_at(const PoissonMeasureSample& atoms,
                                     const ForcingSpec& forcing, const KernelSpec& kernel,
                                     double t, bool left_limit, const SpdeQuad& quad = {});

// ---------------------------------------------------------------------------
// Certificate checks
// ---------------------------------------------------------------------------

struct PassFailReport {
    bool pass = true;
    std::size_t n_checked = 0;
    std::size_t n_failures = 0;
    double worst_factor = 0.0;  // max LHS / certificate RHS
    std::string witness;        // first failing probe, human-readable
};

// Samples (t, v, x, y) probes inside the ball and verifies the declared
// certificate on g directly.
PassFailReport forcing_certificate_check(const ForcingSpec& forcing, const LevyConfig& levy,
                                         double probe_radius, std::size_t n_probes,
                                         std::uint64_t seed);

// The convolution-inherits-the-modulus step: |K(tau)*g(r,.,v)(x) -
// K(tau)*g(r,.,v)(y)| <= h(r,v) |x-y|^(d/p) phi^(1/p)(|x-y|) (1 + mass_tol)
// on random (r, v, tau) probes and grid pairs inside the ball.
PassFailReport convolution_modulus_lemma(const ForcingSpec& forcing, const KernelSpec& kernel,
                                         const LevyConfig& levy, double probe_radius,
                                         std::size_t n_probes, std::uint64_t seed,
                                         const SpdeQuad& quad = {});

// ---------------------------------------------------------------------------
// Ensembles and Monte Carlo verification
// ---------------------------------------------------------------------------

struct SpdeExperiment {
    KernelSpec kernel;
    LevyConfig levy;
    ForcingSpec forcing;
    std::vector<double> times;
    int n_rep = 100;
    std::uint64_t master_seed = 1;
    int threads = 1;
    double probe_radius = 1.0;  // ball B_c1 for the x-probes
    SpdeQuad quad;
};

// Streams replications (thread-parallel, seed-derived); the callback must
// only write to per-replication slots.
void for_each_replication(const SpdeExperiment& exp,
                          const std::function<void(std::size_t, const MildSolutionField&)>& fn);

struct SlopeReport {
    std::vector<MomentPairStat> pairs;
    double slope_distance = 0.0;
    double slope_envelope = 0.0;
    double c_hat = 0.0;
    double max_ratio = 0.0;
    double ratio_spread = 0.0;
    bool consistent = false;
    bool trivial_zero = false;
    double slope_tol = 0.0;

    nlohmann::json to_json() const;
};

// E[sup_t |u(t,x) - u(t,y)|^p] against |x-y|^d phi(|x-y|) over probe pairs
// in the ball, spread across dyadic separations. d = 1 experiments only.
SlopeReport modulus_estimate_check(const SpdeExperiment& exp, double p,
                                   const ModulusFunction& phi, std::size_t pair_budget,
                                   double slope_tol = 0.1);

struct SeminormLevelReport {
    double p = 0.0, theta = 0.0, beta = 0.0;
    std::vector<int> levels;
    std::vector<double> seminorm;  // E[sup_t sup_pairs |du|^p / phi^(beta p)] per level
    double max_rel_increase = 0.0;
    bool stable = false;

    nlohmann::json to_json() const;
};

// Finiteness proxy for the Holder-seminorm conclusion: the empirical
// seminorm over nested probe grids must not trend upward as the grid level
// increases. beta must lie in (0, 1/p - theta].
SeminormLevelReport holder_conclusion_check(const SpdeExperiment& exp, double p,
                                            const ModulusFunction& phi, double theta, double beta,
                                            std::vector<int> levels = {4, 5, 6},
                                            double growth_tol = 0.10);

// E[sup_t max_x |u|] against C int_0^T int ||g||_inf dnu dr, as a
// ratio-stability report over nested replication batches.
InequalityReport sup_bound_check(const SpdeExperiment& exp,
                                 const std::vector<std::size_t>& batch_sizes,
                                 double drift_tol = 0.25);

}  // namespace kct

#endif  // KCT_SPDE_HPP
