#ifndef KCT_LEVY_HPP
#define KCT_LEVY_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kct/errors.hpp"
#include "kct/rng.hpp"

namespace kct {

// Time-homogeneous Poisson random measures on E = B_c(0)\{0} with a FINITE
// intensity measure nu, simulated exactly: the atom count on (0,T] is
// Poisson(nu(E) T), atom times are i.i.d. uniform, marks i.i.d. nu/nu(E).
// Infinite-activity Levy measures must be truncated by the caller; the
// config records what was simulated.

struct NuSpec {
    enum class Kind { UniformInterval, UniformBall, PointMass };

    Kind kind = Kind::UniformInterval;
    double total_mass = 1.0;
    int d_jump = 1;
    double a = 0.0, b = 1.0;        // UniformInterval support (a,b), d_jump = 1
    double ball_radius = 1.0;       // UniformBall
    std::vector<double> atom_mark;  // PointMass location

    static NuSpec uniform_interval(double mass, double a, double b);
    static NuSpec uniform_ball(double mass, int d_jump, double radius);
    static NuSpec point_mass(double mass, std::vector<double> mark);

    std::vector<double> sample(Rng& rng) const;
    // closed-form integral of |v|^p against nu
    double moment_abs(double p) const;
    std::string tag() const;

    nlohmann::json to_json() const;
    static NuSpec from_json(const nlohmann::json& j);
};

struct LevyConfig {
    double c = 1.0;  // mark-space ball radius
    int d_jump = 1;
    NuSpec nu;
    double horizon = 1.0;  // T

    void validate() const;  // positive finite mass, support inside the ball
    nlohmann::json to_json() const;
    static LevyConfig from_json(const nlohmann::json& j);
};

struct Atom {
    double t = 0.0;
    std::vector<double> v;
};

struct PoissonMeasureSample {
    std::vector<Atom> atoms;  // sorted by time, strictly positive times
    std::uint64_t seed = 0;

    std::string to_csv() const;  // columns: t, v1..vd
};

PoissonMeasureSample sample_prm(const LevyConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Compensated integrals
// ---------------------------------------------------------------------------

// Deterministic integrand psi(t, v). The closed-form hooks, when present,
// short-circuit the quadrature route; built-ins provide them.
struct Integrand {
    std::function<double(double t, const std::vector<double>& v)> eval;
    std::function<double(double t)> time_integral;           // int_0^t int psi dnu dr
    std::function<double(double p, double T)> abs_moment;    // int_0^T int |psi|^p dnu dr
    std::string name = "psi";
};

Integrand psi_one(const LevyConfig& config);       // psi = 1
Integrand psi_time(const LevyConfig& config);      // psi(t,v) = t
Integrand psi_mark_abs(const LevyConfig& config);  // psi(t,v) = |v|

struct QuadratureSpec {
    int time_nodes = 64;
    int mark_nodes = 64;
    double rel_tol = 1e-6;  // node-doubling agreement required of quadrature
};

struct CompensatedIntegralPath {
    std::vector<Atom> atoms;
    std::vector<double> jump_prefix;  // prefix sums of psi(t_j, v_j)
    std::function<double(double)> compensator;
    double comp_error = 0.0;  // quadrature error estimate (0 for closed form)
    std::vector<double> eval_times;
    std::vector<double> values;  // I at the evaluation times

    double value(double t) const;       // I_t, atoms with t_j <= t
    double left_limit(double t) const;  // atoms with t_j < t
    // Exact pathwise sup of |I_s| for s <= horizon: both one-sided limits at
    // every jump plus the endpoints. Exact when the compensator drift keeps
    // one sign between consecutive jumps (true for all built-ins).
    double sup_abs(double horizon) const;
};

// I_t = sum_{t_j <= t} psi(t_j, v_j) - int_0^t int_E psi dnu dr. The jump sum
// is exact over atoms; the compensator uses the closed form when declared,
// otherwise tensor Gauss-Legendre with a node-doubling error estimate.
// Throws QuadratureFailure when the doubled-node estimates disagree beyond
// rel_tol, or when nu has no quadrature rule (UniformBall without closed
// forms).
CompensatedIntegralPath compensated_integral(const PoissonMeasureSample& sample,
                                             const Integrand& psi, const LevyConfig& config,
                                             const QuadratureSpec& quad = {},
                                             std::vector<double> eval_times = {});

// ---------------------------------------------------------------------------
// Moment inequality reports
// ---------------------------------------------------------------------------

// Ratio-stability report: the inequalities carry existential constants C(p),
// so we never apply a fixed pass/fail threshold. Instead the LHS/RHS ratio is
// tracked across nested replication batches and `consistent` records whether
// it stays within drift_tol of itself.
struct InequalityReport {
    double lhs_estimate = 0.0;
    std::vector<double> rhs_components;
    double rhs_total = 0.0;
    double ratio = 0.0;
    std::vector<std::size_t> batch_sizes;
    std::vector<double> batch_ratios;
    double ratio_spread = 0.0;  // (max-min)/min over batch ratios
    bool consistent = false;
    std::size_t n_rep = 0;
    std::uint64_t seed = 0;
    std::string note;

    nlohmann::json to_json() const;
};

struct CheckOptions {
    std::vector<std::size_t> batch_sizes = {1000, 10000};  // nested prefixes
    double drift_tol = 0.25;
    int threads = 1;
    QuadratureSpec quad;
};

// Shared assembler: per-replication LHS samples against a deterministic RHS,
// with nested prefix-batch ratios. Used by the Kunita checks here and the
// SPDE-side bound checks.
InequalityReport make_ratio_report(std::vector<double> lhs_values,
                                   std::vector<double> rhs_components,
                                   const std::vector<std::size_t>& batch_sizes, double drift_tol,
                                   std::uint64_t seed, std::string note);

// E[sup_{s<=T} |I_s|^p] <= C(p) { (int int |psi|^2)^{p/2} + int int |psi|^p }
// for p >= 2. Throws InsufficientReplications when fewer than 2 replications
// are requested.
InequalityReport kunita_check_p_ge2(const Integrand& psi, const LevyConfig& config, double p,
                                    std::uint64_t master_seed, const CheckOptions& opts = {});

// Single-term variant for 1 <= p < 2.
InequalityReport kunita_check_p_lt2(const Integrand& psi, const LevyConfig& config, double p,
                                    std::uint64_t master_seed, const CheckOptions& opts = {});

// Integrand with a spatial argument; the sup over x is taken on a declared
// grid, making the LHS a grid lower bound of the true sup norm.
struct SupIntegrand {
    std::function<double(double t, const std::vector<double>& v, double x)> eval;
    std::function<double(double t, const std::vector<double>& v)> sup_norm;  // ||f(t,v,.)||_inf
    std::function<double(double t, double x)> comp_integral;  // int_0^t int f(.,.,x) dnu dr
    std::function<double(double T)> sup_integral;             // int_0^T int ||f||_inf dnu dr
    std::function<double(double p, double T)> sup_moment;     // int_0^T int ||f||_inf^p dnu dr
    std::string name = "f";
};

// E[sup_t ||int int f dN~||_inf^p] against C { (int int ||f||_inf)^p +
// int int ||f||_inf^p }; the L-infinity analogue of the Kunita bounds that
// survives outside martingale-type spaces.
InequalityReport linfty_moment_check(const SupIntegrand& f, const LevyConfig& config, double p,
                                     const std::vector<double>& x_grid, std::uint64_t master_seed,
                                     const CheckOptions& opts = {});

}  // namespace kct

#endif  // KCT_LEVY_HPP
