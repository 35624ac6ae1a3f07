#ifndef KCT_MODULUS_HPP
#define KCT_MODULUS_HPP

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kct/errors.hpp"

namespace kct {

// Continuity moduli phi: nonnegative, nondecreasing, phi(0+) = 0. Three
// built-in families plus user-defined ones:
//
//   Power    phi(r) = r^eps                                 (no breakpoint)
//   LogPower phi(r) = (-log r)^(-beta)          for r <= 1/2, tail f above
//   LogLog   phi(r) = log(-k0 log r)/(-log r)^beta for r <= r0, tail g above
//
// with r0 = exp(-(1/k0) exp(1/beta)). The default tail continues the core
// formula as a constant from the breakpoint value, which is continuous and
// nondecreasing; callers may supply their own nondecreasing tail.

enum class ModulusKind { Power, LogPower, LogLog, Custom };

enum class TailMode { ConstantContinuation, UserFunction };

struct TailSpec {
    TailMode mode = TailMode::ConstantContinuation;
    std::function<double(double)> user_fn;  // required iff mode == UserFunction

    static TailSpec constant() { return TailSpec{}; }
    static TailSpec user(std::function<double(double)> fn) {
        return TailSpec{TailMode::UserFunction, std::move(fn)};
    }
};

class ModulusFunction {
  public:
    static ModulusFunction power(double eps);
    static ModulusFunction log_power(double beta, TailSpec tail = TailSpec::constant());
    static ModulusFunction log_log(double beta, double k0, TailSpec tail = TailSpec::constant());
    static ModulusFunction custom(std::function<double(double)> fn, std::string name = "custom");

    // phi(r). Throws NonFiniteResult when the formula evaluates to NaN/inf
    // (e.g. a user tail probed outside its valid regime).
    double operator()(double r) const;

    // phi(2^-i) without forming 2^-i, so deep levels (i beyond double
    // underflow) stay exact for the built-in families. Custom moduli fall
    // back to direct evaluation and throw NonFiniteResult once 2^-i
    // underflows.
    double eval_dyadic(long i) const;

    ModulusKind kind() const { return kind_; }
    double breakpoint() const { return breakpoint_; }  // +inf for Power
    double epsilon() const { return eps_; }
    double beta() const { return beta_; }
    double k0() const { return k0_; }
    const std::string& name() const { return name_; }

    // The constant lambda for which the dyadic ratio condition provably
    // holds: 2^eps (Power), 2^beta (LogPower), and for LogLog the maximum of
    // 2^beta and the boundary ratio at the first admissible level. Custom
    // moduli have none.
    std::optional<double> theoretical_lambda() const;

    nlohmann::json to_json() const;                      // ConfigError for Custom
    static ModulusFunction from_json(const nlohmann::json& j);

  private:
    ModulusFunction() = default;
    double core(double r) const;  // formula below the breakpoint
    double tail_value(double r) const;

    ModulusKind kind_ = ModulusKind::Custom;
    double eps_ = 0.0;
    double beta_ = 0.0;
    double k0_ = 0.0;
    double breakpoint_ = 0.0;
    double breakpoint_value_ = 0.0;  // core formula at the breakpoint
    TailSpec tail_;
    std::function<double(double)> custom_;
    std::string name_;
};

// ---------------------------------------------------------------------------
// Scalar admissibility checks
// ---------------------------------------------------------------------------

struct AxiomReport {
    bool pass = false;
    bool nonnegative = false;
    bool nondecreasing = false;
    bool vanishing_limit = false;
    double first_violation_r = 0.0;  // 0 when no violation
    std::string detail;
};

struct AxiomCheckOptions {
    double tol_mono = 1e-12;   // slack for the sampled monotonicity check
    double tol_limit = 1e-2;   // phi(r_min) must fall below this
};

// Samples phi on an n_probe-point log-spaced grid in [r_min, r_max] and
// verifies nonnegativity, monotonicity and the vanishing limit at the left
// end. Failures are reported, never thrown.
AxiomReport check_modulus_axioms(const ModulusFunction& phi, double r_min, double r_max,
                                 int n_probe, const AxiomCheckOptions& opts = {});

enum class TailMethod { None, RatioTest, IntegralBound };

enum class SumVerdict { Converges, Diverges, Inconclusive };

struct DyadicSumResult {
    double partial_sum = 0.0;
    SumVerdict verdict = SumVerdict::Inconclusive;
    double tail_bound = 0.0;  // certified bound on the omitted tail (Converges only)
    std::string method_note;
};

// Partial sum of sum_{i=0}^{i_max} phi(2^-i)^exponent together with a
// convergence certificate for the infinite series:
//  - RatioTest: the term ratios over the trailing window must stay below a
//    certification threshold q < 1; tail bounded geometrically.
//  - IntegralBound: dyadic condensation of the monotone term envelope
//    (sum_{i >= 2^k} t_i <= sum 2^k t_{2^k}); certifies convergence when the
//    condensed terms decay geometrically, divergence when they stay bounded
//    away from zero.
// Throws NonFiniteResult if any term is non-finite.
DyadicSumResult dyadic_sum(const ModulusFunction& phi, double exponent, long i_max,
                           TailMethod method);

struct RatioConditionResult {
    double lambda_estimate = 1.0;  // max over n of max(ratio_n, 1/ratio_n)
    bool holds = false;
    double bound_used = 0.0;  // the Lambda the ratios were tested against
    long first_violation_n = -1;
    long n_start = 0;             // first probed level (shifted past the LogLog breakpoint)
    std::vector<double> ratios;   // ratio_n for n = n_start .. n_max
};

// Probes ratio_n = phi(2^-n)/phi(2^-n-1) for n in [n_min, n_max]. For LogLog
// moduli the probe starts no earlier than ceil(log2(1/r0)) where the core
// formula is in force. `lambda_bound` overrides the theoretical lambda; when
// neither is available, `holds` just records that all ratios were finite and
// positive. Throws DivisionByZero when phi vanishes at a probed level.
RatioConditionResult ratio_condition(const ModulusFunction& phi, long n_min, long n_max,
                                     std::optional<double> lambda_bound = std::nullopt);

// Admissible theta range for the moment exponent gamma:
//   Power:            (0, 1/gamma)         (any theta works)
//   LogPower/LogLog:  (1/beta, 1/gamma)    for gamma >= 1
//                     (1/(beta*gamma), 1/gamma) for gamma < 1
// nullopt means the window is empty (the required relation between beta
// and gamma fails). Throws DomainError for Custom moduli.
std::optional<std::pair<double, double>> theta_window(const ModulusFunction& phi, double gamma);

struct LogLogConstants {
    double r0 = 0.0;
    long n0 = 0;  // unique integer with 2^-n0 <= r0 < 2^-(n0-1)
};

LogLogConstants loglog_constants(double beta, double k0);

// ---------------------------------------------------------------------------
// Combined report
// ---------------------------------------------------------------------------

struct AdmissibilityOptions {
    long i_max = 10000;
    TailMethod tail_method = TailMethod::IntegralBound;
    long ratio_n_min = 1;
    long ratio_n_max = 64;
};

struct AdmissibilityReport {
    double gamma = 0.0;
    double theta = 0.0;
    double sum_exponent = 0.0;  // theta for gamma >= 1, gamma*theta otherwise
    DyadicSumResult sum;
    RatioConditionResult ratio;
    std::optional<std::pair<double, double>> theta_window;
    bool admissible = false;  // sum certified convergent && ratio bound holds

    nlohmann::json to_json() const;
};

// Runs the full condition set for a proposed (gamma, theta). When theta is
// not supplied, the midpoint of the theta window is used. Throws ConfigError
// when theta falls outside (0, 1/gamma).
AdmissibilityReport assess_admissibility(const ModulusFunction& phi, double gamma,
                                         std::optional<double> theta = std::nullopt,
                                         const AdmissibilityOptions& opts = {});

}  // namespace kct

#endif  // KCT_MODULUS_HPP
