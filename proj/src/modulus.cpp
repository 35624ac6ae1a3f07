#include "kct/modulus.hpp"

#include <cmath>
#include <vector>

#include "kct/numeric.hpp"

namespace kct {

namespace {

constexpr double kLn2 = 0.6931471805599453094;

void require_finite(double v, const char* where) {
    if (!std::isfinite(v)) throw NonFiniteResult(std::string(where) + ": non-finite value");
}

// Sampled sanity check for user-supplied tails: continuity at the breakpoint
// and monotonicity on a short grid above it.
void validate_user_tail(const TailSpec& tail, double breakpoint, double breakpoint_value) {
    if (tail.mode != TailMode::UserFunction) return;
    if (!tail.user_fn) throw ConfigError("tail: UserFunction without a function");
    const double at_bp = tail.user_fn(breakpoint);
    require_finite(at_bp, "tail");
    const double scale = std::max(std::abs(breakpoint_value), 1e-300);
    if (std::abs(at_bp - breakpoint_value) > 1e-9 * scale)
        throw ConfigError("tail: value at breakpoint does not match the core formula");
    double prev = at_bp;
    for (int j = 1; j <= 64; ++j) {
        const double r = breakpoint * (1.0 + 0.25 * j);
        const double v = tail.user_fn(r);
        require_finite(v, "tail");
        if (v < prev - 1e-12) throw ConfigError("tail: not nondecreasing on sampled grid");
        prev = v;
    }
}

}  // namespace

ModulusFunction ModulusFunction::power(double eps) {
    if (!(eps > 0.0)) throw DomainError("power modulus: eps must be > 0");
    ModulusFunction m;
    m.kind_ = ModulusKind::Power;
    m.eps_ = eps;
    m.breakpoint_ = std::numeric_limits<double>::infinity();
    m.name_ = "power";
    return m;
}

ModulusFunction ModulusFunction::log_power(double beta, TailSpec tail) {
    if (!(beta > 0.0)) throw DomainError("logpower modulus: beta must be > 0");
    ModulusFunction m;
    m.kind_ = ModulusKind::LogPower;
    m.beta_ = beta;
    m.breakpoint_ = 0.5;
    m.breakpoint_value_ = std::pow(kLn2, -beta);  // (-log(1/2))^-beta
    m.tail_ = std::move(tail);
    validate_user_tail(m.tail_, m.breakpoint_, m.breakpoint_value_);
    m.name_ = "logpower";
    return m;
}

ModulusFunction ModulusFunction::log_log(double beta, double k0, TailSpec tail) {
    if (!(beta > 0.0) || !(k0 > 0.0)) throw DomainError("loglog modulus: beta, k0 must be > 0");
    ModulusFunction m;
    m.kind_ = ModulusKind::LogLog;
    m.beta_ = beta;
    m.k0_ = k0;
    const double minus_log_r0 = std::exp(1.0 / beta) / k0;  // -log(r0)
    m.breakpoint_ = std::exp(-minus_log_r0);
    m.breakpoint_value_ = std::log(k0 * minus_log_r0) / std::pow(minus_log_r0, beta);
    m.tail_ = std::move(tail);
    validate_user_tail(m.tail_, m.breakpoint_, m.breakpoint_value_);
    m.name_ = "loglog";
    return m;
}

ModulusFunction ModulusFunction::custom(std::function<double(double)> fn, std::string name) {
    if (!fn) throw ConfigError("custom modulus: empty function");
    ModulusFunction m;
    m.kind_ = ModulusKind::Custom;
    m.custom_ = std::move(fn);
    m.breakpoint_ = std::numeric_limits<double>::infinity();
    m.name_ = std::move(name);
    return m;
}

double ModulusFunction::core(double r) const {
    switch (kind_) {
        case ModulusKind::Power:
            return std::pow(r, eps_);
        case ModulusKind::LogPower:
            return std::pow(-std::log(r), -beta_);
        case ModulusKind::LogLog:
            return std::log(-k0_ * std::log(r)) / std::pow(-std::log(r), beta_);
        case ModulusKind::Custom:
            return custom_(r);
    }
    return 0.0;
}

double ModulusFunction::tail_value(double r) const {
    if (tail_.mode == TailMode::ConstantContinuation) return breakpoint_value_;
    return tail_.user_fn(r);
}

double ModulusFunction::operator()(double r) const {
    if (!(r > 0.0)) throw DomainError("eval_modulus: r must be > 0");
    const double v = (r <= breakpoint_) ? core(r) : tail_value(r);
    if (!std::isfinite(v))
        throw NonFiniteResult("eval_modulus(" + name_ + "): non-finite at r=" + std::to_string(r));
    return v;
}

double ModulusFunction::eval_dyadic(long i) const {
    if (i <= 0) return (*this)(std::ldexp(1.0, static_cast<int>(-i)));
    const double minus_log_r = static_cast<double>(i) * kLn2;  // -log(2^-i)
    switch (kind_) {
        case ModulusKind::Power: {
            const double v = std::exp2(-static_cast<double>(i) * eps_);
            return v;  // underflow to 0 is the correctly rounded value
        }
        case ModulusKind::LogPower: {
            if (i >= 1) return std::pow(minus_log_r, -beta_);
            break;
        }
        case ModulusKind::LogLog: {
            // 2^-i <= r0 iff i >= log2(1/r0); compare in log space.
            if (minus_log_r >= std::exp(1.0 / beta_) / k0_)
                return std::log(k0_ * minus_log_r) / std::pow(minus_log_r, beta_);
            if (tail_.mode == TailMode::ConstantContinuation) return breakpoint_value_;
            break;
        }
        case ModulusKind::Custom:
            break;
    }
    const double r = std::ldexp(1.0, static_cast<int>(std::max<long>(-i, -1080)));
    if (r == 0.0 || i > 1074)
        throw NonFiniteResult("eval_dyadic: 2^-i underflows for this modulus at i=" +
                              std::to_string(i));
    return (*this)(r);
}

std::optional<double> ModulusFunction::theoretical_lambda() const {
    switch (kind_) {
        case ModulusKind::Power:
            return std::exp2(eps_);
        case ModulusKind::LogPower:
            return std::exp2(beta_);
        case ModulusKind::LogLog: {
            const double l2r0 = std::exp(1.0 / beta_) / (k0_ * kLn2);  // log2(1/r0)
            const double boundary =
                std::log(k0_ * kLn2 * (l2r0 + 1.0)) / std::log(k0_ * kLn2 * l2r0);
            return std::max(std::exp2(beta_), boundary);
        }
        case ModulusKind::Custom:
            return std::nullopt;
    }
    return std::nullopt;
}

nlohmann::json ModulusFunction::to_json() const {
    if (kind_ == ModulusKind::Custom)
        throw ConfigError("modulus to_json: custom moduli are not serializable");
    if (tail_.mode == TailMode::UserFunction)
        throw ConfigError("modulus to_json: user tails are not serializable");
    nlohmann::json j;
    switch (kind_) {
        case ModulusKind::Power:
            j["kind"] = "power";
            j["epsilon"] = eps_;
            break;
        case ModulusKind::LogPower:
            j["kind"] = "logpower";
            j["beta"] = beta_;
            j["tail"] = "constant";
            break;
        case ModulusKind::LogLog:
            j["kind"] = "loglog";
            j["beta"] = beta_;
            j["k0"] = k0_;
            j["tail"] = "constant";
            break;
        default:
            break;
    }
    return j;
}

ModulusFunction ModulusFunction::from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (j.contains("tail") && j.at("tail").get<std::string>() != "constant")
        throw ConfigError("modulus from_json: only the constant tail is serializable");
    if (kind == "power") return power(j.at("epsilon").get<double>());
    if (kind == "logpower") return log_power(j.at("beta").get<double>());
    if (kind == "loglog") return log_log(j.at("beta").get<double>(), j.at("k0").get<double>());
    throw ConfigError("modulus from_json: unknown kind '" + kind + "'");
}

// ---------------------------------------------------------------------------

AxiomReport check_modulus_axioms(const ModulusFunction& phi, double r_min, double r_max,
                                 int n_probe, const AxiomCheckOptions& opts) {
    if (!(r_min > 0.0) || !(r_min < r_max)) throw ConfigError("check_modulus_axioms: bad range");
    if (n_probe < 2) throw ConfigError("check_modulus_axioms: n_probe must be >= 2");

    AxiomReport rep;
    rep.nonnegative = rep.nondecreasing = rep.vanishing_limit = true;

    const double log_ratio = std::log(r_max / r_min);
    std::vector<double> r(n_probe), v(n_probe);
    for (int j = 0; j < n_probe; ++j) {
        r[j] = r_min * std::exp(log_ratio * static_cast<double>(j) / (n_probe - 1));
        try {
            v[j] = phi(r[j]);
        } catch (const NonFiniteResult&) {
            rep.pass = false;
            rep.nonnegative = false;
            rep.first_violation_r = r[j];
            rep.detail = "non-finite value at r=" + std::to_string(r[j]);
            return rep;
        }
    }

    for (int j = 0; j < n_probe; ++j) {
        if (v[j] < 0.0) {
            rep.nonnegative = false;
            if (rep.first_violation_r == 0.0) rep.first_violation_r = r[j];
            break;
        }
    }
    for (int j = 0; j + 1 < n_probe; ++j) {
        if (v[j] > v[j + 1] + opts.tol_mono) {
            rep.nondecreasing = false;
            if (rep.first_violation_r == 0.0) rep.first_violation_r = r[j];
            break;
        }
    }
    if (!(v[0] < opts.tol_limit)) {
        rep.vanishing_limit = false;
        if (rep.first_violation_r == 0.0) rep.first_violation_r = r[0];
    }

    rep.pass = rep.nonnegative && rep.nondecreasing && rep.vanishing_limit;
    if (!rep.pass) {
        rep.detail = std::string("failed:") + (rep.nonnegative ? "" : " nonnegativity") +
                     (rep.nondecreasing ? "" : " monotonicity") +
                     (rep.vanishing_limit ? "" : " vanishing-limit");
    }
    return rep;
}

DyadicSumResult dyadic_sum(const ModulusFunction& phi, double exponent, long i_max,
                           TailMethod method) {
    if (!(exponent > 0.0)) throw ConfigError("dyadic_sum: exponent must be > 0");
    if (i_max < 1) throw ConfigError("dyadic_sum: i_max must be >= 1");

    std::vector<double> t(static_cast<std::size_t>(i_max) + 1);
    for (long i = 0; i <= i_max; ++i) {
        const double base = phi.eval_dyadic(i);
        const double term = std::pow(base, exponent);
        if (!std::isfinite(term))
            throw NonFiniteResult("dyadic_sum: non-finite term at i=" + std::to_string(i));
        t[static_cast<std::size_t>(i)] = term;
    }

    DyadicSumResult res;
    res.partial_sum = pairwise_sum(t);

    if (method == TailMethod::None) {
        res.method_note = "no tail method requested";
        return res;
    }

    constexpr double kRatioCert = 0.995;           // geometric certification threshold
    constexpr double kCondenseCert = 0.97;         // threshold for condensed terms
    constexpr double kDivergeFloor = 1.0 - 1e-9;   // nondecreasing (to rounding) terms diverge

    if (method == TailMethod::RatioTest) {
        const long w = std::min<long>(32, i_max);
        double qmax = 0.0, qmin = std::numeric_limits<double>::infinity();
        bool all_zero = true, saw_zero_div = false;
        for (long i = i_max - w; i < i_max; ++i) {
            const double a = t[static_cast<std::size_t>(i)];
            const double b = t[static_cast<std::size_t>(i) + 1];
            if (a == 0.0) {
                if (b != 0.0) saw_zero_div = true;
                continue;
            }
            all_zero = false;
            const double q = b / a;
            qmax = std::max(qmax, q);
            qmin = std::min(qmin, q);
        }
        if (all_zero) {
            res.verdict = SumVerdict::Converges;
            res.tail_bound = 0.0;
            res.method_note = "ratio test: terms vanish identically in the probe window";
        } else if (saw_zero_div) {
            res.method_note = "ratio test: zero term followed by nonzero term";
        } else if (qmax <= kRatioCert) {
            res.verdict = SumVerdict::Converges;
            res.tail_bound = t.back() * qmax / (1.0 - qmax);
            res.method_note = "ratio test: trailing ratios <= " + std::to_string(qmax);
        } else if (qmin >= 1.0 && t.back() > 0.0) {
            res.verdict = SumVerdict::Diverges;
            res.method_note = "ratio test: terms nondecreasing and bounded away from zero";
        } else {
            res.method_note = "ratio test: trailing ratio " + std::to_string(qmax) +
                              " too close to 1 to certify";
        }
        return res;
    }

    // IntegralBound: the piecewise-constant envelope e(x) = t_{2^k} on
    // [2^k, 2^{k+1}) dominates the nonincreasing terms, and its integral is
    // sum_k 2^k t_{2^k}; certify on those condensed terms.
    for (long i = 0; i < i_max; ++i) {
        if (t[static_cast<std::size_t>(i)] + 1e-15 < t[static_cast<std::size_t>(i) + 1]) {
            res.method_note = "integral bound: terms are not nonincreasing";
            return res;
        }
    }
    std::vector<double> u;
    for (long k = 0; (1L << k) <= i_max && k < 62; ++k)
        u.push_back(std::ldexp(t[static_cast<std::size_t>(1L << k)], static_cast<int>(k)));
    if (u.size() < 5) {
        res.method_note = "integral bound: i_max too small for condensation";
        return res;
    }
    double vmax = 0.0, vmin = std::numeric_limits<double>::infinity();
    const std::size_t wstart = u.size() - std::min<std::size_t>(6, u.size() - 1) - 1;
    bool tail_zero = true;
    for (std::size_t k = wstart; k + 1 < u.size(); ++k) {
        if (u[k] == 0.0) continue;
        tail_zero = tail_zero && (u[k + 1] == 0.0);
        const double v = u[k + 1] / u[k];
        vmax = std::max(vmax, v);
        vmin = std::min(vmin, v);
    }
    if (u.back() == 0.0 && tail_zero) {
        res.verdict = SumVerdict::Converges;
        res.tail_bound = 0.0;
        res.method_note = "integral bound: envelope vanishes in the probe window";
    } else if (vmax <= kCondenseCert) {
        res.verdict = SumVerdict::Converges;
        res.tail_bound = u.back() * vmax / (1.0 - vmax);
        res.method_note = "integral bound: condensed ratios <= " + std::to_string(vmax);
    } else if (vmin >= kDivergeFloor && u.back() > 0.0) {
        res.verdict = SumVerdict::Diverges;
        res.method_note = "integral bound: condensed envelope does not decay";
    } else {
        res.method_note = "integral bound: condensed ratio " + std::to_string(vmax) +
                          " too close to 1 to certify";
    }
    return res;
}

RatioConditionResult ratio_condition(const ModulusFunction& phi, long n_min, long n_max,
                                     std::optional<double> lambda_bound) {
    if (n_min < 1 || n_max <= n_min) throw ConfigError("ratio_condition: bad probe range");

    long n_start = n_min;
    if (phi.kind() == ModulusKind::LogLog) {
        const LogLogConstants c = loglog_constants(phi.beta(), phi.k0());
        n_start = std::max(n_start, c.n0);
        if (n_start >= n_max)
            throw ConfigError("ratio_condition: probe range empty past the LogLog breakpoint");
    }

    RatioConditionResult res;
    res.n_start = n_start;
    std::optional<double> bound = lambda_bound ? lambda_bound : phi.theoretical_lambda();
    res.bound_used = bound.value_or(0.0);
    res.holds = true;

    for (long n = n_start; n <= n_max; ++n) {
        const double num = phi.eval_dyadic(n);
        const double den = phi.eval_dyadic(n + 1);
        if (den == 0.0)
            throw DivisionByZero("ratio_condition: phi(2^-" + std::to_string(n + 1) + ") = 0");
        const double ratio = num / den;
        res.ratios.push_back(ratio);
        if (!(ratio > 0.0) || !std::isfinite(ratio)) {
            res.lambda_estimate = std::numeric_limits<double>::infinity();
            res.holds = false;
            if (res.first_violation_n < 0) res.first_violation_n = n;
            continue;
        }
        res.lambda_estimate = std::max(res.lambda_estimate, std::max(ratio, 1.0 / ratio));
        if (bound) {
            const double lim = *bound * (1.0 + 1e-12);
            if (ratio > lim || 1.0 / ratio > lim) {
                res.holds = false;
                if (res.first_violation_n < 0) res.first_violation_n = n;
            }
        }
    }
    if (!bound) res.holds = std::isfinite(res.lambda_estimate);
    return res;
}

std::optional<std::pair<double, double>> theta_window(const ModulusFunction& phi, double gamma) {
    if (!(gamma > 0.0)) throw ConfigError("theta_window: gamma must be > 0");
    switch (phi.kind()) {
        case ModulusKind::Power:
            return std::make_pair(0.0, 1.0 / gamma);
        case ModulusKind::LogPower:
        case ModulusKind::LogLog: {
            const double lo =
                (gamma >= 1.0) ? 1.0 / phi.beta() : 1.0 / (phi.beta() * gamma);
            const double hi = 1.0 / gamma;
            if (lo >= hi) return std::nullopt;
            return std::make_pair(lo, hi);
        }
        case ModulusKind::Custom:
            throw DomainError("theta_window: no closed-form window for custom moduli");
    }
    return std::nullopt;
}

LogLogConstants loglog_constants(double beta, double k0) {
    if (!(beta > 0.0) || !(k0 > 0.0)) throw DomainError("loglog_constants: beta, k0 must be > 0");
    LogLogConstants c;
    c.r0 = std::exp(-std::exp(1.0 / beta) / k0);
    // Enforce the bracketing 2^-n0 <= r0 < 2^-(n0-1) directly on the double.
    const double l2 = std::exp(1.0 / beta) / (k0 * kLn2);  // log2(1/r0)
    long n0 = static_cast<long>(std::floor(l2));
    while (std::ldexp(1.0, static_cast<int>(-n0)) > c.r0) ++n0;
    while (n0 > 1 && std::ldexp(1.0, static_cast<int>(-(n0 - 1))) <= c.r0) --n0;
    c.n0 = n0;
    return c;
}

AdmissibilityReport assess_admissibility(const ModulusFunction& phi, double gamma,
                                         std::optional<double> theta,
                                         const AdmissibilityOptions& opts) {
    if (!(gamma > 0.0)) throw ConfigError("assess_admissibility: gamma must be > 0");

    AdmissibilityReport rep;
    rep.gamma = gamma;
    if (phi.kind() != ModulusKind::Custom) rep.theta_window = theta_window(phi, gamma);

    if (theta) {
        rep.theta = *theta;
    } else if (rep.theta_window) {
        rep.theta = 0.5 * (rep.theta_window->first + rep.theta_window->second);
    } else {
        throw ConfigError("assess_admissibility: theta window empty and no theta supplied");
    }
    if (!(rep.theta > 0.0) || !(rep.theta < 1.0 / gamma))
        throw ConfigError("assess_admissibility: theta must lie in (0, 1/gamma)");

    rep.sum_exponent = (gamma >= 1.0) ? rep.theta : gamma * rep.theta;
    rep.sum = dyadic_sum(phi, rep.sum_exponent, opts.i_max, opts.tail_method);
    rep.ratio = ratio_condition(phi, opts.ratio_n_min, opts.ratio_n_max);
    rep.admissible = (rep.sum.verdict == SumVerdict::Converges) && rep.ratio.holds;
    return rep;
}

nlohmann::json AdmissibilityReport::to_json() const {
    nlohmann::json j;
    j["gamma"] = gamma;
    j["theta"] = theta;
    j["sum_exponent"] = sum_exponent;
    j["sum_value"] = sum.partial_sum;
    switch (sum.verdict) {
        case SumVerdict::Converges: j["sum_converges"] = "converges"; break;
        case SumVerdict::Diverges: j["sum_converges"] = "diverges"; break;
        case SumVerdict::Inconclusive: j["sum_converges"] = "inconclusive"; break;
    }
    j["sum_tail_bound"] = sum.tail_bound;
    j["sum_method_note"] = sum.method_note;
    j["lambda_estimate"] = ratio.lambda_estimate;
    j["ratio_holds"] = ratio.holds;
    j["ratio_bound_used"] = ratio.bound_used;
    if (theta_window)
        j["theta_window"] = {theta_window->first, theta_window->second};
    else
        j["theta_window"] = "empty";
    j["admissible"] = admissible;
    return j;
}

}  // namespace kct
