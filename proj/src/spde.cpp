#include "kct/spde.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "kct/fft.hpp"
#include "kct/io_util.hpp"
#include "kct/numeric.hpp"
#include "kct/quadrature.hpp"
#include "kct/rng.hpp"
#include "kct/thread_util.hpp"

namespace kct {

namespace {

void decode(std::size_t idx, int d, int n, std::int64_t* out) {
    for (int k = d - 1; k >= 0; --k) {
        out[k] = static_cast<std::int64_t>(idx % static_cast<std::size_t>(n));
        idx /= static_cast<std::size_t>(n);
    }
}

// |xi_k|^alpha on the kernel grid, DFT frequency ordering
std::vector<double> build_lambda(const KernelSpec& spec) {
    const std::size_t total = spec.grid_size();
    std::vector<double> lambda(total);
    std::vector<std::int64_t> idx(static_cast<std::size_t>(spec.d));
    const double dxi = 2.0 * M_PI / spec.extent;
    for (std::size_t p = 0; p < total; ++p) {
        decode(p, spec.d, spec.n, idx.data());
        double xi2 = 0.0;
        for (int k = 0; k < spec.d; ++k) {
            std::int64_t kk = idx[static_cast<std::size_t>(k)];
            if (kk >= spec.n / 2) kk -= spec.n;
            const double xik = dxi * static_cast<double>(kk);
            xi2 += xik * xik;
        }
        lambda[p] = std::pow(std::sqrt(xi2), spec.alpha);
    }
    return lambda;
}

template <typename Fn>
std::vector<double> sample_on_grid(const KernelSpec& spec, Fn&& fn) {
    const std::size_t total = spec.grid_size();
    std::vector<double> out(total);
    std::vector<std::int64_t> idx(static_cast<std::size_t>(spec.d));
    std::vector<double> x(static_cast<std::size_t>(spec.d));
    for (std::size_t p = 0; p < total; ++p) {
        decode(p, spec.d, spec.n, idx.data());
        for (int k = 0; k < spec.d; ++k)
            x[static_cast<std::size_t>(k)] = spec.coord(idx[static_cast<std::size_t>(k)]);
        out[p] = fn(std::span<const double>(x));
    }
    return out;
}

std::vector<std::complex<double>> forward_fft(const KernelSpec& spec,
                                              std::span<const double> samples) {
    std::vector<std::complex<double>> hat(samples.begin(), samples.end());
    fft_nd(hat, std::vector<std::size_t>(static_cast<std::size_t>(spec.d),
                                         static_cast<std::size_t>(spec.n)),
           false);
    return hat;
}

double nu_signed_first(const NuSpec& nu) {
    switch (nu.kind) {
        case NuSpec::Kind::UniformInterval:
            return nu.total_mass * 0.5 * (nu.a + nu.b);
        case NuSpec::Kind::PointMass:
            return nu.total_mass * nu.atom_mark.at(0);
        case NuSpec::Kind::UniformBall:
            return 0.0;  // symmetric
    }
    return 0.0;
}

struct MarkRule {
    std::vector<std::vector<double>> points;
    std::vector<double> weights;
};

MarkRule mark_rule(const NuSpec& nu, int n_nodes) {
    MarkRule rule;
    switch (nu.kind) {
        case NuSpec::Kind::PointMass:
            rule.points.push_back(nu.atom_mark);
            rule.weights.push_back(nu.total_mass);
            return rule;
        case NuSpec::Kind::UniformInterval: {
            const GaussRule g = gauss_legendre(n_nodes);
            const double half = 0.5 * (nu.b - nu.a);
            const double mid = 0.5 * (nu.a + nu.b);
            const double density = nu.total_mass / (nu.b - nu.a);
            for (std::size_t i = 0; i < g.nodes.size(); ++i) {
                rule.points.push_back({mid + half * g.nodes[i]});
                rule.weights.push_back(density * half * g.weights[i]);
            }
            return rule;
        }
        case NuSpec::Kind::UniformBall:
            throw QuadratureFailure(
                "spde: no mark quadrature for uniform_ball; declare closed-form integrals");
    }
    return rule;
}

// nodes for int_0^t f(r) exp(-(t-r) lambda) dr; the sqrt substitution
// s = sqrt(t-r) clusters nodes near r = t where the multiplier moves fastest
struct TimeRule {
    std::vector<double> r;
    std::vector<double> w;
};

TimeRule time_rule(double t, int nodes, bool sqrt_substitution) {
    TimeRule rule;
    const GaussRule g = gauss_legendre(nodes);
    if (!sqrt_substitution) {
        const double half = 0.5 * t;
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            rule.r.push_back(half * (1.0 + g.nodes[i]));
            rule.w.push_back(half * g.weights[i]);
        }
        return rule;
    }
    const double half = 0.5 * std::sqrt(t);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const double s = half * (1.0 + g.nodes[i]);
        rule.r.push_back(t - s * s);
        rule.w.push_back(half * g.weights[i] * 2.0 * s);
    }
    return rule;
}

// Frequency-space snapshot builder. The multiplier route coincides with
// kernel_convolve against the spectral kernel, and makes K(0) the exact
// identity.
class MildSolver {
  public:
    MildSolver(const PoissonMeasureSample& atoms, const ForcingSpec& forcing,
               const KernelSpec& kernel, const SpdeQuad& quad)
        : atoms_(atoms), forcing_(forcing), spec_(kernel), quad_(quad) {
        spec_.validate();
        if (!forcing_.g) throw ConfigError("mild_solution: forcing has no evaluator");
        lambda_ = build_lambda(spec_);
        total_ = spec_.grid_size();
        dims_.assign(static_cast<std::size_t>(spec_.d), static_cast<std::size_t>(spec_.n));

        for (const Atom& a : atoms_.atoms) {
            auto samples = sample_on_grid(
                spec_, [&](std::span<const double> x) { return forcing_.g(a.t, a.v, x); });
            atom_hats_.push_back(forward_fft(spec_, samples));
        }

        if (forcing_.separable) {
            if (!forcing_.shape || !forcing_.coeff)
                throw ConfigError("mild_solution: separable forcing without shape/coeff");
            shape_hat_ = forward_fft(spec_, sample_on_grid(spec_, [&](std::span<const double> x) {
                                         return forcing_.shape(x);
                                     }));
            if (forcing_.coeff_nu_mean) {
                cmean_ = forcing_.coeff_nu_mean;
            } else {
                const MarkRule marks = mark_rule(require_nu(), quad_.mark_nodes);
                const auto coeff = forcing_.coeff;
                cmean_ = [marks, coeff](double r) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < marks.points.size(); ++i)
                        s += marks.weights[i] * coeff(r, marks.points[i]);
                    return s;
                };
            }
        }
    }

    std::size_t grid_size() const { return total_; }
    bool compensator_is_exact() const { return forcing_.separable && forcing_.time_invariant; }

    void snapshot(double t, bool left_limit, int time_nodes, std::span<double> jump_out,
                  std::span<double> comp_out) const {
        std::vector<std::complex<double>> hat(total_);
        jump_hat(t, left_limit, hat);
        fft_nd(hat, dims_, true);
        for (std::size_t k = 0; k < total_; ++k) jump_out[k] = hat[k].real();
        comp_hat(t, time_nodes, hat);
        fft_nd(hat, dims_, true);
        for (std::size_t k = 0; k < total_; ++k) comp_out[k] = hat[k].real();
    }

  private:
    const NuSpec& require_nu() const {
        if (!forcing_.nu)
            throw QuadratureFailure("mild_solution: forcing lacks nu for quadrature fallback");
        return *forcing_.nu;
    }

    void jump_hat(double t, bool left_limit, std::vector<std::complex<double>>& out) const {
        out.assign(total_, {0.0, 0.0});
        for (std::size_t j = 0; j < atoms_.atoms.size(); ++j) {
            const double tj = atoms_.atoms[j].t;
            if (left_limit ? (tj >= t) : (tj > t)) break;  // atoms sorted
            const double tau = t - tj;
            const auto& ghat = atom_hats_[j];
            for (std::size_t k = 0; k < total_; ++k)
                out[k] += ghat[k] * std::exp(-tau * lambda_[k]);
        }
    }

    void comp_hat(double t, int time_nodes, std::vector<std::complex<double>>& out) const {
        out.assign(total_, {0.0, 0.0});
        if (t <= 0.0) return;
        if (forcing_.separable && forcing_.time_invariant) {
            // exact per-frequency weight m_c (1 - e^{-t lambda}) / lambda
            const double mc = cmean_(0.0);
            for (std::size_t k = 0; k < total_; ++k) {
                const double lam = lambda_[k];
                const double w = (lam == 0.0) ? t : (1.0 - std::exp(-t * lam)) / lam;
                out[k] = shape_hat_[k] * (mc * w);
            }
            return;
        }
        if (forcing_.separable) {
            const TimeRule rule = time_rule(t, time_nodes, quad_.sqrt_substitution);
            std::vector<double> w(total_, 0.0);
            for (std::size_t q = 0; q < rule.r.size(); ++q) {
                const double f = cmean_(rule.r[q]) * rule.w[q];
                const double tau = t - rule.r[q];
                for (std::size_t k = 0; k < total_; ++k)
                    w[k] += f * std::exp(-tau * lambda_[k]);
            }
            for (std::size_t k = 0; k < total_; ++k) out[k] = shape_hat_[k] * w[k];
            return;
        }
        // general route: one forcing FFT per (time node, mark node)
        const TimeRule rule = time_rule(t, time_nodes, quad_.sqrt_substitution);
        const MarkRule marks = mark_rule(require_nu(), quad_.mark_nodes);
        for (std::size_t q = 0; q < rule.r.size(); ++q) {
            const double r = rule.r[q];
            const double tau = t - r;
            for (std::size_t m = 0; m < marks.points.size(); ++m) {
                const auto& v = marks.points[m];
                const double wt = rule.w[q] * marks.weights[m];
                auto ghat =
                    forward_fft(spec_, sample_on_grid(spec_, [&](std::span<const double> x) {
                                    return forcing_.g(r, v, x);
                                }));
                for (std::size_t k = 0; k < total_; ++k)
                    out[k] += ghat[k] * (wt * std::exp(-tau * lambda_[k]));
            }
        }
    }

    const PoissonMeasureSample& atoms_;
    const ForcingSpec& forcing_;
    KernelSpec spec_;
    SpdeQuad quad_;
    std::size_t total_ = 0;
    std::vector<std::size_t> dims_;
    std::vector<double> lambda_;
    std::vector<std::vector<std::complex<double>>> atom_hats_;
    std::vector<std::complex<double>> shape_hat_;
    std::function<double(double)> cmean_;
};

MildSolutionField build_field(const PoissonMeasureSample& atoms, const ForcingSpec& forcing,
                              const KernelSpec& kernel, const std::vector<double>& times,
                              const SpdeQuad& quad) {
    MildSolver solver(atoms, forcing, kernel, quad);
    MildSolutionField field;
    field.kernel = kernel;
    field.forcing_name = forcing.name;
    field.times = times;
    field.atoms = atoms;
    field.seed = atoms.seed;
    const std::size_t n = solver.grid_size();
    field.values.assign(times.size() * n, 0.0);
    field.jump_part.assign(times.size() * n, 0.0);
    field.comp_part.assign(times.size() * n, 0.0);
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        std::span<double> jump(field.jump_part.data() + ti * n, n);
        std::span<double> comp(field.comp_part.data() + ti * n, n);
        solver.snapshot(times[ti], false, quad.time_nodes, jump, comp);
        for (std::size_t k = 0; k < n; ++k) field.values[ti * n + k] = jump[k] - comp[k];
    }

    // node-doubling error estimate at the last time (quadrature routes only)
    if (!solver.compensator_is_exact() && times.back() > 0.0) {
        std::vector<double> jump(n), comp2(n);
        solver.snapshot(times.back(), false, 2 * quad.time_nodes, jump, comp2);
        double sup_diff = 0.0, sup_val = 0.0;
        const std::size_t off = (times.size() - 1) * n;
        for (std::size_t k = 0; k < n; ++k) {
            sup_diff = std::max(sup_diff, std::abs(comp2[k] - field.comp_part[off + k]));
            sup_val = std::max(sup_val, std::abs(comp2[k]));
        }
        field.comp_error = sup_diff;
        if (sup_diff > quad.rel_tol * (1.0 + sup_val))
            throw QuadratureFailure("mild_solution: compensator node doubling disagreement " +
                                    fmt_double(sup_diff));
    }
    return field;
}

}  // namespace

// ---------------------------------------------------------------------------
// Forcing factories (d = 1 space, scalar marks)
// ---------------------------------------------------------------------------

namespace {

void require_scalar_marks(const LevyConfig& levy, const char* who) {
    if (levy.d_jump != 1) throw ConfigError(std::string(who) + ": requires d_jump = 1");
}

}  // namespace

ForcingSpec forcing_sine(const LevyConfig& levy, double p, double freq,
                         std::optional<double> h_scale) {
    require_scalar_marks(levy, "forcing_sine");
    if (!(p > 1.0)) throw ConfigError("forcing_sine: certificate requires p > 1");
    if (!(freq > 0.0)) throw ConfigError("forcing_sine: freq must be > 0");
    const double scale = h_scale.value_or(freq);
    const NuSpec nu = levy.nu;

    ForcingSpec f;
    f.name = (freq == 1.0) ? "eigen_sine" : ("sine_freq_" + fmt_double(freq));
    f.g = [freq](double, const std::vector<double>& v, std::span<const double> x) {
        return v.at(0) * std::sin(freq * x[0]);
    };
    f.sup_norm = [](double, const std::vector<double>& v) { return std::abs(v.at(0)); };
    f.h = [scale](double, const std::vector<double>& v) { return scale * std::abs(v.at(0)); };
    f.p = p;
    f.phi = ModulusFunction::power(p - 1.0);
    f.separable = true;
    f.time_invariant = true;
    f.coeff = [](double, const std::vector<double>& v) { return v.at(0); };
    f.shape = [freq](std::span<const double> x) { return std::sin(freq * x[0]); };
    const double signed_first = nu_signed_first(nu);
    f.coeff_nu_mean = [signed_first](double) { return signed_first; };
    f.h_l1 = [nu, scale](double T) { return scale * nu.moment_abs(1.0) * T; };
    f.h_lp = [nu, scale](double pp, double T) {
        return std::pow(scale, pp) * nu.moment_abs(pp) * T;
    };
    f.sup_nu_integral = [nu](double T) { return nu.moment_abs(1.0) * T; };
    f.nu = nu;
    return f;
}

ForcingSpec forcing_det_sine(const LevyConfig& levy, double p) {
    require_scalar_marks(levy, "forcing_det_sine");
    if (!(p > 1.0)) throw ConfigError("forcing_det_sine: certificate requires p > 1");
    const double mass = levy.nu.total_mass;

    ForcingSpec f;
    f.name = "det_sine";
    f.g = [](double, const std::vector<double>&, std::span<const double> x) {
        return std::sin(x[0]);
    };
    f.sup_norm = [](double, const std::vector<double>&) { return 1.0; };
    f.h = [](double, const std::vector<double>&) { return 1.0; };
    f.p = p;
    f.phi = ModulusFunction::power(p - 1.0);
    f.separable = true;
    f.time_invariant = true;
    f.coeff = [](double, const std::vector<double>&) { return 1.0; };
    f.shape = [](std::span<const double> x) { return std::sin(x[0]); };
    f.coeff_nu_mean = [mass](double) { return mass; };
    f.h_l1 = [mass](double T) { return mass * T; };
    f.h_lp = [mass](double, double T) { return mass * T; };
    f.sup_nu_integral = [mass](double T) { return mass * T; };
    f.nu = levy.nu;
    return f;
}

ForcingSpec forcing_mark_constant(const LevyConfig& levy, double p) {
    require_scalar_marks(levy, "forcing_mark_constant");
    const NuSpec nu = levy.nu;

    ForcingSpec f;
    f.name = "mark_constant";
    f.g = [](double, const std::vector<double>& v, std::span<const double>) { return v.at(0); };
    f.sup_norm = [](double, const std::vector<double>& v) { return std::abs(v.at(0)); };
    f.h = [](double, const std::vector<double>&) { return 0.0; };  // constant in x
    f.p = p;
    f.phi = ModulusFunction::power(1.0);
    f.separable = true;
    f.time_invariant = true;
    f.coeff = [](double, const std::vector<double>& v) { return v.at(0); };
    f.shape = [](std::span<const double>) { return 1.0; };
    const double signed_first = nu_signed_first(nu);
    f.coeff_nu_mean = [signed_first](double) { return signed_first; };
    f.h_l1 = [](double) { return 0.0; };
    f.h_lp = [](double, double) { return 0.0; };
    f.sup_nu_integral = [nu](double T) { return nu.moment_abs(1.0) * T; };
    f.nu = nu;
    return f;
}

ForcingSpec forcing_zero() {
    ForcingSpec f;
    f.name = "zero";
    f.g = [](double, const std::vector<double>&, std::span<const double>) { return 0.0; };
    f.sup_norm = [](double, const std::vector<double>&) { return 0.0; };
    f.h = [](double, const std::vector<double>&) { return 0.0; };
    f.p = 2.0;
    f.phi = ModulusFunction::power(1.0);
    f.separable = true;
    f.time_invariant = true;
    f.coeff = [](double, const std::vector<double>&) { return 0.0; };
    f.shape = [](std::span<const double>) { return 0.0; };
    f.coeff_nu_mean = [](double) { return 0.0; };
    f.h_l1 = [](double) { return 0.0; };
    f.h_lp = [](double, double) { return 0.0; };
    f.sup_nu_integral = [](double) { return 0.0; };
    return f;
}

// ---------------------------------------------------------------------------
// Mild solution
// ---------------------------------------------------------------------------

MildSolutionField mild_solution(const PoissonMeasureSample& atoms, const ForcingSpec& forcing,
                                const KernelSpec& kernel, std::vector<double> times,
                                const SpdeQuad& quad) {
    if (times.empty()) throw ConfigError("mild_solution: empty time list");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= 0.0)) throw ConfigError("mild_solution: negative evaluation time");
        if (i > 0 && !(times[i] > times[i - 1]))
            throw ConfigError("mild_solution: times must be strictly increasing");
    }
    if (times.back() > 0.0) kernel_eval(kernel, times.back());  // mass check; throws MassDeficit
    return build_field(atoms, forcing, kernel, times, quad);
}

std::vector<double> mild_solution_at(const PoissonMeasureSample& atoms,
                                     const ForcingSpec& forcing, const KernelSpec& kernel,
                                     double t, bool left_limit, const SpdeQuad& quad) {
    MildSolver solver(atoms, forcing, kernel, quad);
    const std::size_t n = solver.grid_size();
    std::vector<double> jump(n), comp(n), out(n);
    solver.snapshot(t, left_limit, quad.time_nodes, jump, comp);
    for (std::size_t k = 0; k < n; ++k) out[k] = jump[k] - comp[k];
    return out;
}

std::string MildSolutionField::to_csv() const {
    std::string csv = "time";
    for (int k = 0; k < kernel.d; ++k) csv += ",x" + std::to_string(k + 1);
    csv += ",u,jump_part,comp_part\n";
    const std::size_t n = kernel.grid_size();
    std::vector<std::int64_t> idx(static_cast<std::size_t>(kernel.d));
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        for (std::size_t p = 0; p < n; ++p) {
            csv += fmt_double(times[ti]);
            decode(p, kernel.d, kernel.n, idx.data());
            for (int k = 0; k < kernel.d; ++k)
                csv += "," + fmt_double(kernel.coord(idx[static_cast<std::size_t>(k)]));
            csv += "," + fmt_double(values[ti * n + p]);
            csv += "," + fmt_double(jump_part[ti * n + p]);
            csv += "," + fmt_double(comp_part[ti * n + p]) + "\n";
        }
    }
    return csv;
}

// ---------------------------------------------------------------------------
// Certificate checks
// ---------------------------------------------------------------------------

PassFailReport forcing_certificate_check(const ForcingSpec& forcing, const LevyConfig& levy,
                                         double probe_radius, std::size_t n_probes,
                                         std::uint64_t seed) {
    PassFailReport rep;
    Rng rng(seed);
    const double envelope_bump = 1.0 + forcing.cert_tol;
    for (std::size_t i = 0; i < n_probes; ++i) {
        const double t = levy.horizon * rng.uniform01_pos();
        const std::vector<double> v = levy.nu.sample(rng);
        const double x = rng.uniform(-probe_radius, probe_radius);
        const double y = rng.uniform(-probe_radius, probe_radius);
        const double r = std::abs(x - y);
        if (r == 0.0) continue;
        const double lhs = std::abs(forcing.g(t, v, std::span<const double>(&x, 1)) -
                                    forcing.g(t, v, std::span<const double>(&y, 1)));
        const double rhs = forcing.h(t, v) * std::pow(r, 1.0 / forcing.p) *
                           std::pow(forcing.phi(r), 1.0 / forcing.p) * envelope_bump;
        ++rep.n_checked;
        const double factor = (rhs > 0.0) ? lhs / rhs : (lhs > 0.0 ? INFINITY : 0.0);
        rep.worst_factor = std::max(rep.worst_factor, factor);
        if (lhs > rhs) {
            ++rep.n_failures;
            if (rep.pass)
                rep.witness = "t=" + fmt_double(t) + " v=" + fmt_double(v.at(0)) +
                              " x=" + fmt_double(x) + " y=" + fmt_double(y) +
                              " lhs=" + fmt_double(lhs) + " rhs=" + fmt_double(rhs);
            rep.pass = false;
        }
    }
    return rep;
}

PassFailReport convolution_modulus_lemma(const ForcingSpec& forcing, const KernelSpec& kernel,
                                         const LevyConfig& levy, double probe_radius,
                                         std::size_t n_probes, std::uint64_t seed,
                                         const SpdeQuad& quad) {
    (void)quad;
    kernel.validate();
    if (kernel.d != 1) throw ConfigError("convolution_modulus_lemma: d = 1 probes only");
    PassFailReport rep;
    Rng rng(seed);
    const std::vector<double> lambda = build_lambda(kernel);
    const std::vector<std::size_t> dims(1, static_cast<std::size_t>(kernel.n));
    const std::size_t n = kernel.grid_size();

    std::vector<std::size_t> ball;
    for (std::size_t p = 0; p < n; ++p)
        if (std::abs(kernel.coord(static_cast<std::int64_t>(p))) <= probe_radius)
            ball.push_back(p);
    if (ball.size() < 2) throw ConfigError("convolution_modulus_lemma: probe ball too small");

    const double envelope_bump = 1.0 + kernel.mass_tol + forcing.cert_tol;
    for (std::size_t i = 0; i < n_probes; ++i) {
        const double r_time = levy.horizon * rng.uniform01();
        const double tau = (levy.horizon - r_time) * rng.uniform01();
        const std::vector<double> v = levy.nu.sample(rng);

        auto ghat = forward_fft(kernel, sample_on_grid(kernel, [&](std::span<const double> x) {
                                    return forcing.g(r_time, v, x);
                                }));
        for (std::size_t k = 0; k < n; ++k) ghat[k] *= std::exp(-tau * lambda[k]);
        fft_nd(ghat, dims, true);

        const std::size_t a = ball[rng.next_u64() % ball.size()];
        std::size_t b = ball[rng.next_u64() % ball.size()];
        if (a == b) b = (a == ball.back()) ? ball.front() : ball.back();
        const double dist = std::abs(kernel.coord(static_cast<std::int64_t>(a)) -
                                     kernel.coord(static_cast<std::int64_t>(b)));
        const double lhs = std::abs(ghat[a].real() - ghat[b].real());
        const double rhs = forcing.h(r_time, v) * std::pow(dist, 1.0 / forcing.p) *
                           std::pow(forcing.phi(dist), 1.0 / forcing.p) * envelope_bump;
        ++rep.n_checked;
        const double factor = (rhs > 0.0) ? lhs / rhs : (lhs > 0.0 ? INFINITY : 0.0);
        rep.worst_factor = std::max(rep.worst_factor, factor);
        if (lhs > rhs) {
            ++rep.n_failures;
            if (rep.pass)
                rep.witness = "r=" + fmt_double(r_time) + " tau=" + fmt_double(tau) +
                              " v=" + fmt_double(v.at(0)) + " |x-y|=" + fmt_double(dist) +
                              " lhs=" + fmt_double(lhs) + " rhs=" + fmt_double(rhs);
            rep.pass = false;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Ensembles and Monte Carlo checks
// ---------------------------------------------------------------------------

void for_each_replication(const SpdeExperiment& exp,
                          const std::function<void(std::size_t, const MildSolutionField&)>& fn) {
    if (exp.n_rep < 1) throw ConfigError("spde experiment: n_rep must be >= 1");
    if (exp.times.empty()) throw ConfigError("spde experiment: empty time list");
    exp.levy.validate();
    // one mass check up front instead of per replication
    if (exp.times.back() > 0.0) kernel_eval(exp.kernel, exp.times.back());

    parallel_for(static_cast<std::size_t>(exp.n_rep), exp.threads, [&](std::size_t rep) {
        const PoissonMeasureSample atoms =
            sample_prm(exp.levy, derive_replication_seed(exp.master_seed, rep));
        MildSolutionField field = build_field(atoms, exp.forcing, exp.kernel, exp.times, exp.quad);
        field.levy = exp.levy;
        fn(rep, field);
    });
}

namespace {

struct ProbeIndexPair {
    std::size_t a, b;
    double weight;  // meaning depends on the caller
};

std::vector<std::size_t> ball_indices(const KernelSpec& spec, double radius) {
    std::vector<std::size_t> out;
    for (int j = 0; j < spec.n; ++j)
        if (std::abs(spec.coord(j)) <= radius) out.push_back(static_cast<std::size_t>(j));
    return out;
}

void require_d1(const SpdeExperiment& exp, const char* who) {
    if (exp.kernel.d != 1)
        throw ConfigError(std::string(who) + ": implemented for d = 1 experiments");
}

}  // namespace

SlopeReport modulus_estimate_check(const SpdeExperiment& exp, double p,
                                   const ModulusFunction& phi, std::size_t pair_budget,
                                   double slope_tol) {
    require_d1(exp, "modulus_estimate_check");
    if (exp.n_rep < 2)
        throw InsufficientReplications("modulus_estimate_check: need >= 2 replications");
    if (!(p >= 1.0)) throw ConfigError("modulus_estimate_check: p must be >= 1");

    const double dx = exp.kernel.dx();
    const std::vector<std::size_t> ball = ball_indices(exp.kernel, exp.probe_radius);
    if (ball.size() < 2) throw ConfigError("modulus_estimate_check: probe ball too small");

    // pairs across dyadic separations 1, 1/2, ... down to the grid spacing
    struct DistPair {
        std::size_t a, b;
        double distance;
    };
    std::vector<DistPair> pairs;
    int n_scales = 0;
    for (int k = 0; std::ldexp(1.0, -k) >= dx; ++k) ++n_scales;
    const std::size_t per_scale = std::max<std::size_t>(1, pair_budget / std::max(1, n_scales));
    std::size_t prev_stride = 0;
    for (int k = 0;; ++k) {
        const double target = std::ldexp(1.0, -k);
        if (target < dx) break;
        const std::size_t stride =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(target / dx)));
        if (stride == prev_stride) continue;
        prev_stride = stride;
        std::vector<DistPair> scale_pairs;
        for (std::size_t i = 0; i + stride < ball.size(); ++i) {
            if (ball[i] + stride != ball[i + stride]) continue;  // keep contiguous runs
            scale_pairs.push_back({ball[i], ball[i] + stride, static_cast<double>(stride) * dx});
        }
        if (scale_pairs.empty()) continue;
        const std::size_t take = std::min(per_scale, scale_pairs.size());
        const std::size_t step = std::max<std::size_t>(1, scale_pairs.size() / take);
        for (std::size_t i = 0; i < scale_pairs.size(); i += step) pairs.push_back(scale_pairs[i]);
    }
    if (pairs.empty()) throw ConfigError("modulus_estimate_check: no probe pairs");

    std::vector<double> vals(pairs.size() * static_cast<std::size_t>(exp.n_rep), 0.0);
    const std::size_t n = exp.kernel.grid_size();
    for_each_replication(exp, [&](std::size_t rep, const MildSolutionField& field) {
        for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
            double sup = 0.0;
            for (std::size_t ti = 0; ti < field.times.size(); ++ti) {
                const double diff = std::abs(field.values[ti * n + pairs[pi].a] -
                                             field.values[ti * n + pairs[pi].b]);
                sup = std::max(sup, diff);
            }
            vals[pi * static_cast<std::size_t>(exp.n_rep) + rep] = std::pow(sup, p);
        }
    });

    SlopeReport rep;
    rep.slope_tol = slope_tol;
    for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
        MomentPairStat st;
        st.distance = pairs[pi].distance;
        st.e_hat =
            mean(std::span<const double>(vals.data() + pi * static_cast<std::size_t>(exp.n_rep),
                                         static_cast<std::size_t>(exp.n_rep)));
        st.envelope = st.distance * phi(st.distance);  // d = 1
        rep.pairs.push_back(st);
    }

    std::vector<double> lx, le, ly, ratios;
    for (const auto& st : rep.pairs) {
        if (st.e_hat <= 0.0 || st.envelope <= 0.0) continue;
        lx.push_back(std::log(st.distance));
        le.push_back(std::log(st.envelope));
        ly.push_back(std::log(st.e_hat));
        ratios.push_back(st.e_hat / st.envelope);
    }
    if (ratios.empty()) {
        rep.trivial_zero = true;
        rep.consistent = true;
        return rep;
    }
    if (lx.size() >= 2) {
        rep.slope_distance = linear_fit(lx, ly).slope;
        const LinearFit fe = linear_fit(le, ly);
        rep.slope_envelope = fe.slope;
        rep.c_hat = std::exp(fe.intercept);
    }
    double lo = ratios[0], hi = ratios[0];
    for (double r : ratios) {
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    rep.max_ratio = hi;
    rep.ratio_spread = hi / lo;
    rep.consistent =
        (rep.slope_envelope >= 1.0 - slope_tol) && std::isfinite(hi) && rep.ratio_spread <= 100.0;
    return rep;
}

SeminormLevelReport holder_conclusion_check(const SpdeExperiment& exp, double p,
                                            const ModulusFunction& phi, double theta, double beta,
                                            std::vector<int> levels, double growth_tol) {
    require_d1(exp, "holder_conclusion_check");
    if (exp.n_rep < 2)
        throw InsufficientReplications("holder_conclusion_check: need >= 2 replications");
    if (!(p >= 1.0)) throw ConfigError("holder_conclusion_check: p must be >= 1");
    if (!(theta > 0.0) || !(theta < 1.0 / p))
        throw ConfigError("holder_conclusion_check: theta must be in (0, 1/p)");
    if (!(beta > 0.0) || beta > 1.0 / p - theta)
        throw ConfigError("holder_conclusion_check: beta must be in (0, 1/p - theta]");
    if (levels.size() < 2) throw ConfigError("holder_conclusion_check: need >= 2 levels");
    std::sort(levels.begin(), levels.end());

    const double dx = exp.kernel.dx();
    const std::vector<std::size_t> ball = ball_indices(exp.kernel, exp.probe_radius);
    const int finest = levels.back();
    const std::size_t stride_finest = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(std::ldexp(1.0, -finest) / dx)));

    // nested probe sets: the stride doubles as the level coarsens, so the
    // empirical seminorm is nondecreasing in the level by construction
    std::vector<std::vector<ProbeIndexPair>> pairs(levels.size());
    for (std::size_t li = 0; li < levels.size(); ++li) {
        const std::size_t stride = stride_finest << (finest - levels[li]);
        std::vector<std::size_t> pts;
        for (std::size_t i = 0; i < ball.size(); i += stride) pts.push_back(ball[i]);
        if (pts.size() < 2)
            throw ConfigError("holder_conclusion_check: probe level too coarse for the grid");
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j) {
                const double dist = dx * static_cast<double>(pts[j] - pts[i]);
                const double ph = phi(dist);
                if (ph == 0.0)
                    throw DivisionByZero("holder_conclusion_check: phi vanishes at probe pair");
                pairs[li].push_back({pts[i], pts[j], std::pow(ph, -beta * p)});
            }
    }

    std::vector<double> sups(levels.size() * static_cast<std::size_t>(exp.n_rep), 0.0);
    const std::size_t n = exp.kernel.grid_size();
    for_each_replication(exp, [&](std::size_t rep, const MildSolutionField& field) {
        for (std::size_t li = 0; li < levels.size(); ++li) {
            double sup = 0.0;
            for (std::size_t ti = 0; ti < field.times.size(); ++ti) {
                const double* u = field.values.data() + ti * n;
                for (const ProbeIndexPair& pr : pairs[li]) {
                    const double diff = std::abs(u[pr.a] - u[pr.b]);
                    sup = std::max(sup, std::pow(diff, p) * pr.weight);
                }
            }
            sups[li * static_cast<std::size_t>(exp.n_rep) + rep] = sup;
        }
    });

    SeminormLevelReport rep;
    rep.p = p;
    rep.theta = theta;
    rep.beta = beta;
    rep.levels = levels;
    for (std::size_t li = 0; li < levels.size(); ++li)
        rep.seminorm.push_back(
            mean(std::span<const double>(sups.data() + li * static_cast<std::size_t>(exp.n_rep),
                                         static_cast<std::size_t>(exp.n_rep))));

    rep.max_rel_increase = 0.0;
    bool finite = true;
    for (std::size_t li = 0; li + 1 < levels.size(); ++li) {
        const double a = rep.seminorm[li];
        const double b = rep.seminorm[li + 1];
        double inc;
        if (a == 0.0)
            inc = (b == 0.0) ? 0.0 : std::numeric_limits<double>::infinity();
        else
            inc = std::max(0.0, (b - a) / a);
        finite = finite && std::isfinite(inc);
        rep.max_rel_increase = std::max(rep.max_rel_increase, inc);
    }
    rep.stable = finite && rep.max_rel_increase < growth_tol;
    return rep;
}

InequalityReport sup_bound_check(const SpdeExperiment& exp,
                                 const std::vector<std::size_t>& batch_sizes, double drift_tol) {
    require_d1(exp, "sup_bound_check");
    if (batch_sizes.empty() || batch_sizes.back() < 2)
        throw InsufficientReplications("sup_bound_check: need >= 2 replications");
    if (!exp.forcing.sup_nu_integral)
        throw ConfigError("sup_bound_check: forcing must declare sup_nu_integral");

    SpdeExperiment run = exp;
    run.n_rep = static_cast<int>(batch_sizes.back());

    const std::size_t n = exp.kernel.grid_size();
    std::vector<double> lhs(batch_sizes.back(), 0.0);
    for_each_replication(run, [&](std::size_t rep, const MildSolutionField& field) {
        double sup = 0.0;
        for (std::size_t ti = 0; ti < field.times.size(); ++ti)
            for (std::size_t k = 0; k < n; ++k)
                sup = std::max(sup, std::abs(field.values[ti * n + k]));
        lhs[rep] = sup;
    });

    const double rhs = exp.forcing.sup_nu_integral(exp.levy.horizon);
    return make_ratio_report(std::move(lhs), {rhs}, batch_sizes, drift_tol, exp.master_seed,
                             "sup bound: int_0^T int ||g||_inf dnu dr");
}

nlohmann::json SlopeReport::to_json() const {
    nlohmann::json j;
    j["slope_distance"] = slope_distance;
    j["slope_envelope"] = slope_envelope;
    j["c_hat"] = c_hat;
    j["max_ratio"] = max_ratio;
    j["ratio_spread"] = ratio_spread;
    j["consistent"] = consistent;
    j["trivial_zero"] = trivial_zero;
    j["slope_tol"] = slope_tol;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& st : pairs)
        rows.push_back({{"distance", st.distance}, {"e_hat", st.e_hat}, {"envelope", st.envelope}});
    j["pairs"] = rows;
    return j;
}

nlohmann::json SeminormLevelReport::to_json() const {
    nlohmann::json j;
    j["p"] = p;
    j["theta"] = theta;
    j["beta"] = beta;
    j["levels"] = levels;
    j["seminorm"] = seminorm;
    j["max_rel_increase"] = max_rel_increase;
    j["stable"] = stable;
    return j;
}

}  // namespace kct
