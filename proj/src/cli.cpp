#include "kct/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "kct/chaining.hpp"
#include "kct/errors.hpp"
#include "kct/field_gen.hpp"
#include "kct/io_util.hpp"
#include "kct/kernel.hpp"
#include "kct/levy.hpp"
#include "kct/modulus.hpp"
#include "kct/spde.hpp"

namespace kct::cli {

namespace {

// Strict schema guard: unknown keys are rejected before any computation.
void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

std::vector<double> parse_times(const nlohmann::json& j, const std::string& where) {
    std::vector<double> times;
    if (j.is_array()) {
        times = j.get<std::vector<double>>();
    } else if (j.is_object()) {
        check_keys(j, {"count", "t_max"}, where);
        const int count = j.at("count").get<int>();
        const double t_max = j.value("t_max", 1.0);
        if (count < 1) throw ConfigError(where + ": count must be >= 1");
        for (int i = 1; i <= count; ++i)
            times.push_back(t_max * static_cast<double>(i) / static_cast<double>(count));
    } else {
        throw ConfigError(where + ": expected array or {count, t_max}");
    }
    if (times.empty()) throw ConfigError(where + ": empty time grid");
    for (std::size_t i = 0; i + 1 < times.size(); ++i)
        if (!(times[i] < times[i + 1])) throw ConfigError(where + ": times must increase");
    return times;
}

ModulusFunction parse_modulus(const nlohmann::json& j, const std::string& where) {
    check_keys(j, {"kind", "epsilon", "beta", "k0", "tail"}, where);
    return ModulusFunction::from_json(j);
}

NuSpec parse_nu(const nlohmann::json& j, const std::string& where) {
    check_keys(j, {"kind", "total_mass", "d_jump", "a", "b", "radius", "mark"}, where);
    return NuSpec::from_json(j);
}

LevyConfig parse_levy(const nlohmann::json& j) {
    check_keys(j, {"c", "d_jump", "nu", "T"}, "levy");
    parse_nu(j.at("nu"), "levy.nu");
    return LevyConfig::from_json(j);
}

KernelSpec parse_kernel(const nlohmann::json& j) {
    check_keys(j, {"alpha", "d", "L", "n", "method", "mass_tol"}, "kernel");
    return KernelSpec::from_json(j);
}

std::uint64_t resolve_seed(const nlohmann::json& config, const RunContext& ctx) {
    std::uint64_t seed = config.value("seed", std::uint64_t{1});
    if (ctx.seed_override) seed = *ctx.seed_override;
    return seed;
}

// Collects artifacts, then writes them plus a manifest with per-output
// checksums. Output bytes are deterministic for a fixed config + seed; the
// manifest additionally records the wall clock (excluded from checksums).
class OutputBundle {
  public:
    explicit OutputBundle(std::string out_dir) : out_dir_(std::move(out_dir)) {
        start_ = std::chrono::steady_clock::now();
    }

    void add(const std::string& name, std::string content) {
        outputs_.emplace(name, std::move(content));
    }

    void finalize(const nlohmann::json& config, std::uint64_t seed) {
        std::filesystem::create_directories(out_dir_);
        nlohmann::json manifest;
        manifest["config_hash"] = hex64(fnv1a64(config.dump()));
        manifest["seed"] = seed;
        manifest["tool_version"] = kToolVersion;
        nlohmann::json sums;
        for (const auto& [name, content] : outputs_) {
            write_text_file(out_dir_ + "/" + name, content);
            sums[name] = hex64(fnv1a64(content));
        }
        manifest["outputs"] = sums;
        const auto elapsed = std::chrono::steady_clock::now() - start_;
        manifest["wall_clock_ms"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
        write_text_file(out_dir_ + "/manifest.json", manifest.dump(2) + "\n");
    }

  private:
    std::string out_dir_;
    std::map<std::string, std::string> outputs_;
    std::chrono::steady_clock::time_point start_;
};

TailMethod parse_tail_method(const std::string& name) {
    if (name == "ratio") return TailMethod::RatioTest;
    if (name == "integral") return TailMethod::IntegralBound;
    if (name == "none") return TailMethod::None;
    throw ConfigError("tail_method: expected ratio|integral|none, got '" + name + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// modulus check
// ---------------------------------------------------------------------------

int modulus_check(const nlohmann::json& config, const RunContext& ctx) {
    check_keys(config,
               {"modulus", "gamma", "theta", "i_max", "tail_method", "ratio_n_min", "ratio_n_max",
                "seed"},
               "modulus check");
    const ModulusFunction phi = parse_modulus(config.at("modulus"), "modulus");
    const double gamma = config.at("gamma").get<double>();
    const std::uint64_t seed = resolve_seed(config, ctx);

    AdmissibilityOptions opts;
    opts.i_max = config.value("i_max", opts.i_max);
    if (config.contains("tail_method"))
        opts.tail_method = parse_tail_method(config.at("tail_method").get<std::string>());
    opts.ratio_n_min = config.value("ratio_n_min", opts.ratio_n_min);
    opts.ratio_n_max = config.value("ratio_n_max", opts.ratio_n_max);

    std::optional<double> theta;
    if (config.contains("theta")) theta = config.at("theta").get<double>();

    OutputBundle out(ctx.out_dir);

    // An empty theta window with no explicit theta is a failed hypothesis,
    // not a usage error.
    if (!theta) {
        const auto window = theta_window(phi, gamma);
        if (!window) {
            nlohmann::json rep;
            rep["gamma"] = gamma;
            rep["theta_window"] = "empty";
            rep["admissible"] = false;
            out.add("admissibility.json", rep.dump(2) + "\n");
            out.finalize(config, seed);
            return kExitFail;
        }
    }

    const AdmissibilityReport report = assess_admissibility(phi, gamma, theta, opts);
    out.add("admissibility.json", report.to_json().dump(2) + "\n");
    out.finalize(config, seed);

    if (report.admissible) return kExitPass;
    if (report.sum.verdict == SumVerdict::Inconclusive && report.ratio.holds)
        return kExitInconclusive;
    return kExitFail;
}

// ---------------------------------------------------------------------------
// chain estimate
// ---------------------------------------------------------------------------

int chain_estimate(const nlohmann::json& config, const RunContext& ctx) {
    check_keys(config, {"field", "phi", "gamma", "theta", "alpha", "pair_budget", "seed"},
               "chain estimate");
    const nlohmann::json& fj = config.at("field");
    check_keys(fj, {"generator", "d", "m_max", "times", "n_rep", "c", "value"}, "field");

    const std::string generator = fj.at("generator").get<std::string>();
    const int d = fj.value("d", 1);
    const int m_max = fj.at("m_max").get<int>();
    const int n_rep = fj.at("n_rep").get<int>();
    if (n_rep < 1) throw ConfigError("field: n_rep must be >= 1");
    const std::vector<double> times =
        fj.contains("times") ? parse_times(fj.at("times"), "field.times")
                             : std::vector<double>{1.0};
    const std::uint64_t seed = resolve_seed(config, ctx);

    FieldSample field;
    if (generator == "brownian") {
        field = make_brownian_field(m_max, times, n_rep, seed);
    } else if (generator == "linear") {
        field = make_linear_field(d, m_max, times, fj.value("c", 1.0), n_rep);
    } else if (generator == "constant") {
        field = make_constant_field(d, m_max, times, fj.value("value", 0.0), n_rep);
    } else if (generator == "scaled_noise") {
        field = make_scaled_noise_field(m_max, times, n_rep, seed);
    } else {
        throw ConfigError("field: unknown generator '" + generator + "'");
    }

    const ModulusFunction phi = parse_modulus(config.at("phi"), "phi");
    const double gamma = config.at("gamma").get<double>();
    if (!(gamma > 0.0)) throw ConfigError("chain estimate: gamma must be > 0");
    double theta;
    if (config.contains("theta")) {
        theta = config.at("theta").get<double>();
    } else {
        const auto window = theta_window(phi, gamma);
        if (!window) throw ConfigError("chain estimate: theta window empty, pass theta");
        theta = 0.5 * (window->first + window->second);
    }
    double alpha = config.value("alpha", 1.0 / gamma - theta);
    if (!(alpha > 0.0)) throw ConfigError("chain estimate: alpha must be > 0");
    const std::size_t pair_budget = config.value("pair_budget", std::size_t{512});

    const DyadicGrid grid = build_grid(field.d, field.m_max);
    const std::vector<ProbePair> probes = dyadic_scale_pairs(grid, pair_budget);
    const ChainMode mode = (gamma < 1.0) ? ChainMode::MomentLT1 : ChainMode::MomentGE1;
    const ChainingReport report = make_chaining_report(field, phi, alpha, probes, mode, gamma);

    const PathwiseCheckResult pathwise =
        pathwise_chain_check(field, report.increments, std::min(gamma, 1.0));
    bool seminorm_ok = true;
    for (std::size_t i = 0; i < report.seminorm.by_rep_time.size(); ++i) {
        const double s = (mode == ChainMode::MomentLT1)
                             ? std::pow(report.seminorm.by_rep_time[i], gamma)
                             : report.seminorm.by_rep_time[i];
        seminorm_ok = seminorm_ok && (s <= report.bound.value[i]);
    }
    const MomentCheckReport moment = moment_hypothesis_check(field, gamma, phi, pair_budget);
    nlohmann::json holder = nlohmann::json::object();
    try {
        const HolderFit fit = holder_exponent_fit(field, gamma, pair_budget);
        holder = {{"epsilon_hat", fit.epsilon_hat}, {"c_hat", fit.c_hat}, {"slope", fit.slope}};
    } catch (const DegenerateFit&) {
        holder = {{"degenerate", true}};
    }

    nlohmann::json j = report.to_json();
    j["pathwise_pass"] = pathwise.pass;
    j["pathwise_checked"] = pathwise.n_checked;
    j["seminorm_le_bound"] = seminorm_ok;
    j["moment_check"] = moment.to_json();
    j["holder_fit"] = holder;

    OutputBundle out(ctx.out_dir);
    out.add("chain_report.json", j.dump(2) + "\n");
    out.add("increments.csv", report.increments_csv());
    out.add("seminorm.csv", report.seminorm_csv());
    out.finalize(config, seed);

    return (pathwise.pass && seminorm_ok && moment.consistent) ? kExitPass : kExitFail;
}

// ---------------------------------------------------------------------------
// levy verify
// ---------------------------------------------------------------------------

int levy_verify(const nlohmann::json& config, const RunContext& ctx) {
    check_keys(config, {"levy", "psi", "p_values", "batches", "checks", "x_grid_count", "seed"},
               "levy verify");
    const LevyConfig levy = parse_levy(config.at("levy"));
    const std::uint64_t seed = resolve_seed(config, ctx);

    const std::string psi_name = config.value("psi", std::string("one"));
    Integrand psi;
    if (psi_name == "one")
        psi = psi_one(levy);
    else if (psi_name == "time")
        psi = psi_time(levy);
    else if (psi_name == "mark_abs")
        psi = psi_mark_abs(levy);
    else
        throw ConfigError("levy verify: unknown psi '" + psi_name + "'");

    std::vector<double> p_values = {2.0};
    if (config.contains("p_values")) p_values = config.at("p_values").get<std::vector<double>>();

    CheckOptions opts;
    opts.threads = ctx.threads;
    if (config.contains("batches"))
        opts.batch_sizes = config.at("batches").get<std::vector<std::size_t>>();

    std::vector<std::string> checks = {"kunita"};
    if (config.contains("checks")) checks = config.at("checks").get<std::vector<std::string>>();

    OutputBundle out(ctx.out_dir);
    out.add("atoms_sample.csv", sample_prm(levy, seed).to_csv());

    bool all_consistent = true;
    nlohmann::json reports = nlohmann::json::object();
    for (const std::string& check : checks) {
        if (check == "kunita") {
            for (double p : p_values) {
                const InequalityReport rep =
                    (p >= 2.0) ? kunita_check_p_ge2(psi, levy, p, seed, opts)
                               : kunita_check_p_lt2(psi, levy, p, seed, opts);
                reports["kunita_p" + fmt_double(p)] = rep.to_json();
                all_consistent = all_consistent && rep.consistent;
            }
        } else if (check == "linfty") {
            // f(t,v,x) = v sin(x): ||f||_inf = |v|, closed-form compensator
            const int count = config.value("x_grid_count", 33);
            std::vector<double> x_grid;
            for (int i = 0; i < count; ++i)
                x_grid.push_back(-M_PI / 2 + M_PI * static_cast<double>(i) / (count - 1));
            const NuSpec nu = levy.nu;
            double signed_first = 0.0;
            if (nu.kind == NuSpec::Kind::UniformInterval)
                signed_first = nu.total_mass * 0.5 * (nu.a + nu.b);
            else if (nu.kind == NuSpec::Kind::PointMass)
                signed_first = nu.total_mass * nu.atom_mark.at(0);
            SupIntegrand f;
            f.eval = [](double, const std::vector<double>& v, double x) {
                return v.at(0) * std::sin(x);
            };
            f.sup_norm = [](double, const std::vector<double>& v) { return std::abs(v.at(0)); };
            f.comp_integral = [signed_first](double t, double x) {
                return signed_first * t * std::sin(x);
            };
            f.sup_integral = [nu](double T) { return nu.moment_abs(1.0) * T; };
            f.sup_moment = [nu](double p, double T) { return nu.moment_abs(p) * T; };
            f.name = "mark_sine";
            for (double p : p_values) {
                const InequalityReport rep = linfty_moment_check(f, levy, p, x_grid, seed, opts);
                reports["linfty_p" + fmt_double(p)] = rep.to_json();
                all_consistent = all_consistent && rep.consistent;
            }
        } else {
            throw ConfigError("levy verify: unknown check '" + check + "'");
        }
    }
    out.add("levy_report.json", reports.dump(2) + "\n");
    out.finalize(config, seed);
    return all_consistent ? kExitPass : kExitFail;
}

// ---------------------------------------------------------------------------
// spde run
// ---------------------------------------------------------------------------

int spde_run(const nlohmann::json& config, const RunContext& ctx) {
    check_keys(config,
               {"kernel", "levy", "forcing", "times", "replications", "seed", "probe_radius",
                "pair_budget", "batches", "levels", "theta", "beta", "slope_tol", "growth_tol"},
               "spde run");
    SpdeExperiment exp;
    exp.kernel = parse_kernel(config.at("kernel"));
    exp.levy = parse_levy(config.at("levy"));
    exp.times = parse_times(config.at("times"), "times");
    exp.n_rep = config.value("replications", 100);
    exp.master_seed = resolve_seed(config, ctx);
    exp.threads = ctx.threads;
    exp.probe_radius = config.value("probe_radius", 1.0);

    const nlohmann::json& fj = config.at("forcing");
    check_keys(fj, {"name", "p", "freq", "h_scale"}, "forcing");
    const std::string fname = fj.at("name").get<std::string>();
    const double p = fj.value("p", 2.0);
    if (fname == "eigen_sine" || fname == "sine") {
        std::optional<double> h_scale;
        if (fj.contains("h_scale")) h_scale = fj.at("h_scale").get<double>();
        exp.forcing = forcing_sine(exp.levy, p, fj.value("freq", 1.0), h_scale);
    } else if (fname == "det_sine") {
        exp.forcing = forcing_det_sine(exp.levy, p);
    } else if (fname == "mark_constant") {
        exp.forcing = forcing_mark_constant(exp.levy, p);
    } else if (fname == "zero") {
        exp.forcing = forcing_zero();
    } else {
        throw ConfigError("forcing: unknown name '" + fname + "'");
    }

    std::vector<std::string> verify = ctx.verify;
    if (verify.empty()) verify = {"modulus", "sup"};

    OutputBundle out(ctx.out_dir);

    // showcase replication
    const PoissonMeasureSample atoms =
        sample_prm(exp.levy, derive_replication_seed(exp.master_seed, 0));
    const MildSolutionField field =
        mild_solution(atoms, exp.forcing, exp.kernel, exp.times, exp.quad);
    out.add("solution.csv", field.to_csv());
    out.add("atoms.csv", atoms.to_csv());

    bool all_ok = true;
    nlohmann::json reports = nlohmann::json::object();
    for (const std::string& item : verify) {
        if (item == "modulus") {
            const SlopeReport rep = modulus_estimate_check(
                exp, exp.forcing.p, exp.forcing.phi, config.value("pair_budget", std::size_t{64}),
                config.value("slope_tol", 0.1));
            reports["modulus"] = rep.to_json();
            all_ok = all_ok && rep.consistent;
        } else if (item == "holder") {
            std::vector<int> levels = {4, 5, 6};
            if (config.contains("levels")) levels = config.at("levels").get<std::vector<int>>();
            const double theta = config.value("theta", 0.5 / exp.forcing.p);
            const double beta = config.value("beta", 1.0 / exp.forcing.p - theta);
            const SeminormLevelReport rep =
                holder_conclusion_check(exp, exp.forcing.p, exp.forcing.phi, theta, beta, levels,
                                        config.value("growth_tol", 0.10));
            reports["holder"] = rep.to_json();
            all_ok = all_ok && rep.stable;
        } else if (item == "sup") {
            std::vector<std::size_t> batches = {100, 400};
            if (config.contains("batches"))
                batches = config.at("batches").get<std::vector<std::size_t>>();
            const InequalityReport rep = sup_bound_check(exp, batches);
            reports["sup"] = rep.to_json();
            all_ok = all_ok && rep.consistent;
        } else if (item == "kunita") {
            Integrand psi;
            if (fname == "det_sine")
                psi = psi_one(exp.levy);
            else if (fname == "zero")
                psi = Integrand{[](double, const std::vector<double>&) { return 0.0; },
                                [](double) { return 0.0; },
                                [](double, double) { return 0.0; },
                                "zero"};
            else
                psi = psi_mark_abs(exp.levy);  // ||g(t,v,.)||_inf = |v|
            CheckOptions opts;
            opts.threads = ctx.threads;
            if (config.contains("batches"))
                opts.batch_sizes = config.at("batches").get<std::vector<std::size_t>>();
            const InequalityReport rep =
                (exp.forcing.p >= 2.0)
                    ? kunita_check_p_ge2(psi, exp.levy, exp.forcing.p, exp.master_seed, opts)
                    : kunita_check_p_lt2(psi, exp.levy, exp.forcing.p, exp.master_seed, opts);
            reports["kunita"] = rep.to_json();
            all_ok = all_ok && rep.consistent;
        } else {
            throw ConfigError("spde run: unknown verify item '" + item + "'");
        }
    }

    out.add("spde_report.json", reports.dump(2) + "\n");
    out.finalize(config, exp.master_seed);
    return all_ok ? kExitPass : kExitFail;
}

// ---------------------------------------------------------------------------
// path-based wrappers with the exit-code contract
// ---------------------------------------------------------------------------

namespace {

int run_guarded(const std::string& config_path, const RunContext& ctx,
                int (*fn)(const nlohmann::json&, const RunContext&)) {
    nlohmann::json config;
    try {
        config = nlohmann::json::parse(read_text_file(config_path));
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitUsage;
    }
    try {
        return fn(config, ctx);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitUsage;
    } catch (const MassDeficit& e) {
        std::fprintf(stderr, "kernel mass deficit: %s\n", e.what());
        return kExitFail;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFail;
    }
}

}  // namespace

int run_modulus_check(const std::string& config_path, const RunContext& ctx) {
    return run_guarded(config_path, ctx, &modulus_check);
}
int run_chain_estimate(const std::string& config_path, const RunContext& ctx) {
    return run_guarded(config_path, ctx, &chain_estimate);
}
int run_levy_verify(const std::string& config_path, const RunContext& ctx) {
    return run_guarded(config_path, ctx, &levy_verify);
}
int run_spde_run(const std::string& config_path, const RunContext& ctx) {
    return run_guarded(config_path, ctx, &spde_run);
}

}  // namespace kct::cli
