// Command-line front end: batch experiments driven by JSON configs.
//
//   kct modulus check  --config cfg.json [--seed N] [--out dir]
//   kct chain estimate --config cfg.json [--seed N] [--out dir] [--threads n]
//   kct levy verify    --config cfg.json [--seed N] [--out dir] [--threads n]
//   kct spde run       --config cfg.json [--seed N] [--out dir] [--threads n]
//                      [--verify modulus,sup,kunita,holder]
//
// Exit codes: 0 pass, 1 usage/config error, 2 check failed, 3 inconclusive.

#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kct/cli.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t comma = s.find(',', start);
        const std::string item =
            s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!item.empty()) out.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kct: continuity-modulus chaining, Poisson measures and nonlocal SPDE checks"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    int threads = 1;
    std::string verify_csv;

    enum class Cmd { None, ModulusCheck, ChainEstimate, LevyVerify, SpdeRun };
    Cmd selected = Cmd::None;
    CLI::Option* seed_opt = nullptr;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config path")->required();
        seed_opt = cmd->add_option("--seed", seed, "master seed override");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--threads", threads, "replication worker threads");
    };

    CLI::App* modulus = app.add_subcommand("modulus", "modulus admissibility");
    CLI::App* modulus_check = modulus->add_subcommand("check", "check conditions for (phi, gamma)");
    add_common(modulus_check);
    modulus_check->callback([&] { selected = Cmd::ModulusCheck; });

    CLI::App* chain = app.add_subcommand("chain", "dyadic chaining estimators");
    CLI::App* chain_estimate = chain->add_subcommand("estimate", "K_i, seminorm and bounds");
    add_common(chain_estimate);
    chain_estimate->callback([&] { selected = Cmd::ChainEstimate; });

    CLI::App* levy = app.add_subcommand("levy", "Poisson random measure checks");
    CLI::App* levy_verify = levy->add_subcommand("verify", "moment inequality reports");
    add_common(levy_verify);
    levy_verify->callback([&] { selected = Cmd::LevyVerify; });

    CLI::App* spde = app.add_subcommand("spde", "nonlocal stochastic heat equation");
    CLI::App* spde_run = spde->add_subcommand("run", "simulate and verify");
    add_common(spde_run);
    spde_run->add_option("--verify", verify_csv, "comma list: modulus,sup,kunita,holder");
    spde_run->callback([&] { selected = Cmd::SpdeRun; });

    CLI11_PARSE(app, argc, argv);

    kct::cli::RunContext ctx;
    ctx.out_dir = out_dir;
    ctx.threads = threads;
    if (seed_opt && seed_opt->count() > 0) ctx.seed_override = seed;
    ctx.verify = split_csv(verify_csv);

    switch (selected) {
        case Cmd::ModulusCheck:
            return kct::cli::run_modulus_check(config_path, ctx);
        case Cmd::ChainEstimate:
            return kct::cli::run_chain_estimate(config_path, ctx);
        case Cmd::LevyVerify:
            return kct::cli::run_levy_verify(config_path, ctx);
        case Cmd::SpdeRun:
            return kct::cli::run_spde_run(config_path, ctx);
        case Cmd::None:
            break;
    }
    return kct::cli::kExitUsage;
}
