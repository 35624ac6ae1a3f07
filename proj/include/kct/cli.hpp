#ifndef KCT_CLI_HPP
#define KCT_CLI_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace kct::cli {

inline constexpr const char* kToolVersion = "kct 0.1.0";

// Exit-code contract:
//   0 all requested conditions certified / checks consistent
//   1 usage or configuration error
//   2 a condition numerically failed (including MassDeficit diagnostics)
//   3 certification inconclusive (tail method could not certify)
inline constexpr int kExitPass = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFail = 2;
inline constexpr int kExitInconclusive = 3;

struct RunContext {
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed_override;
    int threads = 1;
    std::vector<std::string> verify;  // spde: subset of {modulus, sup, kunita}
};

// Parsed-config entry points (also used directly by the test suites). Each
// writes its artifacts plus a manifest.json into ctx.out_dir and returns the
// exit code. Configuration problems throw ConfigError; the path-based
// wrappers below map exceptions onto the exit-code contract.
int modulus_check(const nlohmann::json& config, const RunContext& ctx);
int chain_estimate(const nlohmann::json& config, const RunContext& ctx);
int levy_verify(const nlohmann::json& config, const RunContext& ctx);
int spde_run(const nlohmann::json& config, const RunContext& ctx);

int run_modulus_check(const std::string& config_path, const RunContext& ctx);
int run_chain_estimate(const std::string& config_path, const RunContext& ctx);
int run_levy_verify(const std::string& config_path, const RunContext& ctx);
int run_spde_run(const std::string& config_path, const RunContext& ctx);

}  // namespace kct::cli

#endif  // KCT_CLI_HPP
