#ifndef ORTS_CLI_HPP
#define ORTS_CLI_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "orts/simulation.hpp"

namespace orts {

inline constexpr const char *kVersion = "orts 0.1.0";

/// Everything needed to reproduce a `simulate` run.
struct SimulateRequest {
  ExperimentConfig config;
  std::vector<PolicyKind> policies;
  /// Environment as written in the config; resolved against K and d.
  nlohmann::json environment;
  int jobs = 1;
};

/// Reads a config object, or the "config" member of an emitted manifest.
/// Throws ConfigError naming the offending field.
SimulateRequest parse_simulate_config(const nlohmann::json &doc);
nlohmann::json to_json(const SimulateRequest &request);
EnvironmentSpec resolve_environment(const SimulateRequest &request);

ContinuousScenario parse_scenario(const nlohmann::json &doc);
nlohmann::json to_json(const ContinuousScenario &scenario);

/// Shortest round-trippable text at 10 significant digits.
std::string format_number(double value);

void write_regret_csv(const std::filesystem::path &path,
                      const std::vector<ReplicationTable> &tables);
void write_summary_csv(const std::filesystem::path &path,
                       const std::vector<ReplicationTable> &tables);
void write_rounds_csv(const std::filesystem::path &path, const ContinuousRun &run);
void write_continuity_csv(const std::filesystem::path &path,
                          const ContinuousRun &run);

/// Entry point shared by the executable and the tests. Exit codes: 0 success,
/// 1 runtime failure, 2 configuration error.
int run_cli(const std::vector<std::string> &args, std::ostream &out,
            std::ostream &err);

}  // namespace orts

#endif  // ORTS_CLI_HPP
