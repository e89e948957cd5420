#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "raftsim/net.hpp"
#include "raftsim/policy/arms.hpp"
#include "raftsim/policy/policy.hpp"
#include "raftsim/sim_time.hpp"

namespace raftsim {

inline constexpr int kConfigFormatVersion = 1;

/// Everything one simulation run needs, minus the seed.
struct ScenarioConfig {
  std::string name = "custom";
  int nodes = 5;
  SimTime horizon = SimTime::from_sec(60);
  SimTime heartbeat_interval = SimTime::from_ms(50);
  SimTime tick = SimTime::from_ms(10);
  NetConfig net;
  FaultSchedule faults;
  /// Named preset, or empty when `arms` was given explicitly.
  std::string arm_set = "standard";
  ArmSet arms = ArmSet::standard();
  SimTime min_jitter_width{};
  PolicySpec policy;
  bool reset_on_restart = false;
  std::vector<std::uint64_t> seeds{0};
  std::vector<std::uint64_t> tuning_seeds;

  /// max(3 * heartbeat, 2 * tick)
  SimTime grace_window() const;
  PolicyEnvironment policy_env() const { return PolicyEnvironment{arms, min_jitter_width, heartbeat_interval}; }
};

SimTime grace_window(SimTime heartbeat_interval, SimTime tick);

/// Every validation problem, each with a JSON-path prefix.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

private:
  std::vector<std::string> errors_;
};

/// Parses and validates; throws ConfigError listing all problems found.
ScenarioConfig config_from_json(const nlohmann::json& j);
ScenarioConfig load_config(const std::string& path);
/// Semantic checks on an in-memory config; empty when valid.
std::vector<std::string> validate_config(const ScenarioConfig& cfg);

/// Canonical form: every field present, times in milliseconds, keys sorted.
nlohmann::json config_to_json(const ScenarioConfig& cfg);
std::string serialize_config(const ScenarioConfig& cfg);

/// Directory holding the checked-in presets.
std::string preset_dir();
std::vector<std::string> preset_names();
/// Accepts a preset name or a path to a scenario file.
ScenarioConfig load_scenario(const std::string& preset_or_path);

} // namespace raftsim
