#include <doctest.h>

#include <fstream>

#include "raftsim/config.hpp"

using namespace raftsim;
using nlohmann::json;

namespace {

json read_preset(const std::string& name) {
  std::ifstream in(preset_dir() + "/" + name + ".json");
  return json::parse(in);
}

std::vector<std::string> errors_of(const json& j) {
  try {
    config_from_json(j);
  } catch (const ConfigError& e) {
    return e.errors();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& s) {
  for (const auto& x : v)
    if (x.find(s) != std::string::npos) return true;
  return false;
}

} // namespace

TEST_CASE("shipped presets load") {
  const auto names = preset_names();
  CHECK(names.size() >= 6);
  const ScenarioConfig main = load_scenario("main-hard-wan");
  CHECK(main.nodes == 5);
  CHECK(main.horizon == SimTime::from_sec(60));
  CHECK(main.heartbeat_interval == SimTime::from_ms(50));
  CHECK(main.tick == SimTime::from_ms(10));
  CHECK(main.net.schedule.switches.size() == 2);
  CHECK(main.seeds.size() == 30);
  CHECK(main.tuning_seeds.size() == 10);
  CHECK(load_scenario("lan").horizon == SimTime::from_sec(30));
  CHECK(load_scenario("alignment-stress").arms[0].width() == SimTime::from_ms(1));
  CHECK(load_scenario("alignment-stress-guard").min_jitter_width == SimTime::from_ms(20));
  for (const auto& n : names) CHECK(validate_config(load_scenario(n)).empty());
  CHECK(load_scenario(preset_dir() + "/lan.json").name == "lan");
  CHECK_THROWS(load_scenario("no-such-preset"));
}

TEST_CASE("canonical serialization is a fixed point") {
  for (const auto& n : preset_names()) {
    CAPTURE(n);
    const ScenarioConfig a = load_scenario(n);
    const std::string s1 = serialize_config(a);
    const ScenarioConfig b = config_from_json(json::parse(s1));
    CHECK(serialize_config(b) == s1);
    CHECK(b.seeds == a.seeds);
    CHECK(b.arms.arms() == a.arms.arms());
  }
}

TEST_CASE("every error is reported with its path") {
  json j = read_preset("main-hard-wan");
  j["nodes"] = 0;
  j["heartbeat_interval_ms"] = -5;
  j["arm_set"] = json::array({json::array({600, 300})});
  j["policy"]["id"] = "nonexistent";
  j["mystery"] = true;
  const auto errs = errors_of(j);
  CHECK(errs.size() >= 5);
  for (const auto& e : errs) CHECK(e.rfind("$.", 0) == 0);
  CHECK(any_contains(errs, "$.nodes"));
  CHECK(any_contains(errs, "$.heartbeat_interval_ms"));
  CHECK(any_contains(errs, "T_min must be < T_max"));
  CHECK(any_contains(errs, "unknown policy"));
  CHECK(any_contains(errs, "mystery"));
}

TEST_CASE("overlapping partitions are rejected") {
  json j = read_preset("lan");
  j["faults"]["partitions"].push_back(json{{"side", {0, 1}}, {"start_ms", 21000}, {"end_ms", 25000}});
  CHECK(any_contains(errors_of(j), "overlap"));
}

TEST_CASE("schedule, regimes and seeds are checked") {
  json j = read_preset("main-hard-wan");
  j["regime_schedule"][0]["at_ms"] = 5;
  j["regime_schedule"][1]["regime"] = 9;
  j["tuning_seeds"] = json::array({0, 1});
  const auto errs = errors_of(j);
  CHECK(errs.size() >= 3);
  CHECK(any_contains(errs, "also appears in seeds"));
}

TEST_CASE("format version must match") {
  json j = read_preset("lan");
  j["format_version"] = 2;
  CHECK(any_contains(errors_of(j), "format_version"));
  j.erase("format_version");
  CHECK_FALSE(errors_of(j).empty());
}

TEST_CASE("seed ranges and explicit lists") {
  json j = read_preset("lan");
  j["seeds"] = json::array({5, 7, 9});
  CHECK(config_from_json(j).seeds == std::vector<std::uint64_t>{5, 7, 9});
  j["seeds"] = json{{"from", 3}, {"count", 2}};
  CHECK(config_from_json(j).seeds == std::vector<std::uint64_t>{3, 4});
  j["seeds"] = json::array();
  CHECK_FALSE(errors_of(j).empty());
}
