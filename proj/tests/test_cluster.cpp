#include <doctest.h>

#include <map>

#include "raftsim/cluster.hpp"
#include "raftsim/config.hpp"
#include "raftsim/policy/arms.hpp"
#include "trace_checks.hpp"

using namespace raftsim;

namespace {

ScenarioConfig with_method(ScenarioConfig cfg, const std::string& id) {
  cfg.policy = PolicySpec{id, nlohmann::json::object()};
  return cfg;
}

int count(const Trace& t, EventType k) {
  int n = 0;
  for (const auto& e : t.events()) n += e.kind == k;
  return n;
}

} // namespace

TEST_CASE("election safety, vote uniqueness and term monotonicity") {
  for (const char* preset : {"main-hard-wan", "partition-turbulence", "alignment-stress"}) {
    for (const char* m : {"random", "bandit_safe", "backoff", "dynatune_joint"}) {
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        CAPTURE(preset);
        CAPTURE(m);
        const Trace t = simulate(with_method(load_scenario(preset), m), seed);
        CHECK(check::election_safety(t).empty());
        CHECK(check::terms_monotone(t));
        CHECK(count(t, EventType::LeaderElected) > 0);
      }
    }
  }
}

TEST_CASE("majority sizes") {
  for (auto [n, maj] : {std::pair{5, 3}, {9, 5}, {21, 11}, {1, 1}, {4, 3}}) {
    ScenarioConfig cfg = load_scenario("stable-wan");
    cfg.nodes = n;
    cfg.net.service_delay.clear();
    Trace t;
    Cluster c(cfg, FaultSchedule{}, 1, t);
    CHECK(c.majority() == maj);
  }
}

TEST_CASE("a 21-node cluster elects a single leader per term") {
  ScenarioConfig cfg = with_method(load_scenario("stable-wan"), "bandit_safe");
  cfg.nodes = 21;
  cfg.net.service_delay.clear();
  const Trace t = simulate(cfg, 3);
  CHECK(check::election_safety(t).empty());
  CHECK(count(t, EventType::LeaderElected) >= 3);  // initial + after each leader crash
}

TEST_CASE("a leader's votes come from a majority of distinct peers") {
  const Trace t = simulate(with_method(load_scenario("main-hard-wan"), "random"), 5);
  std::map<std::pair<int, std::int64_t>, std::set<int>> grants;  // (candidate, term) -> voters
  for (const auto& e : t.events())
    if (e.kind == EventType::VoteGranted) grants[{*e.peer, *e.term}].insert(*e.node);
  for (const auto& e : t.events()) {
    if (e.kind != EventType::LeaderElected) continue;
    CHECK(grants[{*e.node, *e.term}].size() + 1 >= 3);
  }
}

TEST_CASE("leader-targeted crash hits the leader at fire time") {
  const ScenarioConfig cfg = load_scenario("main-hard-wan");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Trace t = simulate(cfg, seed);
    std::optional<int> leader;
    std::map<int, bool> alive;
    for (const auto& e : t.events()) {
      if (e.kind == EventType::LeaderElected) leader = e.node;
      if (e.kind == EventType::NodeCrashed && e.time == SimTime::from_sec(15)) {
        REQUIRE(leader);
        CHECK(*e.node == *leader);
      }
    }
  }
}

TEST_CASE("reset_on_restart clears learned state") {
  ScenarioConfig cfg = with_method(load_scenario("main-hard-wan"), "bandit_safe");
  cfg.faults = FaultSchedule{};
  cfg.faults.crashes.push_back(CrashFault{kLeaderTarget, SimTime::from_sec(20), SimTime::from_sec(25)});
  const std::string fresh = make_policy(cfg.policy, cfg.policy_env())->snapshot();
  for (bool reset : {true, false}) {
    CAPTURE(reset);
    cfg.reset_on_restart = reset;
    Trace t;
    Cluster c(cfg, cfg.faults, 2, t);
    c.run_until(SimTime::from_sec(25) + SimTime{1});
    int victim = -1;
    for (const auto& e : t.events())
      if (e.kind == EventType::NodeRestarted) victim = *e.node;
    REQUIRE(victim >= 0);
    if (reset) {
      CHECK(c.policy(victim).snapshot() == fresh);
      CHECK(c.node(victim).consecutive_failures == 0);
    } else {
      CHECK(c.policy(victim).snapshot() != fresh);
    }
    CHECK(c.node(victim).alive);
    CHECK(c.node(victim).role == Role::Follower);
  }
}

TEST_CASE("emitted timeouts respect arm bounds and the jitter floor") {
  for (const char* preset : {"alignment-stress", "alignment-stress-guard", "main-hard-wan"}) {
    const ScenarioConfig cfg = with_method(load_scenario(preset), "bandit_safe");
    const ArmSet arms = cfg.policy_env().arms;
    const SimTime floor = cfg.min_jitter_width;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const Trace t = simulate(cfg, seed);
      int decisions = 0;
      for (const auto& e : t.events()) {
        if (e.kind != EventType::PolicyDecision) continue;
        ++decisions;
        REQUIRE(e.arm);
        const ArmRange r = widen_to(arms[static_cast<std::size_t>(*e.arm)], floor);
        REQUIRE(r.width() >= floor);
        REQUIRE(*e.timeout >= r.lo);
        REQUIRE(*e.timeout <= r.hi);
      }
      CHECK(decisions > 0);
    }
  }
}

TEST_CASE("safety gate property holds on every trace") {
  int entries = 0, forced = 0;
  for (const char* preset : {"partition-turbulence", "main-hard-wan", "alignment-stress"}) {
    for (bool reset : {false, true}) {
      ScenarioConfig cfg = with_method(load_scenario(preset), "bandit_safe");
      cfg.reset_on_restart = reset;
      const int safe = static_cast<int>(cfg.policy_env().arms.safe_index());
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Trace t = simulate(cfg, seed);
        const auto g = check::replay_gate(t, safe, reset);
        CHECK(g.violations.empty());
        CHECK(g.entries == count(t, EventType::SafetyEnter));
        entries += g.entries;
        forced += g.forced_decisions;
      }
    }
  }
  CHECK(entries > 0);
  CHECK(forced > 0);
}

TEST_CASE("failed candidacy sequence is ordered") {
  const Trace t = simulate(with_method(load_scenario("alignment-stress"), "static_conservative"), 0);
  const auto& ev = t.events();
  int checked = 0;
  for (std::size_t i = 0; i + 3 < ev.size(); ++i) {
    if (ev[i].kind != EventType::ElectionFailed) continue;
    // ElectionFailed -> PolicyDecision -> BecameCandidate for the next term
    std::size_t j = i + 1;
    while (j < ev.size() && ev[j].kind != EventType::PolicyDecision) ++j;
    REQUIRE(j + 1 < ev.size());
    CHECK(ev[j].node == ev[i].node);
    CHECK(*ev[j].term == *ev[i].term + 1);
    CHECK(ev[j + 1].kind == EventType::BecameCandidate);
    CHECK(ev[j + 1].time == ev[i].time);
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("heartbeats are sent on cadence by the leader") {
  const ScenarioConfig cfg = with_method(load_scenario("lan"), "random");
  const Trace t = simulate(cfg, 1);
  std::map<std::pair<int, std::int64_t>, SimTime> last;
  int gaps = 0;
  for (const auto& e : t.events()) {
    if (e.kind != EventType::HeartbeatSent) continue;
    auto key = std::pair{*e.node, *e.term};
    auto it = last.find(key);
    if (it != last.end()) {
      CHECK(e.time - it->second == cfg.heartbeat_interval);
      ++gaps;
    }
    last[key] = e.time;
  }
  CHECK(gaps > 100);
}
