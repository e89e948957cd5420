#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "raftsim/config.hpp"
#include "raftsim/net.hpp"
#include "raftsim/policy/estimators.hpp"
#include "raftsim/policy/policy.hpp"
#include "raftsim/rng.hpp"
#include "raftsim/simulator.hpp"
#include "raftsim/trace.hpp"

namespace raftsim {

enum class Role : std::uint8_t { Follower, Candidate, Leader };

/// One candidacy from BecameCandidate until it wins, fails or is superseded.
struct ElectionAttempt {
  std::int64_t term = 0;
  SimTime started_at{};
  std::optional<int> arm;
  SimTime sampled_timeout{};
};

struct NodeState {
  int id = 0;
  Role role = Role::Follower;
  std::int64_t term = 0;
  std::optional<int> voted_for;  // for `term`
  bool alive = true;
  std::uint64_t incarnation = 0;

  SimTime election_deadline{};
  std::optional<EventHandle> deadline_timer;
  std::optional<EventHandle> heartbeat_timer;
  SimTime heartbeat_interval{};

  std::vector<bool> votes;  // valid while Candidate
  std::optional<ElectionAttempt> attempt;

  std::optional<int> leader;           // last leader heard from
  std::optional<SimTime> last_heartbeat;
  SimTime last_restart{};
  Ewma interarrival;
  int consecutive_failures = 0;
};

/// Raft election and heartbeat state machine for one run. Logs are empty, so
/// the up-to-date check on RequestVote always passes.
class Cluster {
public:
  /// `faults` must already be realized for this seed (see realize_faults).
  Cluster(const ScenarioConfig& cfg, FaultSchedule faults, std::uint64_t seed, TraceSink& sink);
  ~Cluster();

  /// Schedules initialization and runs to the horizon.
  void run();
  /// Runs to `end` (initializes on first call).
  void run_until(SimTime end);

  int size() const { return static_cast<int>(nodes_.size()); }
  int majority() const { return size() / 2 + 1; }
  const NodeState& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  TimeoutPolicy& policy(int id) { return *policies_.at(static_cast<std::size_t>(id)); }
  const TimeoutPolicy& policy(int id) const { return *policies_.at(static_cast<std::size_t>(id)); }
  const Simulator& sim() const { return sim_; }
  Network& network() { return net_; }
  /// Current live leader with the highest term, if any.
  std::optional<int> current_leader() const;

private:
  struct Message;

  void initialize();
  void emit(ProtocolEvent ev);
  ProtocolEvent event(EventType kind, std::optional<int> node) const;

  void reset_deadline(NodeState& n, DecisionReason reason, std::optional<SimTime> since_last_hb = std::nullopt);
  void cancel_deadline(NodeState& n);
  void on_deadline(int id);
  void start_candidacy(NodeState& n);
  void step_down(NodeState& n, std::int64_t term);
  void supersede(NodeState& n);
  void become_leader(NodeState& n);
  void send_heartbeats(int id);

  void send(int src, int dst, Message msg);
  void deliver(int dst, std::uint64_t incarnation, const Message& msg);
  void on_request_vote(NodeState& r, int candidate, std::int64_t term);
  void on_vote_response(NodeState& c, int voter, std::int64_t term, bool granted);
  void on_heartbeat(NodeState& r, int leader, std::int64_t term, SimTime sent_at);

  void crash(int id);
  void restart(int id);
  void apply_effects(const NodeState& n, const PolicyEffects& fx);

  ScenarioConfig cfg_;
  FaultSchedule faults_;
  TraceSink& sink_;
  Simulator sim_;
  Network net_;
  std::vector<NodeState> nodes_;
  std::vector<std::unique_ptr<TimeoutPolicy>> policies_;
  std::vector<RngStream> policy_rng_;
  std::optional<int> last_leader_;
  bool initialized_ = false;
};

/// Convenience: realize faults, run one seed, return the trace.
Trace simulate(const ScenarioConfig& cfg, std::uint64_t seed);

} // namespace raftsim
