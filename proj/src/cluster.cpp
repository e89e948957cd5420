#include "raftsim/cluster.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace raftsim {

struct Cluster::Message {
  enum class Type : std::uint8_t { RequestVote, VoteResponse, Heartbeat } type;
  int src = 0;
  std::int64_t term = 0;
  bool granted = false;
  SimTime sent_at{};
};

Cluster::Cluster(const ScenarioConfig& cfg, FaultSchedule faults, std::uint64_t seed, TraceSink& sink)
    : cfg_(cfg), faults_(std::move(faults)), sink_(sink), net_(cfg.net, cfg.nodes, seed) {
  RngStream root(seed);
  const PolicyEnvironment env = cfg_.policy_env();
  nodes_.resize(static_cast<std::size_t>(cfg_.nodes));
  for (int i = 0; i < cfg_.nodes; ++i) {
    NodeState& n = nodes_[static_cast<std::size_t>(i)];
    n.id = i;
    n.heartbeat_interval = cfg_.heartbeat_interval;
    n.votes.assign(static_cast<std::size_t>(cfg_.nodes), false);
    policies_.push_back(make_policy(cfg_.policy, env));
    policy_rng_.push_back(root.fork("policy/" + std::to_string(i)));
  }
}

Cluster::~Cluster() = default;

ProtocolEvent Cluster::event(EventType kind, std::optional<int> node) const {
  ProtocolEvent ev;
  ev.time = sim_.now();
  ev.kind = kind;
  ev.node = node;
  if (node) ev.term = nodes_[static_cast<std::size_t>(*node)].term;
  return ev;
}

void Cluster::emit(ProtocolEvent ev) { sink_.emit(ev); }

std::optional<int> Cluster::current_leader() const {
  std::optional<int> best;
  for (const auto& n : nodes_) {
    if (n.alive && n.role == Role::Leader && (!best || n.term > nodes_[static_cast<std::size_t>(*best)].term)) best = n.id;
  }
  return best;
}

void Cluster::run() { run_until(cfg_.horizon); }

void Cluster::run_until(SimTime end) {
  if (!initialized_) initialize();
  sim_.run_until(end);
}

void Cluster::initialize() {
  initialized_ = true;

  // Faults first so they precede same-time protocol events.
  for (const auto& c : faults_.crashes) {
    auto target = std::make_shared<std::optional<int>>();
    const int spec = c.node;
    sim_.schedule(c.down, EventKind::FaultAction, [this, target, spec] {
      int id = spec;
      if (id == kLeaderTarget) {
        auto l = current_leader();
        if (!l) l = last_leader_;
        if (!l) return;
        id = *l;
      }
      if (!nodes_[static_cast<std::size_t>(id)].alive) return;
      *target = id;
      crash(id);
    });
    sim_.schedule(c.up, EventKind::FaultAction, [this, target] {
      if (*target) restart(**target);
    });
  }
  for (const auto& p : faults_.partitions) {
    const PartitionFault pf = p;
    auto active = std::make_shared<bool>(false);
    sim_.schedule(p.start, EventKind::FaultAction, [this, pf, active] {
      std::vector<bool> side(static_cast<std::size_t>(size()), false);
      if (pf.isolate_leader) {
        auto l = current_leader();
        if (!l) l = last_leader_;
        side[static_cast<std::size_t>(l.value_or(0))] = true;
      } else {
        for (int s : pf.side) side[static_cast<std::size_t>(s)] = true;
      }
      net_.set_partition(side);
      *active = true;
      std::int64_t mask = 0;
      for (std::size_t i = 0; i < side.size() && i < 63; ++i) {
        if (side[i]) mask |= std::int64_t{1} << i;
      }
      ProtocolEvent ev = event(EventType::PartitionStart, std::nullopt);
      ev.value = mask;
      emit(ev);
    });
    sim_.schedule(p.end, EventKind::FaultAction, [this, active] {
      if (!*active) return;
      net_.clear_partition();
      emit(event(EventType::PartitionEnd, std::nullopt));
    });
  }

  const auto& sw = cfg_.net.schedule.switches;
  for (std::size_t i = 0; i < sw.size(); ++i) {
    const int reg = sw[i].regime;
    auto fire = [this, reg] {
      ProtocolEvent ev = event(EventType::RegimeSwitch, std::nullopt);
      ev.regime = reg;
      emit(ev);
    };
    if (sw[i].at == sim_.now()) fire();
    else sim_.schedule(sw[i].at, EventKind::FaultAction, fire);
  }

  for (auto& n : nodes_) reset_deadline(n, DecisionReason::Init);
}

void Cluster::cancel_deadline(NodeState& n) {
  if (n.deadline_timer) sim_.cancel(*n.deadline_timer);
  n.deadline_timer.reset();
}

void Cluster::reset_deadline(NodeState& n, DecisionReason reason, std::optional<SimTime> since_last_hb) {
  Observation obs;
  obs.now = sim_.now();
  obs.reason = reason;
  obs.hb_mean_ms = n.interarrival.seen() ? n.interarrival.mean() : 0.0;
  obs.hb_std_ms = n.interarrival.seen() ? n.interarrival.stddev() : 0.0;
  const SimTime since = since_last_hb.value_or(sim_.now() - n.last_heartbeat.value_or(n.last_restart));
  obs.since_last_hb_ms = since.ms();
  obs.consecutive_failures = n.consecutive_failures;
  obs.regime = net_.active_regime(sim_.now());
  obs.heartbeat_interval = n.heartbeat_interval;

  const Decision d = policies_[static_cast<std::size_t>(n.id)]->choose(obs, policy_rng_[static_cast<std::size_t>(n.id)]);
  if (d.timeout.us <= 0) {
    throw std::logic_error("policy " + std::string(policies_[static_cast<std::size_t>(n.id)]->id()) + " returned a non-positive timeout");
  }
  if (d.heartbeat_interval) n.heartbeat_interval = *d.heartbeat_interval;

  ProtocolEvent ev = event(EventType::PolicyDecision, n.id);
  ev.arm = d.arm;
  ev.timeout = d.timeout;
  emit(ev);

  cancel_deadline(n);
  n.election_deadline = sim_.now() + d.timeout;
  const int id = n.id;
  n.deadline_timer = sim_.schedule(n.election_deadline, EventKind::TimerFire, [this, id] { on_deadline(id); });

  if (reason == DecisionReason::Candidacy) n.attempt = ElectionAttempt{n.term, sim_.now(), d.arm, d.timeout};
}

void Cluster::apply_effects(const NodeState& n, const PolicyEffects& fx) {
  if (fx.safety_entered) emit(event(EventType::SafetyEnter, n.id));
  if (fx.safety_exited) emit(event(EventType::SafetyExit, n.id));
}

void Cluster::on_deadline(int id) {
  NodeState& n = nodes_[static_cast<std::size_t>(id)];
  n.deadline_timer.reset();
  if (!n.alive || n.role == Role::Leader) return;
  emit(event(EventType::ElectionTimeout, id));
  if (n.role == Role::Candidate && n.attempt) {
    const ElectionAttempt a = *n.attempt;
    ProtocolEvent ev = event(EventType::ElectionFailed, id);
    ev.term = a.term;
    ev.arm = a.arm;
    ev.timeout = a.sampled_timeout;
    emit(ev);
    n.attempt.reset();
    ++n.consecutive_failures;
    const auto fx = policies_[static_cast<std::size_t>(id)]->observe_outcome(
        AttemptResult{AttemptOutcome::Failed, a.sampled_timeout, a.sampled_timeout});
    apply_effects(n, fx);
  }
  start_candidacy(n);
}

void Cluster::start_candidacy(NodeState& n) {
  n.term += 1;
  n.role = Role::Candidate;
  n.voted_for = n.id;
  n.leader.reset();
  std::fill(n.votes.begin(), n.votes.end(), false);
  n.votes[static_cast<std::size_t>(n.id)] = true;

  reset_deadline(n, DecisionReason::Candidacy);
  ProtocolEvent bc = event(EventType::BecameCandidate, n.id);
  bc.arm = n.attempt->arm;
  bc.timeout = n.attempt->sampled_timeout;
  emit(bc);
  emit(event(EventType::RequestVoteSent, n.id));

  if (majority() <= 1) {
    become_leader(n);
    return;
  }
  for (int p = 0; p < size(); ++p) {
    if (p != n.id) send(n.id, p, Message{Message::Type::RequestVote, n.id, n.term, false, sim_.now()});
  }
}

void Cluster::supersede(NodeState& n) {
  if (n.role == Role::Candidate && n.attempt) {
    n.attempt.reset();
    const auto fx = policies_[static_cast<std::size_t>(n.id)]->observe_outcome(AttemptResult{AttemptOutcome::Superseded, {}, {}});
    apply_effects(n, fx);
  }
}

void Cluster::step_down(NodeState& n, std::int64_t term) {
  const Role was = n.role;
  if (term > n.term) {
    n.term = term;
    n.voted_for.reset();
  }
  supersede(n);
  n.role = Role::Follower;
  if (was == Role::Leader) {
    if (n.heartbeat_timer) sim_.cancel(*n.heartbeat_timer);
    n.heartbeat_timer.reset();
    reset_deadline(n, DecisionReason::StepDown);
  }
}

void Cluster::become_leader(NodeState& n) {
  n.role = Role::Leader;
  n.leader = n.id;
  last_leader_ = n.id;
  cancel_deadline(n);
  const ElectionAttempt a = n.attempt.value_or(ElectionAttempt{n.term, sim_.now(), std::nullopt, {}});
  n.attempt.reset();
  ProtocolEvent ev = event(EventType::LeaderElected, n.id);
  ev.latency = sim_.now() - a.started_at;
  emit(ev);
  n.consecutive_failures = 0;
  const auto fx = policies_[static_cast<std::size_t>(n.id)]->observe_outcome(
      AttemptResult{AttemptOutcome::Won, sim_.now() - a.started_at, a.sampled_timeout});
  apply_effects(n, fx);
  send_heartbeats(n.id);
}

void Cluster::send_heartbeats(int id) {
  NodeState& n = nodes_[static_cast<std::size_t>(id)];
  n.heartbeat_timer.reset();
  if (!n.alive || n.role != Role::Leader) return;
  emit(event(EventType::HeartbeatSent, id));
  for (int p = 0; p < size(); ++p) {
    if (p != id) send(id, p, Message{Message::Type::Heartbeat, id, n.term, false, sim_.now()});
  }
  n.heartbeat_timer = sim_.schedule_after(n.heartbeat_interval, EventKind::TimerFire, [this, id] { send_heartbeats(id); });
}

void Cluster::send(int src, int dst, Message msg) {
  const auto at = net_.send(src, dst, sim_.now());
  if (!at) return;
  const std::uint64_t inc = nodes_[static_cast<std::size_t>(dst)].incarnation;
  sim_.schedule(*at, EventKind::MessageDeliver, [this, dst, inc, msg] { deliver(dst, inc, msg); });
}

void Cluster::deliver(int dst, std::uint64_t incarnation, const Message& msg) {
  NodeState& r = nodes_[static_cast<std::size_t>(dst)];
  if (!r.alive || r.incarnation != incarnation) return;
  if (net_.partitioned(msg.src, dst)) return;
  switch (msg.type) {
    case Message::Type::RequestVote: on_request_vote(r, msg.src, msg.term); break;
    case Message::Type::VoteResponse: on_vote_response(r, msg.src, msg.term, msg.granted); break;
    case Message::Type::Heartbeat: on_heartbeat(r, msg.src, msg.term, msg.sent_at); break;
  }
}

void Cluster::on_request_vote(NodeState& r, int candidate, std::int64_t term) {
  ProtocolEvent rv = event(EventType::RequestVoteReceived, r.id);
  rv.term = term;
  rv.peer = candidate;
  emit(rv);
  if (term > r.term) step_down(r, term);

  constexpr bool log_up_to_date = true;  // empty logs
  const bool grant = term == r.term && (!r.voted_for || *r.voted_for == candidate) && log_up_to_date;
  if (grant) {
    r.voted_for = candidate;
    ProtocolEvent vg = event(EventType::VoteGranted, r.id);
    vg.peer = candidate;
    emit(vg);
    reset_deadline(r, DecisionReason::VoteGranted);
  }
  send(r.id, candidate, Message{Message::Type::VoteResponse, r.id, r.term, grant, sim_.now()});
}

void Cluster::on_vote_response(NodeState& c, int voter, std::int64_t term, bool granted) {
  if (term > c.term) {
    step_down(c, term);
    return;
  }
  if (c.role != Role::Candidate || term != c.term || !granted) return;
  c.votes[static_cast<std::size_t>(voter)] = true;
  const auto count = std::count(c.votes.begin(), c.votes.end(), true);
  if (count >= majority()) become_leader(c);
}

void Cluster::on_heartbeat(NodeState& r, int leader, std::int64_t term, SimTime sent_at) {
  if (term < r.term) return;
  if (term > r.term) {
    r.term = term;
    r.voted_for.reset();
  }
  supersede(r);
  r.role = Role::Follower;
  r.leader = leader;
  r.consecutive_failures = 0;

  ProtocolEvent ev = event(EventType::HeartbeatReceived, r.id);
  ev.peer = leader;
  emit(ev);

  const SimTime now = sim_.now();
  const SimTime since = now - r.last_heartbeat.value_or(r.last_restart);
  HeartbeatSample hb;
  hb.one_way_delay_ms = (now - sent_at).ms();
  if (r.last_heartbeat) {
    hb.interarrival_ms = since.ms();
    r.interarrival.observe(since.ms());
  }
  r.last_heartbeat = now;
  policies_[static_cast<std::size_t>(r.id)]->observe_heartbeat(hb);
  reset_deadline(r, DecisionReason::Heartbeat, since);
}

void Cluster::crash(int id) {
  NodeState& n = nodes_[static_cast<std::size_t>(id)];
  n.alive = false;
  ++n.incarnation;
  cancel_deadline(n);
  if (n.heartbeat_timer) sim_.cancel(*n.heartbeat_timer);
  n.heartbeat_timer.reset();
  n.attempt.reset();  // never completes; no outcome is reported
  n.role = Role::Follower;
  emit(event(EventType::NodeCrashed, id));
}

void Cluster::restart(int id) {
  NodeState& n = nodes_[static_cast<std::size_t>(id)];
  if (n.alive) return;
  n.alive = true;
  n.role = Role::Follower;
  n.leader.reset();
  n.last_heartbeat.reset();
  n.interarrival.reset();
  n.last_restart = sim_.now();
  n.heartbeat_interval = cfg_.heartbeat_interval;
  std::fill(n.votes.begin(), n.votes.end(), false);
  emit(event(EventType::NodeRestarted, id));
  if (cfg_.reset_on_restart) {
    n.consecutive_failures = 0;
    if (policies_[static_cast<std::size_t>(id)]->reset()) emit(event(EventType::SafetyExit, id));
  }
  reset_deadline(n, DecisionReason::Restart);
}

Trace simulate(const ScenarioConfig& cfg, std::uint64_t seed) {
  Trace trace;
  Cluster c(cfg, realize_faults(cfg.faults, cfg.nodes, cfg.horizon, seed), seed, trace);
  c.run();
  return trace;
}

} // namespace raftsim
