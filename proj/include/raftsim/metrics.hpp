#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "raftsim/sim_time.hpp"
#include "raftsim/trace.hpp"

namespace raftsim {

struct Interval {
  SimTime start{};
  SimTime end{};
  SimTime duration() const { return end - start; }
  bool operator==(const Interval&) const = default;
};

/// Constants the metrics need besides the trace itself.
struct MetricParams {
  int nodes = 5;
  SimTime horizon = SimTime::from_sec(60);
  SimTime tick = SimTime::from_ms(10);
  SimTime grace = SimTime::from_ms(150);
};

/// Tick-sampled writability. Sample k is taken at k*tick and stands for
/// [k*tick, min((k+1)*tick, horizon)).
struct WritabilityTimeline {
  SimTime tick{};
  SimTime horizon{};
  std::vector<bool> writable;
  std::vector<Interval> unwritable;  // maximal runs, last one truncated at the horizon

  SimTime unwritable_time() const;
  double unwritable_fraction() const;
  double writable_fraction() const { return 1.0 - unwritable_fraction(); }
};

/// At each tick: writable iff some leader is backed by a strict majority of
/// live nodes that heard its heartbeat within [t - grace, t]. A live leader
/// counts itself while it keeps sending. Heartbeats from before a node's
/// latest restart do not count.
WritabilityTimeline compute_writability(const std::vector<ProtocolEvent>& events, const MetricParams& p);

struct DistributionStats {
  std::size_t count = 0;
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
  bool empty = true;
};

/// Nearest-rank percentile of an ascending-sorted sample; q in (0, 1].
double nearest_rank(const std::vector<double>& sorted, double q);
DistributionStats distribution(std::vector<double> values);

/// Durations (ms) of the unwritable intervals.
DistributionStats recovery_stats(const WritabilityTimeline& t);

struct SplitVote {
  std::size_t failed = 0;
  std::size_t elected = 0;
  double rate = 0.0;
  bool no_attempts = true;
};
SplitVote split_vote_rate(const std::vector<ProtocolEvent>& events);

struct FailureBreakdown {
  std::size_t no_quorum = 0;
  std::size_t low_reach = 0;
  std::size_t contention = 0;
  std::size_t total() const { return no_quorum + low_reach + contention; }
  double fraction(std::size_t k) const { return total() ? static_cast<double>(k) / static_cast<double>(total()) : 0.0; }
};
FailureBreakdown failure_breakdown(const std::vector<ProtocolEvent>& events, int nodes);

struct SafetyOverlap {
  std::size_t episodes = 0;
  double mean_duration_ms = 0.0;
  double overlap2 = 0.0;  // fraction of horizon with >= 2 nodes forced-safe
  double overlap3 = 0.0;
  std::size_t unmatched = 0;  // episodes still open at the horizon
};
SafetyOverlap safety_overlap(const std::vector<ProtocolEvent>& events, SimTime horizon);

/// Highest term seen per simulated minute.
double term_churn(const std::vector<ProtocolEvent>& events, SimTime horizon);

/// Latencies (ms) of every LeaderElected event.
std::vector<double> time_to_leader(const std::vector<ProtocolEvent>& events);

struct MetricsSummary {
  DistributionStats recovery;
  double unwritable_fraction = 0.0;
  SplitVote split_vote;
  DistributionStats time_to_leader;
  FailureBreakdown failures;
  SafetyOverlap safety;
  double term_churn = 0.0;
  std::size_t leaders_elected = 0;
};

MetricsSummary summarize(const std::vector<ProtocolEvent>& events, const MetricParams& p);
nlohmann::json to_json(const MetricsSummary& s);

struct ConfidenceInterval {
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Percentile bootstrap of the mean. Deterministic for a given seed.
ConfidenceInterval bootstrap_ci(const std::vector<double>& values, double level = 0.95, std::size_t resamples = 10000,
                                std::uint64_t seed = 0);

} // namespace raftsim
