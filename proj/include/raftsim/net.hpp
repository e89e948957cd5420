#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "raftsim/rng.hpp"
#include "raftsim/sim_time.hpp"

namespace raftsim {

/// Pareto excess added to a delay sample with probability mix_probability.
struct ParetoTail {
  double shape = 2.0;
  SimTime scale = SimTime::from_ms(50);
  double mix_probability = 0.0;
};

/// One-way delay: base + normal jitter truncated at +-2 std, optionally mixed
/// with a Pareto tail. Samples are always >= 1us.
struct DelayModel {
  SimTime base = SimTime::from_ms(1);
  SimTime jitter_std{};
  std::optional<ParetoTail> tail;

  SimTime sample(RngStream& rng) const;
};

/// Two-state (good/bad) Markov chain; messages in the bad state are lost with
/// probability loss_in_bad.
struct BurstLoss {
  double p_good_to_bad = 0.0;
  double p_bad_to_good = 1.0;
  double loss_in_bad = 1.0;

  double stationary_bad() const {
    const double s = p_good_to_bad + p_bad_to_good;
    return s > 0.0 ? p_good_to_bad / s : 0.0;
  }
};

struct LossModel {
  double iid_loss_probability = 0.0;
  std::optional<BurstLoss> burst;

  /// Long-run fraction of lost messages.
  double stationary_loss_rate() const {
    const double burst_rate = burst ? burst->stationary_bad() * burst->loss_in_bad : 0.0;
    return 1.0 - (1.0 - iid_loss_probability) * (1.0 - burst_rate);
  }
};

/// Per-link chain state. The transition happens before each message's loss draw.
class GilbertElliott {
public:
  bool bad() const { return bad_; }
  void force(bool bad) { bad_ = bad; }
  /// Advances the chain and returns true when the message is lost.
  bool step(const BurstLoss& m, RngStream& rng);

private:
  bool bad_ = false;
};

struct Regime {
  int id = 0;
  std::string name;
  DelayModel delay;
  LossModel loss;
};

struct RegimeSwitch {
  SimTime at{};
  int regime = 0;
};

/// Switch times strictly increasing, first entry at t=0.
struct RegimeSchedule {
  std::vector<RegimeSwitch> switches{RegimeSwitch{}};

  /// Id of the last switch with time <= now.
  int active_regime(SimTime now) const;
};

/// Target resolved when the fault fires: a fixed node or the current leader.
inline constexpr int kLeaderTarget = -1;

struct CrashFault {
  int node = 0;
  SimTime down{};
  SimTime up{};
};

/// Bipartition: `side` on one side, every other node on the other.
/// An empty side with isolate_leader set means {current leader}.
struct PartitionFault {
  std::vector<int> side;
  bool isolate_leader = false;
  SimTime start{};
  SimTime end{};
};

/// Fault episodes drawn per seed; realized before the run so every method
/// sharing a seed sees the same timestamps.
struct RandomFaults {
  int crash_count = 0;
  SimTime crash_window_start{}, crash_window_end{};
  SimTime crash_down_min{}, crash_down_max{};
  bool crash_target_leader = true;

  int partition_count = 0;
  SimTime partition_window_start{}, partition_window_end{};
  SimTime partition_min{}, partition_max{};
  bool partition_isolate_leader = true;
};

struct FaultSchedule {
  std::vector<CrashFault> crashes;
  std::vector<PartitionFault> partitions;
  RandomFaults random;
};

/// Expands the random block into concrete entries (stream label "faults").
/// Candidates overlapping an existing partition are discarded.
FaultSchedule realize_faults(const FaultSchedule& spec, int n_nodes, SimTime horizon, std::uint64_t seed);

struct NetConfig {
  std::vector<Regime> regimes{Regime{}};
  RegimeSchedule schedule;
  std::vector<SimTime> service_delay;  // per node; missing entries are zero
};

/// Link-level message fate. Partition membership is set by the fault layer;
/// crash state lives with the nodes.
class Network {
public:
  Network(NetConfig cfg, int n_nodes, std::uint64_t seed);

  /// Returns the delivery time, or nullopt when the message is dropped.
  std::optional<SimTime> send(int src, int dst, SimTime now);

  int active_regime(SimTime now) const { return cfg_.schedule.active_regime(now); }
  const Regime& regime(int id) const;

  void set_partition(const std::vector<bool>& side_a);
  void clear_partition() { partition_.clear(); }
  bool partition_active() const { return !partition_.empty(); }
  bool partitioned(int a, int b) const {
    return !partition_.empty() && partition_[static_cast<std::size_t>(a)] != partition_[static_cast<std::size_t>(b)];
  }

  SimTime service_delay(int node) const;
  GilbertElliott& chain(int src, int dst) { return chains_[link(src, dst)]; }
  int nodes() const { return n_; }

private:
  std::size_t link(int src, int dst) const { return static_cast<std::size_t>(src * n_ + dst); }

  NetConfig cfg_;
  int n_;
  std::vector<RngStream> link_rng_;
  std::vector<GilbertElliott> chains_;
  std::vector<bool> partition_;
};

} // namespace raftsim
