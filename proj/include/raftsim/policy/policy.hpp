#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "raftsim/policy/arms.hpp"
#include "raftsim/policy/estimators.hpp"
#include "raftsim/policy/safety.hpp"
#include "raftsim/rng.hpp"
#include "raftsim/sim_time.hpp"

namespace raftsim {

enum class DecisionReason : std::uint8_t { Init, Heartbeat, VoteGranted, StepDown, Restart, Candidacy };

/// Local view a node hands its policy when it needs a new election deadline.
struct Observation {
  SimTime now{};
  DecisionReason reason = DecisionReason::Init;
  double hb_mean_ms = 0.0;       // inter-arrival mean
  double hb_std_ms = 0.0;        // inter-arrival std
  double since_last_hb_ms = 0.0; // measured before the triggering event is recorded
  int consecutive_failures = 0;
  int regime = 0;                // privileged; only oracle policies read it
  SimTime heartbeat_interval = SimTime::from_ms(50);

  bool starts_attempt() const { return reason == DecisionReason::Candidacy; }
};

struct Decision {
  SimTime timeout{};
  std::optional<int> arm;
  bool forced_safe = false;
  /// Set by policies that also drive the node's heartbeat cadence.
  std::optional<SimTime> heartbeat_interval;
};

enum class AttemptOutcome : std::uint8_t { Won, Failed, Superseded };

struct AttemptResult {
  AttemptOutcome outcome = AttemptOutcome::Won;
  SimTime latency{};          // Won: candidacy start -> leader
  SimTime sampled_timeout{};  // the attempt's election deadline
};

struct PolicyEffects {
  bool safety_entered = false;
  bool safety_exited = false;
};

struct HeartbeatSample {
  double one_way_delay_ms = 0.0;
  std::optional<double> interarrival_ms;
};

struct RewardWeights {
  double success = 1.0;
  double latency_per_ms = 0.002;
  double split_vote = 1.0;
};

/// w_s*[Won] - w_l*latency_ms - w_sv*[Failed]. A failed attempt's latency is
/// its sampled timeout.
double shaped_reward(const RewardWeights& w, const AttemptResult& res);

/// Election-timeout policy owned by one node.
class TimeoutPolicy {
public:
  virtual ~TimeoutPolicy() = default;

  virtual std::string_view id() const = 0;
  virtual Decision choose(const Observation& obs, RngStream& rng) = 0;
  /// Only Won and Failed attempts carry a learning signal; Superseded is a no-op.
  virtual PolicyEffects observe_outcome(const AttemptResult&) { return {}; }
  virtual void observe_heartbeat(const HeartbeatSample&) {}
  /// Back to the cold-start state. Returns true when a forced-safe episode was active.
  virtual bool reset() = 0;

  /// Versioned text snapshot of all learned state.
  std::string snapshot() const;
  /// Throws std::runtime_error on a version or policy-id mismatch.
  void restore(std::string_view snapshot);

protected:
  virtual void save_state(std::ostream& os) const = 0;
  virtual void load_state(std::istream& is) = 0;
};

inline constexpr std::string_view kSnapshotHeader = "raftsim-policy-snapshot v1";

enum class FeatureSet : std::uint8_t { Full, HeartbeatOnly };
enum class FeatureNorm : std::uint8_t { Raw, ZScore, ZScoreClip3 };
enum class Exploration : std::uint8_t { Ucb, Thompson };
enum class ArmScaling : std::uint8_t { Absolute, QuantileRelative };

struct BanditParams {
  Exploration exploration = Exploration::Ucb;
  double alpha = 1.0;
  double lambda = 1.0;
  std::string learner = "discounted";  // plain | discounted | window
  double discount = 0.98;
  std::size_t window = 200;
  double ts_scale = 1.5;
  bool safe = true;
  SafetyConfig safety;
  RewardWeights reward;
  FeatureSet features = FeatureSet::Full;
  FeatureNorm norm = FeatureNorm::Raw;
  ArmScaling scaling = ArmScaling::Absolute;
  double quantile_p = 0.95;
  double quantile_decay = 0.99;
  std::vector<RelativeArm> multipliers{{3.0, 5.0}, {5.0, 7.0}, {7.0, 9.0}};
  double fallback_base_ms = 60.0;
};

struct RandomParams { SimTime lo = SimTime::from_ms(150), hi = SimTime::from_ms(300); };
struct BackoffParams {
  SimTime lo = SimTime::from_ms(150), hi = SimTime::from_ms(300);
  std::optional<SimTime> cap;  // default: 2x the safe arm's T_max
};
struct RttHeuristicParams { double thr_lo_ms = 50.0, thr_hi_ms = 200.0, ewma_alpha = 0.125; };
struct PhiAccrualParams { double phi_lo = 2.0, phi_hi = 3.0, ewma_alpha = 0.125, min_std_ms = 10.0; };
struct QuantileDecayParams { double p = 0.9, decay = 0.99, mult_lo = 3.0, mult_hi = 10.0; };
struct DynatuneParams {
  double safety_factor = 4.0;
  double oneway_factor = 2.0;
  double min_hb_ratio = 5.0;
  double clamp_max_ms = 2400.0;
  double heartbeat_ratio = 4.0;
  double hb_min_ms = 20.0;
  double hb_max_ms = 1000.0;
  double ewma_alpha = 0.125;
  bool joint = false;
};
struct OracleParams { std::map<int, int> mapping; };  // regime id -> arm index

/// Policy id plus the raw parameter object from the scenario file.
struct PolicySpec {
  std::string id = "bandit_safe";
  nlohmann::json params = nlohmann::json::object();

  bool operator==(const PolicySpec&) const = default;
};

/// Everything a policy needs from the scenario besides its own parameters.
struct PolicyEnvironment {
  ArmSet arms = ArmSet::standard();
  SimTime min_jitter_width{};
  SimTime heartbeat_interval = SimTime::from_ms(50);
};

std::vector<std::string> known_policy_ids();
bool is_known_policy(std::string_view id);
/// Every problem with the spec, each prefixed with `path`.
std::vector<std::string> validate_policy(const PolicySpec& spec, const std::string& path = "policy");
/// Throws std::invalid_argument when validate_policy reports errors.
std::unique_ptr<TimeoutPolicy> make_policy(const PolicySpec& spec, const PolicyEnvironment& env);

BanditParams parse_bandit_params(const PolicySpec& spec);

// Pure timeout formulas shared by the dynatune baselines.
double dynatune_et_timeout_ms(double rtt_estimate_ms, double heartbeat_ms, const DynatuneParams& p);
struct JointSetting {
  double heartbeat_ms;
  double timeout_ms;
};
JointSetting dynatune_joint_adjust(double base_ms, const DynatuneParams& p);

/// -log10 P(gap > t) for a normal inter-arrival model.
double phi_value(double t_ms, double mean_ms, double std_ms);

/// 3-arm style threshold mapping: < lo -> 0, [lo, hi) -> 1, >= hi -> last.
int threshold_arm(double signal, double lo, double hi, std::size_t n_arms);

/// Raw context features (bias first): 1, hb mean, hb std, since last hb[, consecutive failures].
std::vector<double> raw_features(const Observation& obs, FeatureSet set);

/// Concrete bandit policy, exposed for tests and the overhead benchmark.
class BanditPolicy;
/// Concrete policy type exposed so tests can reach the reward log.
struct RewardRecord {
  int arm;
  double reward;
  AttemptResult result;
};
const std::vector<RewardRecord>* reward_log(const TimeoutPolicy& p);

} // namespace raftsim
