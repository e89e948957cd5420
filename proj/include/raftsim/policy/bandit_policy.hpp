#pragma once

#include <optional>
#include <string>
#include <vector>

#include "raftsim/policy/linear_bandit.hpp"
#include "raftsim/policy/policy.hpp"

namespace raftsim {

/// Contextual-bandit timeout policy: LinUCB or linear Thompson sampling over
/// timeout arms, optionally wrapped by the safety gate.
///
/// Every deadline reset picks an arm, but only candidacy decisions are
/// remembered for learning; the matching outcome updates that arm alone.
class BanditPolicy final : public TimeoutPolicy {
public:
  BanditPolicy(std::string id, BanditParams params, PolicyEnvironment env);

  std::string_view id() const override { return id_; }
  Decision choose(const Observation& obs, RngStream& rng) override;
  PolicyEffects observe_outcome(const AttemptResult& res) override;
  void observe_heartbeat(const HeartbeatSample& hb) override;
  bool reset() override;

  /// Learner's pick for a prepared context, ignoring the safety gate.
  std::size_t select_arm(const Eigen::VectorXd& x, RngStream& rng) const;
  /// Applies a reward to one arm with the configured forgetting rule.
  void update_arm(std::size_t arm, const Eigen::VectorXd& x, double reward);
  /// Context vector for an observation (updates the feature scaler when enabled).
  Eigen::VectorXd context(const Observation& obs);
  /// Timeout range of an arm under the current scale.
  ArmRange range(std::size_t arm) const;
  std::size_t arm_count() const { return arms_.size(); }
  Eigen::Index dim() const { return dim_; }

  const std::vector<bandit::LinearArm<double>>& arms() const { return arms_; }
  const SafetyGate& safety() const { return gate_; }
  const BanditParams& params() const { return params_; }
  const std::vector<RewardRecord>& rewards() const { return rewards_; }
  std::optional<double> quantile_base_ms() const { return quantile_.estimate(); }

protected:
  void save_state(std::ostream& os) const override;
  void load_state(std::istream& is) override;

private:
  struct Pending {
    std::size_t arm;
    Eigen::VectorXd x;
  };

  std::string id_;
  BanditParams params_;
  PolicyEnvironment env_;
  ArmSet absolute_;
  Eigen::Index dim_;
  bandit::ForgettingRule<double> rule_;
  std::vector<bandit::LinearArm<double>> arms_;
  SafetyGate gate_;
  QuantileEstimator quantile_;
  FeatureScaler scaler_;
  std::optional<Pending> pending_;
  std::vector<RewardRecord> rewards_;
};

} // namespace raftsim
