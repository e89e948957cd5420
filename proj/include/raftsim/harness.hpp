#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "raftsim/config.hpp"
#include "raftsim/metrics.hpp"
#include "raftsim/trace.hpp"

namespace raftsim {

/// A labelled policy configuration evaluated by the harness.
struct Method {
  std::string label;
  PolicySpec policy;
};

/// Default parameterisation of every known policy id, labelled by id.
std::vector<Method> default_methods();
Method method_by_label(const std::string& label);

MetricParams metric_params(const ScenarioConfig& cfg);
ScenarioConfig with_policy(ScenarioConfig cfg, const PolicySpec& policy);

struct RunResult {
  std::string method;
  std::uint64_t seed = 0;
  Trace trace;
  MetricsSummary summary;
};

/// Simulates one seed with cfg.policy and derives its metrics from the trace.
RunResult run_once(const ScenarioConfig& cfg, std::uint64_t seed, const std::string& label = {});

/// Runs `fn(i)` for i in [0, count) on up to `jobs` threads.
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn);

struct ExperimentPlan {
  std::string scenario;  // preset name or path
  std::vector<Method> methods;
  std::vector<std::uint64_t> report_seeds;
  std::vector<std::uint64_t> tuning_seeds;
  /// method label -> candidate params (tuned before the report runs)
  std::map<std::string, std::vector<nlohmann::json>> grids;
  std::string out_dir = "results";
  unsigned jobs = 1;
  bool write_traces = true;
};

ExperimentPlan plan_from_json(const nlohmann::json& j);
ExperimentPlan load_plan(const std::string& path);

struct SweepFailure {
  std::string method;
  std::uint64_t seed = 0;
  std::string error;
};

struct SweepReport {
  std::size_t runs = 0;
  std::vector<SweepFailure> failures;
  std::map<std::string, nlohmann::json> tuned;  // method -> chosen params
};

/// Writes <out>/<method>/seed-<n>.{trace,json} per run plus manifest.json.
/// A failing run is recorded and the sweep continues.
SweepReport run_sweep(const ExperimentPlan& plan);

struct TunePoint {
  nlohmann::json params;
  double unwritable = 0.0;
  double recovery = 0.0;
};

struct TuneResult {
  std::size_t best = 0;
  std::vector<TunePoint> points;
  const nlohmann::json& best_params() const { return points.at(best).params; }
};

/// Lexicographic: lowest mean unwritable fraction, then lowest mean recovery;
/// ties keep grid order.
TuneResult tune_baseline(const ScenarioConfig& base, const std::string& policy_id, const std::vector<nlohmann::json>& grid,
                         const std::vector<std::uint64_t>& tuning_seeds, unsigned jobs = 1);

/// Every regime -> arm map as oracle params ({"map": {"0": "A1", ...}}),
/// |arms|^|regimes| entries in lexicographic order.
std::vector<nlohmann::json> oracle_candidates(std::size_t n_arms, const std::vector<int>& regime_ids);

struct AblationVariant {
  std::string id;
  std::optional<std::string> policy_id;  // replaces the base id when set
  nlohmann::json params = nlohmann::json::object();  // merged over the base params
};

struct AblationResult {
  std::string id;
  bool valid = false;  // false: traces identical to base on every seed
  double d_recovery_pct = 0.0;
  double d_unwritable_pct = 0.0;
  double d_split_vote_pct = 0.0;
};

std::vector<AblationVariant> variants_from_json(const nlohmann::json& j);
std::vector<AblationResult> ablation_self_check(const ScenarioConfig& base, const std::vector<AblationVariant>& variants,
                                                const std::vector<std::uint64_t>& seeds, unsigned jobs = 1);
/// 100 * (variant - base) / base; 0 when base is 0 and the values agree.
double percent_delta(double base, double variant);

struct OpTiming {
  double mean_us = 0.0;
  double p50_us = 0.0;
  double p95_us = 0.0;
  double p99_us = 0.0;
};

struct OverheadReport {
  std::size_t iterations = 0;
  OpTiming choose;
  OpTiming update;
};

/// Times arm selection and the rank-one update separately on synthetic
/// contexts (d = 5, one arm per entry of the policy's arm set).
OverheadReport overhead_bench(const std::string& policy_id, std::size_t iterations, std::uint64_t seed = 7);

struct AggregateOptions {
  std::size_t resamples = 10000;
  std::uint64_t seed = 0;
};

/// Reads per-run metrics under `in_dir` and writes CSV + JSON tables to `out_dir`.
/// Throws std::runtime_error when no run artifacts exist.
nlohmann::json aggregate(const std::string& in_dir, const std::string& out_dir, const AggregateOptions& opt = {});

} // namespace raftsim
