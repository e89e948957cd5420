#include "raftsim/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "raftsim/cluster.hpp"
#include "raftsim/policy/bandit_policy.hpp"

namespace raftsim {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<Method> default_methods() {
  std::vector<Method> out;
  for (const auto& id : known_policy_ids()) out.push_back(Method{id, PolicySpec{id, json::object()}});
  return out;
}

Method method_by_label(const std::string& label) {
  if (!is_known_policy(label)) throw std::invalid_argument("unknown method '" + label + "'");
  return Method{label, PolicySpec{label, json::object()}};
}

MetricParams metric_params(const ScenarioConfig& cfg) {
  return MetricParams{cfg.nodes, cfg.horizon, cfg.tick, cfg.grace_window()};
}

ScenarioConfig with_policy(ScenarioConfig cfg, const PolicySpec& policy) {
  cfg.policy = policy;
  return cfg;
}

RunResult run_once(const ScenarioConfig& cfg, std::uint64_t seed, const std::string& label) {
  RunResult r;
  r.method = label.empty() ? cfg.policy.id : label;
  r.seed = seed;
  r.trace = simulate(cfg, seed);
  r.summary = summarize(r.trace.events(), metric_params(cfg));
  return r;
}

void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// --- plans ------------------------------------------------------------------

namespace {

std::vector<std::uint64_t> seed_list(const json& j, const char* key) {
  std::vector<std::uint64_t> out;
  if (!j.contains(key)) return out;
  const json& v = j.at(key);
  if (v.is_object() && v.contains("from") && v.contains("count")) {
    const auto from = v.at("from").get<std::uint64_t>();
    for (std::uint64_t i = 0; i < v.at("count").get<std::uint64_t>(); ++i) out.push_back(from + i);
    return out;
  }
  return v.get<std::vector<std::uint64_t>>();
}

Method method_from_json(const json& m) {
  if (m.is_string()) return method_by_label(m.get<std::string>());
  Method out;
  out.policy.id = m.at("id").get<std::string>();
  out.label = m.value("label", out.policy.id);
  if (m.contains("params")) out.policy.params = m.at("params");
  return out;
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

ExperimentPlan plan_from_json(const json& j) {
  if (j.value("format_version", 0) != kConfigFormatVersion) throw std::invalid_argument("plan: unsupported or missing format_version");
  ExperimentPlan p;
  p.scenario = j.at("scenario").get<std::string>();
  if (j.contains("methods")) {
    for (const auto& m : j.at("methods")) p.methods.push_back(method_from_json(m));
  } else {
    p.methods = default_methods();
  }
  p.report_seeds = seed_list(j, "report_seeds");
  p.tuning_seeds = seed_list(j, "tuning_seeds");
  for (auto s : p.tuning_seeds) {
    if (std::find(p.report_seeds.begin(), p.report_seeds.end(), s) != p.report_seeds.end()) {
      throw std::invalid_argument("plan: tuning and report seeds must be disjoint (seed " + std::to_string(s) + ")");
    }
  }
  if (j.contains("grids")) {
    for (const auto& [label, grid] : j.at("grids").items()) {
      // "oracle" expands to every regime -> arm map once the scenario is known.
      p.grids[label] = grid.is_string() ? std::vector<json>{grid} : grid.get<std::vector<json>>();
    }
  }
  p.out_dir = j.value("out_dir", p.out_dir);
  p.jobs = j.value("jobs", p.jobs);
  p.write_traces = j.value("write_traces", p.write_traces);
  for (const auto& m : p.methods) {
    const auto errs = validate_policy(m.policy, "methods[" + m.label + "]");
    if (!errs.empty()) throw std::invalid_argument(errs.front());
  }
  return p;
}

ExperimentPlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open plan " + path);
  return plan_from_json(json::parse(in));
}

SweepReport run_sweep(const ExperimentPlan& plan) {
  ScenarioConfig base = load_scenario(plan.scenario);
  const auto seeds = plan.report_seeds.empty() ? base.seeds : plan.report_seeds;
  const auto tuning = plan.tuning_seeds.empty() ? base.tuning_seeds : plan.tuning_seeds;
  SweepReport report;

  std::vector<Method> methods = plan.methods;
  for (auto& m : methods) {
    auto g = plan.grids.find(m.label);
    if (g == plan.grids.end() || g->second.empty()) continue;
    if (tuning.empty()) throw std::invalid_argument("plan: grid for " + m.label + " needs tuning seeds");
    std::vector<json> grid = g->second;
    if (grid.size() == 1 && grid[0] == "oracle") {
      std::vector<int> ids;
      for (const auto& r : base.net.regimes) ids.push_back(r.id);
      grid = oracle_candidates(base.arms.size(), ids);
    }
    const TuneResult t = tune_baseline(base, m.policy.id, grid, tuning, plan.jobs);
    m.policy.params = t.best_params();
    report.tuned[m.label] = m.policy.params;
  }

  const fs::path out(plan.out_dir);
  json manifest{{"format_version", kConfigFormatVersion}, {"scenario", base.name}, {"seeds", seeds}, {"methods", json::array()}};
  for (const auto& m : methods) manifest["methods"].push_back({{"label", m.label}, {"id", m.policy.id}, {"params", m.policy.params}});
  write_file(out / "manifest.json", manifest.dump(2) + "\n");
  write_file(out / "scenario.json", serialize_config(base));

  std::mutex mu;
  const std::size_t total = methods.size() * seeds.size();
  parallel_for(total, plan.jobs, [&](std::size_t i) {
    const Method& m = methods[i / seeds.size()];
    const std::uint64_t seed = seeds[i % seeds.size()];
    try {
      RunResult r = run_once(with_policy(base, m.policy), seed, m.label);
      const fs::path stem = out / m.label / ("seed-" + std::to_string(seed));
      if (plan.write_traces) write_file(stem.string() + ".trace", r.trace.serialize());
      json rec{{"method", m.label}, {"policy", m.policy.id}, {"seed", seed}, {"trace_digest", r.trace.digest()}, {"metrics", to_json(r.summary)}};
      write_file(stem.string() + ".json", rec.dump(2) + "\n");
      std::lock_guard lock(mu);
      ++report.runs;
    } catch (const std::exception& e) {
      std::lock_guard lock(mu);
      report.failures.push_back(SweepFailure{m.label, seed, e.what()});
    }
  });
  std::sort(report.failures.begin(), report.failures.end(),
            [](const SweepFailure& a, const SweepFailure& b) { return std::tie(a.method, a.seed) < std::tie(b.method, b.seed); });
  json fails = json::array();
  for (const auto& f : report.failures) fails.push_back({{"method", f.method}, {"seed", f.seed}, {"error", f.error}});
  write_file(out / "failures.json", fails.dump(2) + "\n");
  if (!report.tuned.empty()) write_file(out / "tuned.json", json(report.tuned).dump(2) + "\n");
  return report;
}

// --- tuning -----------------------------------------------------------------

TuneResult tune_baseline(const ScenarioConfig& base, const std::string& policy_id, const std::vector<json>& grid,
                         const std::vector<std::uint64_t>& tuning_seeds, unsigned jobs) {
  if (grid.empty()) throw std::invalid_argument("tune_baseline: empty grid");
  if (tuning_seeds.empty()) throw std::invalid_argument("tune_baseline: no tuning seeds");
  TuneResult res;
  res.points.resize(grid.size());
  std::vector<double> unw(grid.size() * tuning_seeds.size()), rec(unw.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto errs = validate_policy(PolicySpec{policy_id, grid[g]}, "grid[" + std::to_string(g) + "]");
    if (!errs.empty()) throw std::invalid_argument(errs.front());
  }
  parallel_for(unw.size(), jobs, [&](std::size_t i) {
    const std::size_t g = i / tuning_seeds.size();
    const RunResult r = run_once(with_policy(base, PolicySpec{policy_id, grid[g]}), tuning_seeds[i % tuning_seeds.size()]);
    unw[i] = r.summary.unwritable_fraction;
    rec[i] = r.summary.recovery.mean;
  });
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto b = unw.begin() + static_cast<std::ptrdiff_t>(g * tuning_seeds.size());
    const auto rb = rec.begin() + static_cast<std::ptrdiff_t>(g * tuning_seeds.size());
    res.points[g] = TunePoint{grid[g], mean_of({b, b + static_cast<std::ptrdiff_t>(tuning_seeds.size())}),
                              mean_of({rb, rb + static_cast<std::ptrdiff_t>(tuning_seeds.size())})};
  }
  for (std::size_t g = 1; g < grid.size(); ++g) {
    const auto& c = res.points[g];
    const auto& b = res.points[res.best];
    if (c.unwritable < b.unwritable || (c.unwritable == b.unwritable && c.recovery < b.recovery)) res.best = g;
  }
  return res;
}

std::vector<json> oracle_candidates(std::size_t n_arms, const std::vector<int>& regime_ids) {
  if (n_arms == 0) throw std::invalid_argument("oracle_candidates: no arms");
  std::vector<json> out;
  std::vector<std::size_t> digits(regime_ids.size(), 0);
  while (true) {
    json map = json::object();
    for (std::size_t r = 0; r < regime_ids.size(); ++r) map[std::to_string(regime_ids[r])] = "A" + std::to_string(digits[r] + 1);
    out.push_back({{"map", map}});
    std::size_t k = regime_ids.size();
    while (k > 0) {
      if (++digits[k - 1] < n_arms) break;
      digits[k - 1] = 0;
      --k;
    }
    if (k == 0) break;
  }
  return out;
}

// --- ablation ---------------------------------------------------------------

std::vector<AblationVariant> variants_from_json(const json& j) {
  const json& list = j.is_object() ? j.at("variants") : j;
  std::vector<AblationVariant> out;
  for (const auto& v : list) {
    AblationVariant a;
    for (const auto& [key, _] : v.items()) {
      if (key != "id" && key != "policy_id" && key != "params")
        throw std::invalid_argument("ablation variant: unknown key '" + key + "'");
    }
    a.id = v.at("id").get<std::string>();
    if (v.contains("policy_id")) a.policy_id = v.at("policy_id").get<std::string>();
    if (v.contains("params")) a.params = v.at("params");
    out.push_back(std::move(a));
  }
  return out;
}

double percent_delta(double base, double variant) {
  if (base == 0.0) return variant == 0.0 ? 0.0 : (variant > 0 ? HUGE_VAL : -HUGE_VAL);
  return 100.0 * (variant - base) / base;
}

std::vector<AblationResult> ablation_self_check(const ScenarioConfig& base, const std::vector<AblationVariant>& variants,
                                                const std::vector<std::uint64_t>& seeds, unsigned jobs) {
  if (seeds.empty()) throw std::invalid_argument("ablation_self_check: no seeds");
  const std::size_t S = seeds.size();
  struct Cell {
    std::uint64_t digest = 0;
    std::string bytes;
    MetricsSummary m;
  };
  std::vector<ScenarioConfig> cfgs{base};
  for (const auto& v : variants) {
    PolicySpec p = base.policy;
    if (v.policy_id) p.id = *v.policy_id;
    p.params.merge_patch(v.params);
    const auto errs = validate_policy(p, "variants[" + v.id + "]");
    if (!errs.empty()) throw std::invalid_argument(errs.front());
    cfgs.push_back(with_policy(base, p));
  }
  std::vector<Cell> cells(cfgs.size() * S);
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    RunResult r = run_once(cfgs[i / S], seeds[i % S]);
    cells[i] = Cell{r.trace.digest(), r.trace.serialize(), r.summary};
  });

  auto means = [&](std::size_t c) {
    std::array<double, 3> m{};
    for (std::size_t s = 0; s < S; ++s) {
      const auto& x = cells[c * S + s].m;
      m[0] += x.recovery.mean;
      m[1] += x.unwritable_fraction;
      m[2] += x.split_vote.rate;
    }
    for (auto& v : m) v /= static_cast<double>(S);
    return m;
  };
  const auto bm = means(0);
  std::vector<AblationResult> out;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    AblationResult r;
    r.id = variants[v].id;
    const std::size_t c = v + 1;
    for (std::size_t s = 0; s < S; ++s) {
      const Cell& a = cells[s];
      const Cell& b = cells[c * S + s];
      if (a.digest != b.digest || a.bytes != b.bytes) r.valid = true;
    }
    if (r.valid) {
      const auto vm = means(c);
      r.d_recovery_pct = percent_delta(bm[0], vm[0]);
      r.d_unwritable_pct = percent_delta(bm[1], vm[1]);
      r.d_split_vote_pct = percent_delta(bm[2], vm[2]);
    }
    out.push_back(r);
  }
  return out;
}

// --- overhead ---------------------------------------------------------------

namespace {

OpTiming timing(std::vector<double> us) {
  std::sort(us.begin(), us.end());
  OpTiming t;
  t.mean_us = mean_of(us);
  t.p50_us = nearest_rank(us, 0.50);
  t.p95_us = nearest_rank(us, 0.95);
  t.p99_us = nearest_rank(us, 0.99);
  return t;
}

} // namespace

OverheadReport overhead_bench(const std::string& policy_id, std::size_t iterations, std::uint64_t seed) {
  if (iterations == 0) throw std::invalid_argument("overhead_bench: iterations must be positive");
  PolicySpec spec{policy_id, json::object()};
  if (!policy_id.starts_with("bandit")) throw std::invalid_argument("overhead_bench: '" + policy_id + "' is not a bandit policy");
  spec.params["learner"] = "plain";
  BanditPolicy policy(policy_id, parse_bandit_params(spec), PolicyEnvironment{});
  RngStream rng(seed, "bench");

  auto context = [&] {
    Eigen::VectorXd x(policy.dim());
    x[0] = 1.0;
    for (Eigen::Index i = 1; i < x.size(); ++i) x[i] = rng.uniform(0.0, 200.0);
    return x;
  };
  for (int i = 0; i < 100; ++i) policy.update_arm(rng.index(policy.arm_count()), context(), rng.uniform(-3.0, 1.0));

  using clock = std::chrono::steady_clock;
  std::vector<double> choose_us(iterations), update_us(iterations);
  std::size_t sink = 0;
  for (std::size_t i = 0; i < iterations; ++i) {
    const Eigen::VectorXd x = context();
    const double r = rng.uniform(-3.0, 1.0);
    const auto t0 = clock::now();
    const std::size_t arm = policy.select_arm(x, rng);
    const auto t1 = clock::now();
    policy.update_arm(arm, x, r);
    const auto t2 = clock::now();
    sink += arm;
    choose_us[i] = std::chrono::duration<double, std::micro>(t1 - t0).count();
    update_us[i] = std::chrono::duration<double, std::micro>(t2 - t1).count();
  }
  if (sink == static_cast<std::size_t>(-1)) std::abort();
  return OverheadReport{iterations, timing(std::move(choose_us)), timing(std::move(update_us))};
}

// --- aggregation ------------------------------------------------------------

namespace {

struct MetricColumn {
  const char* name;
  double (*get)(const json&);
};

const std::vector<MetricColumn>& table_columns() {
  static const std::vector<MetricColumn> cols{
      {"recovery_mean_ms", [](const json& m) { return m["recovery_ms"]["mean"].get<double>(); }},
      {"recovery_p95_ms", [](const json& m) { return m["recovery_ms"]["p95"].get<double>(); }},
      {"recovery_p99_ms", [](const json& m) { return m["recovery_ms"]["p99"].get<double>(); }},
      {"recovery_max_ms", [](const json& m) { return m["recovery_ms"]["max"].get<double>(); }},
      {"unwritable_fraction", [](const json& m) { return m["unwritable_fraction"].get<double>(); }},
      {"split_vote_rate", [](const json& m) { return m["split_vote"]["rate"].get<double>(); }},
      {"time_to_leader_mean_ms", [](const json& m) { return m["time_to_leader_ms"]["mean"].get<double>(); }},
      {"term_churn_per_min", [](const json& m) { return m["term_churn_per_min"].get<double>(); }},
  };
  return cols;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

} // namespace

json aggregate(const std::string& in_dir, const std::string& out_dir, const AggregateOptions& opt) {
  if (!fs::is_directory(in_dir)) throw std::runtime_error("aggregate: " + in_dir + " is not a directory");
  std::map<std::string, std::map<std::uint64_t, json>> runs;  // method -> seed -> metrics
  std::map<std::string, std::map<std::uint64_t, std::string>> trace_files;
  for (const auto& e : fs::recursive_directory_iterator(in_dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".json") continue;
    if (!e.path().filename().string().starts_with("seed-")) continue;
    std::ifstream in(e.path());
    const json rec = json::parse(in);
    const auto method = rec.at("method").get<std::string>();
    const auto seed = rec.at("seed").get<std::uint64_t>();
    runs[method][seed] = rec.at("metrics");
    auto tp = e.path();
    tp.replace_extension(".trace");
    if (fs::exists(tp)) trace_files[method][seed] = tp.string();
  }
  if (runs.empty()) throw std::runtime_error("aggregate: no run artifacts under " + in_dir);

  json missing = json::array();
  const fs::path manifest = fs::path(in_dir) / "manifest.json";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    const json m = json::parse(in);
    for (const auto& meth : m.at("methods")) {
      const auto label = meth.at("label").get<std::string>();
      for (const auto& s : m.at("seeds")) {
        if (!runs.count(label) || !runs[label].count(s.get<std::uint64_t>())) missing.push_back({{"method", label}, {"seed", s}});
      }
    }
  }

  fs::create_directories(out_dir);
  std::ofstream table(fs::path(out_dir) / "summary.csv");
  table << "method,metric,point,ci_lo,ci_hi,seeds\n";
  std::ofstream maxima(fs::path(out_dir) / "per_seed_max.csv");
  maxima << "method,recovery_p99_ms,recovery_max_ms,unwritable_fraction\n";
  std::ofstream overlap(fs::path(out_dir) / "safety_overlap.csv");
  overlap << "method,episodes_per_run,mean_duration_ms,overlap_ge2,overlap_ge3\n";
  std::ofstream breakdown(fs::path(out_dir) / "failure_breakdown.csv");
  breakdown << "method,failed_elections,no_quorum,low_reach,contention\n";
  std::ofstream cdf(fs::path(out_dir) / "time_to_leader_cdf.csv");
  cdf << "method,latency_ms,cdf\n";

  json out{{"methods", json::object()}, {"missing", missing}};
  for (const auto& [method, seeds] : runs) {
    json mj = json::object();
    for (const auto& col : table_columns()) {
      std::vector<double> vals;
      for (const auto& [_, m] : seeds) vals.push_back(col.get(m));
      const ConfidenceInterval ci = bootstrap_ci(vals, 0.95, opt.resamples, opt.seed);
      table << method << ',' << col.name << ',' << fmt(ci.point) << ',' << fmt(ci.lo) << ',' << fmt(ci.hi) << ',' << vals.size() << '\n';
      mj[col.name] = {{"point", ci.point}, {"ci_lo", ci.lo}, {"ci_hi", ci.hi}};
    }
    double p99 = 0, mx = 0, unw = 0;
    double episodes = 0, dur = 0, o2 = 0, o3 = 0;
    double nq = 0, lr = 0, ct = 0, fe = 0;
    for (const auto& [_, m] : seeds) {
      p99 = std::max(p99, m["recovery_ms"]["p99"].get<double>());
      mx = std::max(mx, m["recovery_ms"]["max"].get<double>());
      unw = std::max(unw, m["unwritable_fraction"].get<double>());
      episodes += m["safety"]["episodes"].get<double>();
      dur += m["safety"]["mean_duration_ms"].get<double>();
      o2 += m["safety"]["overlap_ge2"].get<double>();
      o3 += m["safety"]["overlap_ge3"].get<double>();
      const double f = m["failure_causes"]["failed_elections"].get<double>();
      fe += f;
      nq += f * m["failure_causes"]["no_quorum"].get<double>();
      lr += f * m["failure_causes"]["low_reach"].get<double>();
      ct += f * m["failure_causes"]["contention"].get<double>();
    }
    const double n = static_cast<double>(seeds.size());
    maxima << method << ',' << fmt(p99) << ',' << fmt(mx) << ',' << fmt(unw) << '\n';
    overlap << method << ',' << fmt(episodes / n) << ',' << fmt(dur / n) << ',' << fmt(o2 / n) << ',' << fmt(o3 / n) << '\n';
    breakdown << method << ',' << fmt(fe) << ',' << fmt(fe ? nq / fe : 0) << ',' << fmt(fe ? lr / fe : 0) << ',' << fmt(fe ? ct / fe : 0) << '\n';
    mj["per_seed_max"] = {{"recovery_p99_ms", p99}, {"recovery_max_ms", mx}, {"unwritable_fraction", unw}};
    mj["safety"] = {{"episodes_per_run", episodes / n}, {"mean_duration_ms", dur / n}, {"overlap_ge2", o2 / n}, {"overlap_ge3", o3 / n}};
    mj["failure_causes"] = {{"failed_elections", fe}, {"no_quorum", fe ? nq / fe : 0}, {"low_reach", fe ? lr / fe : 0}, {"contention", fe ? ct / fe : 0}};
    mj["seeds"] = seeds.size();

    // Time-to-leader CDF needs the raw latencies, which only the traces carry.
    std::vector<double> lat;
    if (auto it = trace_files.find(method); it != trace_files.end()) {
      for (const auto& [_, path] : it->second) {
        std::ifstream in(path);
        const Trace t = Trace::read(in);
        const auto l = time_to_leader(t.events());
        lat.insert(lat.end(), l.begin(), l.end());
      }
    }
    std::sort(lat.begin(), lat.end());
    for (std::size_t i = 0; i < lat.size(); ++i) {
      if (i + 1 < lat.size() && lat[i + 1] == lat[i]) continue;
      cdf << method << ',' << fmt(lat[i]) << ',' << fmt(static_cast<double>(i + 1) / static_cast<double>(lat.size())) << '\n';
    }
    out["methods"][method] = mj;
  }
  std::ofstream(fs::path(out_dir) / "summary.json") << out.dump(2) << '\n';
  return out;
}

} // namespace raftsim
