// Command-line entry point: run, sweep, tune, ablate, bench, aggregate.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "raftsim/config.hpp"
#include "raftsim/harness.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int fail(const std::string& kind, const std::string& msg, const std::vector<std::string>& details = {}) {
  json err{{"error", kind}, {"message", msg}};
  if (!details.empty()) err["details"] = details;
  std::cerr << err.dump() << '\n';
  return 2;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

raftsim::PolicySpec method_spec(const std::string& method, const std::string& params) {
  raftsim::PolicySpec spec{method, json::object()};
  if (!params.empty()) spec.params = fs::exists(params) ? read_json(params) : json::parse(params);
  return spec;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Raft leader-election simulator with pluggable election-timeout policies"};
  app.require_subcommand(1);

  std::string scenario, method, params, out_dir, in_dir, plan, grid, base, variants_file;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  unsigned jobs = 1;
  std::size_t iters = 50000, resamples = 10000;

  auto* run = app.add_subcommand("run", "Simulate one seed and print its metrics");
  run->add_option("--scenario", scenario, "Preset name or scenario file")->required();
  run->add_option("--method", method, "Policy id (default: the scenario's policy)");
  run->add_option("--params", params, "Policy params as JSON text or a file");
  run->add_option("--seed", seed, "Seed");
  run->add_option("--out", out_dir, "Write trace and metrics here");

  auto* sweep = app.add_subcommand("sweep", "Run an experiment plan");
  sweep->add_option("--plan", plan, "Plan file")->required();
  sweep->add_option("--jobs", jobs, "Parallel runs (overrides the plan)");

  auto* tune = app.add_subcommand("tune", "Pick baseline parameters on tuning seeds");
  tune->add_option("--scenario", scenario)->required();
  tune->add_option("--method", method)->required();
  tune->add_option("--grid", grid, "JSON list of param objects; \"oracle\" enumerates regime maps")->required();
  tune->add_option("--seeds", seeds, "Tuning seeds (default: the scenario's tuning_seeds)");
  tune->add_option("--jobs", jobs);

  auto* ablate = app.add_subcommand("ablate", "Ablation variants with trace-identity self-check");
  ablate->add_option("--base", base, "Base scenario (preset or file)")->required();
  ablate->add_option("--variants", variants_file, "Variants file")->required();
  ablate->add_option("--seeds", seeds, "Seeds (default: the scenario's seeds)");
  ablate->add_option("--jobs", jobs);

  auto* bench = app.add_subcommand("bench", "Time bandit arm selection and update");
  bench->add_option("--policy", method, "Bandit policy id")->default_val("bandit");
  bench->add_option("--iters", iters)->default_val(50000);

  auto* agg = app.add_subcommand("aggregate", "Cross-seed tables with bootstrap CIs");
  agg->add_option("--in", in_dir)->required();
  agg->add_option("--out", out_dir)->required();
  agg->add_option("--resamples", resamples)->default_val(10000);
  agg->add_option("--seed", seed, "Bootstrap seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      raftsim::ScenarioConfig cfg = raftsim::load_scenario(scenario);
      if (!method.empty()) cfg.policy = method_spec(method, params);
      const auto errs = raftsim::validate_config(cfg);
      if (!errs.empty()) return fail("config", "invalid configuration", errs);
      const raftsim::RunResult r = raftsim::run_once(cfg, seed);
      json rec{{"scenario", cfg.name}, {"method", cfg.policy.id}, {"seed", seed}, {"trace_digest", r.trace.digest()},
               {"events", r.trace.size()}, {"metrics", raftsim::to_json(r.summary)}};
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        const std::string stem = (fs::path(out_dir) / ("seed-" + std::to_string(seed))).string();
        std::ofstream(stem + ".trace", std::ios::binary) << r.trace.serialize();
        std::ofstream(stem + ".json") << json{{"method", cfg.policy.id}, {"policy", cfg.policy.id}, {"seed", seed},
                                              {"trace_digest", r.trace.digest()}, {"metrics", rec["metrics"]}}
                                             .dump(2)
                                      << '\n';
      }
      std::cout << rec.dump(2) << '\n';
    } else if (*sweep) {
      raftsim::ExperimentPlan p = raftsim::load_plan(plan);
      if (sweep->count("--jobs")) p.jobs = jobs;
      const auto rep = raftsim::run_sweep(p);
      json out{{"runs", rep.runs}, {"failures", rep.failures.size()}, {"tuned", rep.tuned}, {"out_dir", p.out_dir}};
      std::cout << out.dump(2) << '\n';
      return rep.failures.empty() ? 0 : 1;
    } else if (*tune) {
      const raftsim::ScenarioConfig cfg = raftsim::load_scenario(scenario);
      std::vector<json> points;
      if (grid == "oracle") {
        std::vector<int> ids;
        for (const auto& r : cfg.net.regimes) ids.push_back(r.id);
        points = raftsim::oracle_candidates(cfg.arms.size(), ids);
      } else {
        points = (fs::exists(grid) ? read_json(grid) : json::parse(grid)).get<std::vector<json>>();
      }
      const auto ts = seeds.empty() ? cfg.tuning_seeds : seeds;
      const auto res = raftsim::tune_baseline(cfg, method, points, ts, jobs);
      json out{{"method", method}, {"best", res.best}, {"best_params", res.best_params()}, {"points", json::array()}};
      for (const auto& p : res.points) out["points"].push_back({{"params", p.params}, {"unwritable", p.unwritable}, {"recovery_mean_ms", p.recovery}});
      std::cout << out.dump(2) << '\n';
    } else if (*ablate) {
      const raftsim::ScenarioConfig cfg = raftsim::load_scenario(base);
      const auto vars = raftsim::variants_from_json(read_json(variants_file));
      const auto res = raftsim::ablation_self_check(cfg, vars, seeds.empty() ? cfg.seeds : seeds, jobs);
      json out{{"base", cfg.policy.id}, {"valid", json::array()}, {"invalid_no_op", json::array()}};
      for (const auto& r : res) {
        if (r.valid) {
          out["valid"].push_back({{"id", r.id}, {"d_recovery_pct", r.d_recovery_pct}, {"d_unwritable_pct", r.d_unwritable_pct},
                                  {"d_split_vote_pct", r.d_split_vote_pct}});
        } else {
          out["invalid_no_op"].push_back(r.id);
        }
      }
      std::cout << out.dump(2) << '\n';
    } else if (*bench) {
      const auto r = raftsim::overhead_bench(method, iters);
      auto op = [](const raftsim::OpTiming& t) {
        return json{{"mean_us", t.mean_us}, {"p50_us", t.p50_us}, {"p95_us", t.p95_us}, {"p99_us", t.p99_us}};
      };
      std::cout << json{{"policy", method}, {"iterations", r.iterations}, {"choose", op(r.choose)}, {"update", op(r.update)}}.dump(2) << '\n';
    } else if (*agg) {
      const json out = raftsim::aggregate(in_dir, out_dir, raftsim::AggregateOptions{resamples, seed});
      std::cout << json{{"methods", out["methods"].size()}, {"missing", out["missing"]}, {"out_dir", out_dir}}.dump(2) << '\n';
    }
  } catch (const raftsim::ConfigError& e) {
    return fail("config", "invalid configuration", e.errors());
  } catch (const std::invalid_argument& e) {
    return fail("invalid_argument", e.what());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
  return 0;
}
