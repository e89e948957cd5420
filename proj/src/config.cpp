#include "raftsim/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#ifndef RAFTSIM_PRESET_DIR
#define RAFTSIM_PRESET_DIR "presets"
#endif

namespace raftsim {

using nlohmann::json;

SimTime grace_window(SimTime heartbeat_interval, SimTime tick) {
  return std::max(heartbeat_interval * 3, tick * 2);
}

SimTime ScenarioConfig::grace_window() const { return raftsim::grace_window(heartbeat_interval, tick); }

namespace {

std::string join_errors(const std::vector<std::string>& errs) {
  std::string s = "invalid scenario config:";
  for (const auto& e : errs) s += "\n  " + e;
  return s;
}

/// Walks one JSON object, recording problems instead of throwing.
class Reader {
public:
  Reader(const json& obj, std::string path, std::vector<std::string>& errs) : obj_(obj), path_(std::move(path)), errs_(errs) {
    if (!obj_.is_object()) fail("", "expected an object");
  }

  bool has(const char* key) const { return obj_.is_object() && obj_.contains(key); }
  std::string at(const std::string& key) const { return path_ + "." + key; }
  const std::string& path() const { return path_; }

  void fail(const std::string& key, const std::string& msg) {
    errs_.push_back((key.empty() ? path_ : at(key)) + ": " + msg);
  }

  const json* get(const char* key) {
    seen_.emplace_back(key);
    return has(key) ? &obj_.at(key) : nullptr;
  }

  bool number(const char* key, double& out, double min = -HUGE_VAL, bool strict = false) {
    const json* v = get(key);
    if (!v) return false;
    if (!v->is_number()) {
      fail(key, "expected a number");
      return false;
    }
    const double d = v->get<double>();
    if (strict ? !(d > min) : !(d >= min)) {
      fail(key, std::string("must be ") + (strict ? "> " : ">= ") + trim(min));
      return false;
    }
    out = d;
    return true;
  }

  bool probability(const char* key, double& out) {
    double d = out;
    if (!number(key, d)) return false;
    if (d < 0.0 || d > 1.0) {
      fail(key, "must be in [0, 1]");
      return false;
    }
    out = d;
    return true;
  }

  bool ms(const char* key, SimTime& out, double min = 0.0, bool strict = false) {
    double d = 0.0;
    if (!number(key, d, min, strict)) return false;
    out = SimTime::from_ms_f(d);
    return true;
  }

  bool integer(const char* key, int& out, int min) {
    const json* v = get(key);
    if (!v) return false;
    if (!v->is_number_integer() || v->get<long long>() < min) {
      fail(key, "expected an integer >= " + std::to_string(min));
      return false;
    }
    out = v->get<int>();
    return true;
  }

  bool boolean(const char* key, bool& out) {
    const json* v = get(key);
    if (!v) return false;
    if (!v->is_boolean()) {
      fail(key, "expected true/false");
      return false;
    }
    out = v->get<bool>();
    return true;
  }

  bool string(const char* key, std::string& out) {
    const json* v = get(key);
    if (!v) return false;
    if (!v->is_string()) {
      fail(key, "expected a string");
      return false;
    }
    out = v->get<std::string>();
    return true;
  }

  /// [lo, hi] in ms with lo <= hi.
  bool ms_pair(const char* key, SimTime& lo, SimTime& hi) {
    const json* v = get(key);
    if (!v) return false;
    if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number() || (*v)[0].get<double>() < 0 ||
        (*v)[0].get<double>() > (*v)[1].get<double>()) {
      fail(key, "expected [lo_ms, hi_ms] with 0 <= lo <= hi");
      return false;
    }
    lo = SimTime::from_ms_f((*v)[0].get<double>());
    hi = SimTime::from_ms_f((*v)[1].get<double>());
    return true;
  }

  void require(const char* key) {
    if (!has(key)) fail(key, "required");
  }

  void finish() {
    if (!obj_.is_object()) return;
    for (const auto& [k, _] : obj_.items()) {
      if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) fail(k, "unknown key");
    }
  }

private:
  static std::string trim(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  }

  const json& obj_;
  std::string path_;
  std::vector<std::string>& errs_;
  std::vector<std::string> seen_;
};

DelayModel read_delay(const json& j, const std::string& path, std::vector<std::string>& errs) {
  DelayModel d;
  Reader r(j, path, errs);
  r.ms("base_ms", d.base);
  r.ms("jitter_std_ms", d.jitter_std);
  if (const json* t = r.get("tail")) {
    if (!t->is_null()) {
      ParetoTail tail;
      Reader tr(*t, r.at("tail"), errs);
      tr.number("shape", tail.shape, 0.0, true);
      tr.ms("scale_ms", tail.scale);
      tr.probability("mix_probability", tail.mix_probability);
      tr.finish();
      d.tail = tail;
    }
  }
  r.finish();
  return d;
}

LossModel read_loss(const json& j, const std::string& path, std::vector<std::string>& errs) {
  LossModel l;
  Reader r(j, path, errs);
  r.probability("iid", l.iid_loss_probability);
  if (const json* b = r.get("burst")) {
    if (!b->is_null()) {
      BurstLoss burst;
      Reader br(*b, r.at("burst"), errs);
      br.require("p_good_to_bad");
      br.require("p_bad_to_good");
      br.probability("p_good_to_bad", burst.p_good_to_bad);
      br.probability("p_bad_to_good", burst.p_bad_to_good);
      br.probability("loss_in_bad", burst.loss_in_bad);
      br.finish();
      l.burst = burst;
    }
  }
  r.finish();
  return l;
}

/// A node id or the string "leader".
std::optional<int> read_target(const json& v, const std::string& path, int nodes, std::vector<std::string>& errs) {
  if (v.is_string() && v.get<std::string>() == "leader") return kLeaderTarget;
  if (v.is_number_integer()) {
    const auto id = v.get<long long>();
    if (id >= 0 && id < nodes) return static_cast<int>(id);
  }
  errs.push_back(path + ": expected a node id in [0, " + std::to_string(nodes) + ") or \"leader\"");
  return std::nullopt;
}

void read_random_faults(const json& j, const std::string& path, RandomFaults& rf, std::vector<std::string>& errs) {
  Reader r(j, path, errs);
  if (const json* c = r.get("crashes")) {
    Reader cr(*c, r.at("crashes"), errs);
    cr.integer("count", rf.crash_count, 0);
    cr.ms_pair("window_ms", rf.crash_window_start, rf.crash_window_end);
    cr.ms_pair("down_ms", rf.crash_down_min, rf.crash_down_max);
    std::string target = "leader";
    if (cr.string("target", target) && target != "leader" && target != "random") cr.fail("target", "expected \"leader\" or \"random\"");
    rf.crash_target_leader = target == "leader";
    cr.finish();
  }
  if (const json* p = r.get("partitions")) {
    Reader pr(*p, r.at("partitions"), errs);
    pr.integer("count", rf.partition_count, 0);
    pr.ms_pair("window_ms", rf.partition_window_start, rf.partition_window_end);
    pr.ms_pair("duration_ms", rf.partition_min, rf.partition_max);
    std::string isolate = "leader";
    if (pr.string("isolate", isolate) && isolate != "leader" && isolate != "minority") {
      pr.fail("isolate", "expected \"leader\" or \"minority\"");
    }
    rf.partition_isolate_leader = isolate == "leader";
    pr.finish();
  }
  r.finish();
}

void read_faults(const json& j, const std::string& path, int nodes, FaultSchedule& fs, std::vector<std::string>& errs) {
  Reader r(j, path, errs);
  if (const json* cs = r.get("crashes")) {
    if (!cs->is_array()) r.fail("crashes", "expected a list");
    else {
      for (std::size_t i = 0; i < cs->size(); ++i) {
        const std::string p = r.at("crashes") + "[" + std::to_string(i) + "]";
        Reader cr((*cs)[i], p, errs);
        CrashFault c;
        cr.require("node");
        cr.require("down_ms");
        cr.require("up_ms");
        if (const json* n = cr.get("node")) {
          if (auto t = read_target(*n, cr.at("node"), nodes, errs)) c.node = *t;
        }
        cr.ms("down_ms", c.down);
        cr.ms("up_ms", c.up);
        if (cr.has("down_ms") && cr.has("up_ms") && !(c.down < c.up)) cr.fail("", "down_ms must be before up_ms");
        cr.finish();
        fs.crashes.push_back(c);
      }
    }
  }
  if (const json* ps = r.get("partitions")) {
    if (!ps->is_array()) r.fail("partitions", "expected a list");
    else {
      for (std::size_t i = 0; i < ps->size(); ++i) {
        const std::string p = r.at("partitions") + "[" + std::to_string(i) + "]";
        Reader pr((*ps)[i], p, errs);
        PartitionFault f;
        pr.require("side");
        pr.require("start_ms");
        pr.require("end_ms");
        if (const json* s = pr.get("side")) {
          if (s->is_string() && s->get<std::string>() == "leader") {
            f.isolate_leader = true;
          } else if (s->is_array() && !s->empty()) {
            bool ok = true;
            for (const auto& v : *s) {
              if (!v.is_number_integer() || v.get<long long>() < 0 || v.get<long long>() >= nodes) ok = false;
              else f.side.push_back(v.get<int>());
            }
            std::sort(f.side.begin(), f.side.end());
            if (std::adjacent_find(f.side.begin(), f.side.end()) != f.side.end()) ok = false;
            if (static_cast<int>(f.side.size()) >= nodes) ok = false;
            if (!ok) pr.fail("side", "expected distinct node ids forming a proper subset, or \"leader\"");
          } else {
            pr.fail("side", "expected a list of node ids or \"leader\"");
          }
        }
        pr.ms("start_ms", f.start);
        pr.ms("end_ms", f.end);
        if (pr.has("start_ms") && pr.has("end_ms") && !(f.start < f.end)) pr.fail("", "start_ms must be before end_ms");
        pr.finish();
        fs.partitions.push_back(f);
      }
    }
  }
  if (const json* rnd = r.get("random")) read_random_faults(*rnd, r.at("random"), fs.random, errs);
  r.finish();
}

std::vector<std::uint64_t> read_seeds(Reader& r, const char* key, std::vector<std::uint64_t> fallback) {
  const json* v = r.get(key);
  if (!v) return fallback;
  std::vector<std::uint64_t> out;
  auto non_negative = [](const json& x) { return x.is_number_integer() && x.get<long long>() >= 0; };
  if (v->is_object() && v->size() == 2 && v->contains("from") && v->contains("count") && non_negative(v->at("from")) &&
      non_negative(v->at("count"))) {
    const auto from = v->at("from").get<std::uint64_t>();
    for (std::uint64_t i = 0; i < v->at("count").get<std::uint64_t>(); ++i) out.push_back(from + i);
    return out;
  }
  if (!v->is_array()) {
    r.fail(key, "expected a list of non-negative integers or {\"from\": n, \"count\": k}");
    return fallback;
  }
  for (const auto& s : *v) {
    if (!non_negative(s)) {
      r.fail(key, "expected a list of non-negative integers");
      return fallback;
    }
    out.push_back(s.get<std::uint64_t>());
  }
  return out;
}

json ms_json(SimTime t) { return t.ms(); }

} // namespace

ConfigError::ConfigError(std::vector<std::string> errors) : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

std::vector<std::string> validate_config(const ScenarioConfig& cfg) {
  std::vector<std::string> errs;
  if (cfg.nodes < 1) errs.push_back("nodes: must be >= 1");
  if (cfg.horizon.us <= 0) errs.push_back("horizon_ms: must be > 0");
  if (cfg.heartbeat_interval.us <= 0) errs.push_back("heartbeat_interval_ms: must be > 0");
  if (cfg.tick.us <= 0) errs.push_back("tick_ms: must be > 0");
  for (const auto& e : cfg.arms.validate()) errs.push_back("arm_set: " + e);

  const auto& regs = cfg.net.regimes;
  if (regs.empty()) errs.push_back("regimes: at least one regime is required");
  for (std::size_t i = 0; i < regs.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (regs[k].id == regs[i].id) errs.push_back("regimes[" + std::to_string(i) + "].id: duplicate id " + std::to_string(regs[i].id));
    }
  }
  const auto& sw = cfg.net.schedule.switches;
  if (sw.empty() || sw.front().at.us != 0) errs.push_back("regime_schedule: first switch must be at 0 ms");
  for (std::size_t i = 0; i < sw.size(); ++i) {
    if (i > 0 && !(sw[i - 1].at < sw[i].at)) errs.push_back("regime_schedule[" + std::to_string(i) + "].at_ms: switch times must be strictly increasing");
    const bool defined = std::any_of(regs.begin(), regs.end(), [&](const Regime& r) { return r.id == sw[i].regime; });
    if (!defined) errs.push_back("regime_schedule[" + std::to_string(i) + "].regime: undefined regime " + std::to_string(sw[i].regime));
  }
  if (!cfg.net.service_delay.empty() && static_cast<int>(cfg.net.service_delay.size()) != cfg.nodes) {
    errs.push_back("service_delay_ms: expected one entry per node");
  }

  // Crashes of one node must not overlap; "leader" targets are checked against each other.
  const auto& cs = cfg.faults.crashes;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (cs[k].node == cs[i].node && cs[k].down < cs[i].up && cs[i].down < cs[k].up) {
        errs.push_back("faults.crashes[" + std::to_string(i) + "]: overlaps crashes[" + std::to_string(k) + "] on the same node");
      }
    }
  }
  const auto& ps = cfg.faults.partitions;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (ps[k].start < ps[i].end && ps[i].start < ps[k].end) {
        errs.push_back("faults.partitions[" + std::to_string(i) + "]: overlaps partitions[" + std::to_string(k) + "]");
      }
    }
  }
  for (const auto& e : validate_policy(cfg.policy, "policy")) errs.push_back(e);
  if (cfg.seeds.empty()) errs.push_back("seeds: at least one seed is required");
  for (auto s : cfg.tuning_seeds) {
    if (std::find(cfg.seeds.begin(), cfg.seeds.end(), s) != cfg.seeds.end()) {
      errs.push_back("tuning_seeds: seed " + std::to_string(s) + " also appears in seeds");
      break;
    }
  }
  return errs;
}

ScenarioConfig config_from_json(const json& j) {
  std::vector<std::string> errs;
  ScenarioConfig cfg;
  Reader r(j, "$", errs);
  if (!j.is_object()) throw ConfigError(errs);

  int version = 0;
  r.require("format_version");
  if (r.integer("format_version", version, 1) && version != kConfigFormatVersion) {
    r.fail("format_version", "unsupported version " + std::to_string(version) + " (expected " + std::to_string(kConfigFormatVersion) + ")");
  }
  r.string("name", cfg.name);
  r.integer("nodes", cfg.nodes, 1);
  r.ms("horizon_ms", cfg.horizon, 0.0, true);
  r.ms("heartbeat_interval_ms", cfg.heartbeat_interval, 0.0, true);
  r.ms("tick_ms", cfg.tick, 0.0, true);

  if (const json* regs = r.get("regimes")) {
    cfg.net.regimes.clear();
    if (!regs->is_array()) r.fail("regimes", "expected a list");
    else {
      for (std::size_t i = 0; i < regs->size(); ++i) {
        const std::string p = r.at("regimes") + "[" + std::to_string(i) + "]";
        Reader rr((*regs)[i], p, errs);
        Regime reg;
        rr.require("id");
        rr.integer("id", reg.id, 0);
        rr.string("name", reg.name);
        if (const json* d = rr.get("delay")) reg.delay = read_delay(*d, rr.at("delay"), errs);
        if (const json* l = rr.get("loss")) reg.loss = read_loss(*l, rr.at("loss"), errs);
        rr.finish();
        cfg.net.regimes.push_back(std::move(reg));
      }
    }
  }
  if (const json* sched = r.get("regime_schedule")) {
    cfg.net.schedule.switches.clear();
    if (!sched->is_array()) r.fail("regime_schedule", "expected a list");
    else {
      for (std::size_t i = 0; i < sched->size(); ++i) {
        const std::string p = r.at("regime_schedule") + "[" + std::to_string(i) + "]";
        Reader sr((*sched)[i], p, errs);
        RegimeSwitch s;
        sr.require("at_ms");
        sr.require("regime");
        sr.ms("at_ms", s.at);
        sr.integer("regime", s.regime, 0);
        sr.finish();
        cfg.net.schedule.switches.push_back(s);
      }
    }
  }
  if (const json* sd = r.get("service_delay_ms")) {
    bool ok = sd->is_array();
    if (ok) {
      for (const auto& v : *sd) {
        if (!v.is_number() || v.get<double>() < 0) ok = false;
        else cfg.net.service_delay.push_back(SimTime::from_ms_f(v.get<double>()));
      }
    }
    if (!ok) r.fail("service_delay_ms", "expected a list of non-negative numbers");
  }
  if (const json* f = r.get("faults")) read_faults(*f, r.at("faults"), cfg.nodes, cfg.faults, errs);

  if (const json* a = r.get("arm_set")) {
    if (a->is_string()) {
      try {
        cfg.arms = ArmSet::named(a->get<std::string>());
        cfg.arm_set = a->get<std::string>();
      } catch (const std::invalid_argument& e) {
        r.fail("arm_set", e.what());
      }
    } else if (a->is_array()) {
      std::vector<ArmRange> arms;
      bool ok = true;
      for (const auto& v : *a) {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
          ok = false;
          break;
        }
        arms.push_back(ArmRange{SimTime::from_ms_f(v[0].get<double>()), SimTime::from_ms_f(v[1].get<double>())});
      }
      if (!ok) r.fail("arm_set", "expected a preset name or a list of [T_min_ms, T_max_ms]");
      cfg.arms = ArmSet(std::move(arms));
      cfg.arm_set.clear();
    } else {
      r.fail("arm_set", "expected a preset name or a list of [T_min_ms, T_max_ms]");
    }
  }
  r.ms("min_jitter_width_ms", cfg.min_jitter_width);
  if (const json* p = r.get("policy")) {
    Reader pr(*p, r.at("policy"), errs);
    pr.require("id");
    pr.string("id", cfg.policy.id);
    if (const json* params = pr.get("params")) cfg.policy.params = *params;
    pr.finish();
  }
  r.boolean("reset_on_restart", cfg.reset_on_restart);
  cfg.seeds = read_seeds(r, "seeds", cfg.seeds);
  cfg.tuning_seeds = read_seeds(r, "tuning_seeds", cfg.tuning_seeds);
  r.finish();

  for (auto& e : validate_config(cfg)) errs.push_back("$." + e);
  if (!errs.empty()) throw ConfigError(std::move(errs));
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path + ": cannot open file"});
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({path + ": " + e.what()});
  }
  return config_from_json(j);
}

json config_to_json(const ScenarioConfig& cfg) {
  json j;
  j["format_version"] = kConfigFormatVersion;
  j["name"] = cfg.name;
  j["nodes"] = cfg.nodes;
  j["horizon_ms"] = ms_json(cfg.horizon);
  j["heartbeat_interval_ms"] = ms_json(cfg.heartbeat_interval);
  j["tick_ms"] = ms_json(cfg.tick);
  json regs = json::array();
  for (const auto& r : cfg.net.regimes) {
    json d{{"base_ms", ms_json(r.delay.base)}, {"jitter_std_ms", ms_json(r.delay.jitter_std)}, {"tail", nullptr}};
    if (r.delay.tail) {
      d["tail"] = {{"shape", r.delay.tail->shape}, {"scale_ms", ms_json(r.delay.tail->scale)}, {"mix_probability", r.delay.tail->mix_probability}};
    }
    json l{{"iid", r.loss.iid_loss_probability}, {"burst", nullptr}};
    if (r.loss.burst) {
      l["burst"] = {{"p_good_to_bad", r.loss.burst->p_good_to_bad},
                    {"p_bad_to_good", r.loss.burst->p_bad_to_good},
                    {"loss_in_bad", r.loss.burst->loss_in_bad}};
    }
    regs.push_back({{"id", r.id}, {"name", r.name}, {"delay", d}, {"loss", l}});
  }
  j["regimes"] = regs;
  json sched = json::array();
  for (const auto& s : cfg.net.schedule.switches) sched.push_back({{"at_ms", ms_json(s.at)}, {"regime", s.regime}});
  j["regime_schedule"] = sched;
  json sd = json::array();
  for (auto t : cfg.net.service_delay) sd.push_back(ms_json(t));
  j["service_delay_ms"] = sd;

  json crashes = json::array();
  for (const auto& c : cfg.faults.crashes) {
    crashes.push_back({{"node", c.node == kLeaderTarget ? json("leader") : json(c.node)}, {"down_ms", ms_json(c.down)}, {"up_ms", ms_json(c.up)}});
  }
  json parts = json::array();
  for (const auto& p : cfg.faults.partitions) {
    parts.push_back({{"side", p.isolate_leader ? json("leader") : json(p.side)}, {"start_ms", ms_json(p.start)}, {"end_ms", ms_json(p.end)}});
  }
  const RandomFaults& rf = cfg.faults.random;
  json random{
      {"crashes",
       {{"count", rf.crash_count},
        {"window_ms", {ms_json(rf.crash_window_start), ms_json(rf.crash_window_end)}},
        {"down_ms", {ms_json(rf.crash_down_min), ms_json(rf.crash_down_max)}},
        {"target", rf.crash_target_leader ? "leader" : "random"}}},
      {"partitions",
       {{"count", rf.partition_count},
        {"window_ms", {ms_json(rf.partition_window_start), ms_json(rf.partition_window_end)}},
        {"duration_ms", {ms_json(rf.partition_min), ms_json(rf.partition_max)}},
        {"isolate", rf.partition_isolate_leader ? "leader" : "minority"}}}};
  j["faults"] = {{"crashes", crashes}, {"partitions", parts}, {"random", random}};

  if (!cfg.arm_set.empty()) {
    j["arm_set"] = cfg.arm_set;
  } else {
    json arms = json::array();
    for (const auto& a : cfg.arms.arms()) arms.push_back({ms_json(a.lo), ms_json(a.hi)});
    j["arm_set"] = arms;
  }
  j["min_jitter_width_ms"] = ms_json(cfg.min_jitter_width);
  j["policy"] = {{"id", cfg.policy.id}, {"params", cfg.policy.params}};
  j["reset_on_restart"] = cfg.reset_on_restart;
  j["seeds"] = cfg.seeds;
  j["tuning_seeds"] = cfg.tuning_seeds;
  return j;
}

std::string serialize_config(const ScenarioConfig& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

std::string preset_dir() {
  if (const char* env = std::getenv("RAFTSIM_PRESET_DIR")) return env;
  return RAFTSIM_PRESET_DIR;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  std::error_code ec;
  for (const auto& e : std::filesystem::directory_iterator(preset_dir(), ec)) {
    if (e.path().extension() == ".json") out.push_back(e.path().stem().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

ScenarioConfig load_scenario(const std::string& preset_or_path) {
  if (std::filesystem::exists(preset_or_path)) return load_config(preset_or_path);
  const auto p = std::filesystem::path(preset_dir()) / (preset_or_path + ".json");
  if (std::filesystem::exists(p)) return load_config(p.string());
  throw ConfigError({preset_or_path + ": neither a file nor a preset in " + preset_dir()});
}

} // namespace raftsim
