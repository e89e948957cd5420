#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "raftsim/policy/bandit_policy.hpp"
#include "raftsim/policy/policy.hpp"

namespace raftsim {

using nlohmann::json;

// --- snapshot helpers -------------------------------------------------------

namespace {

void put_num(std::ostream& os, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  os << ' ' << buf;
}

double get_num(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) throw std::runtime_error("policy snapshot: truncated");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size()) throw std::runtime_error("policy snapshot: bad number '" + tok + "'");
  return v;
}

long long get_int(std::istream& is) {
  long long v;
  if (!(is >> v)) throw std::runtime_error("policy snapshot: expected integer");
  return v;
}

void expect(std::istream& is, std::string_view word) {
  std::string tok;
  if (!(is >> tok) || tok != word) {
    throw std::runtime_error("policy snapshot: expected '" + std::string(word) + "', got '" + tok + "'");
  }
}

void save_ewma(std::ostream& os, const Ewma& e) {
  os << "ewma " << (e.seen() ? 1 : 0);
  put_num(os, e.mean());
  put_num(os, e.variance());
  os << '\n';
}

void load_ewma(std::istream& is, Ewma& e) {
  expect(is, "ewma");
  const bool seen = get_int(is) != 0;
  const double m = get_num(is);
  const double v = get_num(is);
  e.assign(seen, m, v);
}

void save_quantile(std::ostream& os, const QuantileEstimator& q) {
  os << "quantile " << q.values().size();
  for (double v : q.values()) put_num(os, v);
  os << '\n';
}

void load_quantile(std::istream& is, QuantileEstimator& q) {
  expect(is, "quantile");
  const auto n = get_int(is);
  std::deque<double> vals;
  for (long long i = 0; i < n; ++i) vals.push_back(get_num(is));
  q.assign(std::move(vals));
}

void save_vec(std::ostream& os, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put_num(os, v[i]);
}

Eigen::VectorXd load_vec(std::istream& is, Eigen::Index d) {
  Eigen::VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = get_num(is);
  return v;
}

} // namespace

std::string TimeoutPolicy::snapshot() const {
  std::ostringstream os;
  os << kSnapshotHeader << '\n' << "policy " << id() << '\n';
  save_state(os);
  os << "end\n";
  return os.str();
}

void TimeoutPolicy::restore(std::string_view snap) {
  std::istringstream is{std::string(snap)};
  std::string header;
  std::getline(is, header);
  if (header != kSnapshotHeader) throw std::runtime_error("policy snapshot: unsupported version '" + header + "'");
  std::string word, pid;
  is >> word >> pid;
  if (word != "policy" || pid != id()) {
    throw std::runtime_error("policy snapshot: taken from '" + pid + "', cannot restore into '" + std::string(id()) + "'");
  }
  load_state(is);
  expect(is, "end");
}

// --- shared formulas --------------------------------------------------------

double shaped_reward(const RewardWeights& w, const AttemptResult& res) {
  switch (res.outcome) {
    case AttemptOutcome::Won: return w.success - w.latency_per_ms * res.latency.ms();
    case AttemptOutcome::Failed: return -w.latency_per_ms * res.sampled_timeout.ms() - w.split_vote;
    case AttemptOutcome::Superseded: break;
  }
  throw std::logic_error("shaped_reward: superseded attempts carry no reward");
}

double dynatune_et_timeout_ms(double rtt_estimate_ms, double heartbeat_ms, const DynatuneParams& p) {
  const double t = std::max(p.safety_factor * rtt_estimate_ms, p.min_hb_ratio * heartbeat_ms);
  return std::min(t, p.clamp_max_ms);
}

JointSetting dynatune_joint_adjust(double base_ms, const DynatuneParams& p) {
  const double hb = std::clamp(base_ms / p.heartbeat_ratio, p.hb_min_ms, p.hb_max_ms);
  return JointSetting{hb, dynatune_et_timeout_ms(base_ms, hb, p)};
}

double phi_value(double t_ms, double mean_ms, double std_ms) {
  const double z = (t_ms - mean_ms) / std_ms;
  const double tail = 0.5 * std::erfc(z / std::sqrt(2.0));
  return -std::log10(std::max(tail, 1e-300));
}

int threshold_arm(double signal, double lo, double hi, std::size_t n_arms) {
  if (n_arms <= 1) return 0;
  if (signal < lo) return 0;
  if (signal < hi) return static_cast<int>(std::min<std::size_t>(1, n_arms - 1));
  return static_cast<int>(n_arms - 1);
}

std::vector<double> raw_features(const Observation& obs, FeatureSet set) {
  std::vector<double> f{1.0, obs.hb_mean_ms, obs.hb_std_ms, obs.since_last_hb_ms};
  if (set == FeatureSet::Full) f.push_back(static_cast<double>(obs.consecutive_failures));
  return f;
}

// --- parameter parsing ------------------------------------------------------

namespace {

/// Reads typed values from a params object and collects every problem.
class ParamReader {
public:
  ParamReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) errors_.push_back(path_ + ": params must be an object");
  }

  template <typename Check>
  void number(const char* key, double& out, Check ok, const char* rule) {
    seen_.emplace_back(key);
    if (!obj_.is_object() || !obj_.contains(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number()) {
      errors_.push_back(path_ + "." + key + ": expected a number");
      return;
    }
    const double d = v.get<double>();
    if (!ok(d)) {
      errors_.push_back(path_ + "." + key + ": " + rule);
      return;
    }
    out = d;
  }

  void integer(const char* key, int& out, int min) {
    seen_.emplace_back(key);
    if (!obj_.is_object() || !obj_.contains(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < min) {
      errors_.push_back(path_ + "." + key + ": expected an integer >= " + std::to_string(min));
      return;
    }
    out = v.get<int>();
  }

  void boolean(const char* key, bool& out) {
    seen_.emplace_back(key);
    if (!obj_.is_object() || !obj_.contains(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_boolean()) {
      errors_.push_back(path_ + "." + key + ": expected true/false");
      return;
    }
    out = v.get<bool>();
  }

  std::optional<std::string> choice(const char* key, std::initializer_list<std::string_view> allowed) {
    seen_.emplace_back(key);
    if (!obj_.is_object() || !obj_.contains(key)) return std::nullopt;
    const json& v = obj_.at(key);
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      for (auto a : allowed) {
        if (a == s) return s;
      }
    }
    std::string list;
    for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
    errors_.push_back(path_ + "." + key + ": expected one of {" + list + "}");
    return std::nullopt;
  }

  std::optional<std::pair<double, double>> pair(const char* key) {
    seen_.emplace_back(key);
    if (!obj_.is_object() || !obj_.contains(key)) return std::nullopt;
    const json& v = obj_.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number() || !(v[0].get<double>() < v[1].get<double>())) {
      errors_.push_back(path_ + "." + key + ": expected [lo, hi] with lo < hi");
      return std::nullopt;
    }
    return std::pair{v[0].get<double>(), v[1].get<double>()};
  }

  const json* raw(const char* key) {
    seen_.emplace_back(key);
    if (!obj_.is_object() || !obj_.contains(key)) return nullptr;
    return &obj_.at(key);
  }

  void error(const std::string& key, const std::string& msg) { errors_.push_back(path_ + "." + key + ": " + msg); }

  std::vector<std::string> finish() {
    if (obj_.is_object()) {
      for (const auto& [k, _] : obj_.items()) {
        if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) errors_.push_back(path_ + "." + k + ": unknown parameter");
      }
    }
    return std::move(errors_);
  }

private:
  const json& obj_;
  std::string path_;
  std::vector<std::string> seen_;
  std::vector<std::string> errors_;
};

auto positive = [](double v) { return v > 0.0; };
auto nonneg = [](double v) { return v >= 0.0; };
auto unit_open = [](double v) { return v > 0.0 && v < 1.0; };
auto unit_half = [](double v) { return v > 0.0 && v <= 1.0; };

bool is_bandit(std::string_view id) {
  return id == "bandit" || id == "bandit_safe" || id == "bandit_ts_safe" || id == "bandit_qdecay" || id == "bandit_safe_ln";
}

struct BanditOverrides {
  std::optional<std::string> arm_set;
  std::optional<double> min_jitter_ms;
};

std::pair<BanditParams, BanditOverrides> read_bandit(const PolicySpec& spec, std::vector<std::string>& errs,
                                                     const std::string& path) {
  BanditParams p;
  BanditOverrides o;
  if (spec.id == "bandit") p.safe = false;
  if (spec.id == "bandit_ts_safe") p.exploration = Exploration::Thompson;
  if (spec.id == "bandit_qdecay") p.scaling = ArmScaling::QuantileRelative;
  if (spec.id == "bandit_safe_ln") {
    o.arm_set = "shifted3";
    o.min_jitter_ms = 50.0;
  }

  ParamReader r(spec.params, path);
  if (auto e = r.choice("exploration", {"ucb", "thompson"})) p.exploration = *e == "ucb" ? Exploration::Ucb : Exploration::Thompson;
  r.number("alpha", p.alpha, nonneg, "must be >= 0");
  r.number("lambda", p.lambda, positive, "must be > 0");
  if (auto l = r.choice("learner", {"plain", "discounted", "window"})) p.learner = *l;
  r.number("discount", p.discount, unit_half, "must be in (0, 1]");
  double window = static_cast<double>(p.window);
  r.number("window", window, [](double v) { return v >= 1.0 && v == std::floor(v); }, "must be an integer >= 1");
  p.window = static_cast<std::size_t>(window);
  r.number("ts_scale", p.ts_scale, nonneg, "must be >= 0");
  r.boolean("safe", p.safe);
  r.integer("safe_F", p.safety.failure_threshold, 1);
  r.integer("safe_cooldown", p.safety.cooldown_elections, 0);
  r.number("w_s", p.reward.success, nonneg, "must be >= 0");
  r.number("w_l", p.reward.latency_per_ms, nonneg, "must be >= 0");
  r.number("w_sv", p.reward.split_vote, nonneg, "must be >= 0");
  if (auto f = r.choice("features", {"full", "hb_only"})) p.features = *f == "full" ? FeatureSet::Full : FeatureSet::HeartbeatOnly;
  if (auto n = r.choice("feature_norm", {"raw", "z", "z_clip3"})) {
    p.norm = *n == "raw" ? FeatureNorm::Raw : (*n == "z" ? FeatureNorm::ZScore : FeatureNorm::ZScoreClip3);
  }
  if (auto s = r.choice("scaling", {"absolute", "quantile"})) p.scaling = *s == "absolute" ? ArmScaling::Absolute : ArmScaling::QuantileRelative;
  r.number("quantile_p", p.quantile_p, unit_open, "must be in (0, 1)");
  r.number("quantile_decay", p.quantile_decay, unit_half, "must be in (0, 1]");
  if (const json* m = r.raw("multipliers")) {
    std::vector<RelativeArm> arms;
    bool ok = m->is_array() && !m->empty();
    if (ok) {
      for (const auto& a : *m) {
        if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number() || !(a[0].get<double>() > 0) ||
            !(a[0].get<double>() < a[1].get<double>())) {
          ok = false;
          break;
        }
        arms.push_back(RelativeArm{a[0].get<double>(), a[1].get<double>()});
      }
    }
    if (ok) p.multipliers = std::move(arms);
    else r.error("multipliers", "expected a non-empty list of [lo, hi] with 0 < lo < hi");
  }
  r.number("fallback_base_ms", p.fallback_base_ms, positive, "must be > 0");
  if (auto a = r.choice("arm_set", {"standard", "broad5", "shifted3", "fine7", "alignment"})) o.arm_set = *a;
  double mj = o.min_jitter_ms.value_or(0.0);
  r.number("min_jitter_ms", mj, nonneg, "must be >= 0");
  if (spec.params.is_object() && spec.params.contains("min_jitter_ms")) o.min_jitter_ms = mj;
  auto e = r.finish();
  errs.insert(errs.end(), e.begin(), e.end());
  return {p, o};
}

} // namespace

BanditParams parse_bandit_params(const PolicySpec& spec) {
  std::vector<std::string> errs;
  auto [p, _] = read_bandit(spec, errs, "policy.params");
  if (!errs.empty()) throw std::invalid_argument(errs.front());
  return p;
}

std::vector<std::string> known_policy_ids() {
  return {"random",        "static_conservative", "backoff",        "rtt_heuristic",  "phi_accrual",
          "quantile_decay", "dynatune_et",        "dynatune_joint", "oracle_hint",    "oracle_best_per_regime",
          "bandit",        "bandit_safe",         "bandit_ts_safe", "bandit_qdecay",  "bandit_safe_ln"};
}

bool is_known_policy(std::string_view id) {
  const auto ids = known_policy_ids();
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

namespace {

std::optional<int> parse_arm_label(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s.size() >= 2 && (s[0] == 'A' || s[0] == 'a')) {
      char* end = nullptr;
      const long k = std::strtol(s.c_str() + 1, &end, 10);
      if (*end == '\0' && k >= 1) return static_cast<int>(k - 1);
    }
    return std::nullopt;
  }
  if (v.is_number_integer() && v.get<int>() >= 0) return v.get<int>();
  return std::nullopt;
}

struct ParsedBaseline {
  RandomParams random;
  BackoffParams backoff;
  RttHeuristicParams rtt;
  PhiAccrualParams phi;
  QuantileDecayParams quantile;
  DynatuneParams dynatune;
  OracleParams oracle;
};

ParsedBaseline read_baseline(const PolicySpec& spec, std::vector<std::string>& errs, const std::string& path) {
  ParsedBaseline b;
  ParamReader r(spec.params, path);
  const std::string& id = spec.id;
  if (id == "random") {
    if (auto rg = r.pair("range_ms")) b.random = {SimTime::from_ms_f(rg->first), SimTime::from_ms_f(rg->second)};
  } else if (id == "backoff") {
    if (auto rg = r.pair("range_ms")) {
      b.backoff.lo = SimTime::from_ms_f(rg->first);
      b.backoff.hi = SimTime::from_ms_f(rg->second);
    }
    double cap = 0.0;
    r.number("cap_ms", cap, positive, "must be > 0");
    if (cap > 0.0) b.backoff.cap = SimTime::from_ms_f(cap);
  } else if (id == "rtt_heuristic") {
    if (auto t = r.pair("thr")) {
      b.rtt.thr_lo_ms = t->first;
      b.rtt.thr_hi_ms = t->second;
    }
    r.number("ewma_alpha", b.rtt.ewma_alpha, unit_half, "must be in (0, 1]");
  } else if (id == "phi_accrual") {
    if (auto t = r.pair("phi")) {
      b.phi.phi_lo = t->first;
      b.phi.phi_hi = t->second;
    }
    r.number("ewma_alpha", b.phi.ewma_alpha, unit_half, "must be in (0, 1]");
    r.number("min_std_ms", b.phi.min_std_ms, positive, "must be > 0");
  } else if (id == "quantile_decay") {
    r.number("p", b.quantile.p, unit_open, "must be in (0, 1)");
    r.number("decay", b.quantile.decay, unit_half, "must be in (0, 1]");
    if (auto m = r.pair("mult")) {
      b.quantile.mult_lo = m->first;
      b.quantile.mult_hi = m->second;
      if (m->first <= 0.0) r.error("mult", "multipliers must be positive");
    }
  } else if (id == "dynatune_et" || id == "dynatune_joint") {
    DynatuneParams& d = b.dynatune;
    if (id == "dynatune_joint") {
      d.joint = true;
      d.safety_factor = 2.0;
      d.min_hb_ratio = 4.0;
    }
    r.number("safety_factor", d.safety_factor, positive, "must be > 0");
    r.number("oneway_factor", d.oneway_factor, positive, "must be > 0");
    r.number("min_hb_ratio", d.min_hb_ratio, nonneg, "must be >= 0");
    r.number("clamp_max_ms", d.clamp_max_ms, positive, "must be > 0");
    r.number("ewma_alpha", d.ewma_alpha, unit_half, "must be in (0, 1]");
    if (d.joint) {
      r.number("heartbeat_ratio", d.heartbeat_ratio, positive, "must be > 0");
      r.number("hb_min_ms", d.hb_min_ms, positive, "must be > 0");
      r.number("hb_max_ms", d.hb_max_ms, positive, "must be > 0");
      if (d.hb_min_ms > d.hb_max_ms) r.error("hb_min_ms", "must not exceed hb_max_ms");
    }
  } else if (id == "oracle_hint" || id == "oracle_best_per_regime") {
    if (id == "oracle_hint") b.oracle.mapping = {{0, 0}, {1, 1}};
    else b.oracle.mapping = {{0, 1}, {1, 1}};
    if (const json* m = r.raw("map")) {
      std::map<int, int> mapping;
      bool ok = m->is_object() && !m->empty();
      if (ok) {
        for (const auto& [k, v] : m->items()) {
          char* end = nullptr;
          const long reg = std::strtol(k.c_str(), &end, 10);
          const auto arm = parse_arm_label(v);
          if (k.empty() || *end != '\0' || reg < 0 || !arm) {
            ok = false;
            break;
          }
          mapping[static_cast<int>(reg)] = *arm;
        }
      }
      if (ok) b.oracle.mapping = std::move(mapping);
      else r.error("map", "expected {\"<regime id>\": \"A<k>\" ...}");
    }
  }
  auto e = r.finish();
  errs.insert(errs.end(), e.begin(), e.end());
  return b;
}

} // namespace

std::vector<std::string> validate_policy(const PolicySpec& spec, const std::string& path) {
  std::vector<std::string> errs;
  if (!is_known_policy(spec.id)) {
    errs.push_back(path + ".id: unknown policy id '" + spec.id + "'");
    return errs;
  }
  if (is_bandit(spec.id)) read_bandit(spec, errs, path + ".params");
  else read_baseline(spec, errs, path + ".params");
  return errs;
}

// --- BanditPolicy -----------------------------------------------------------

namespace {

bandit::ForgettingRule<double> make_rule(const BanditParams& p) {
  if (p.learner == "discounted") return bandit::ForgettingRule<double>::discount(p.discount);
  if (p.learner == "window") return bandit::ForgettingRule<double>::sliding(p.window);
  return bandit::ForgettingRule<double>::none();
}

} // namespace

BanditPolicy::BanditPolicy(std::string id, BanditParams params, PolicyEnvironment env)
    : id_(std::move(id)),
      params_(std::move(params)),
      env_(std::move(env)),
      absolute_(env_.arms),
      dim_(params_.features == FeatureSet::Full ? 5 : 4),
      rule_(make_rule(params_)),
      gate_(params_.safety),
      quantile_(params_.quantile_p, params_.quantile_decay),
      scaler_(static_cast<std::size_t>(dim_ - 1)) {
  const std::size_t n = params_.scaling == ArmScaling::Absolute ? absolute_.size() : params_.multipliers.size();
  if (n == 0) throw std::invalid_argument("BanditPolicy: no arms");
  arms_.assign(n, bandit::LinearArm<double>(dim_, params_.lambda));
}

ArmRange BanditPolicy::range(std::size_t arm) const {
  if (params_.scaling == ArmScaling::Absolute) return absolute_[arm];
  const double base = quantile_.estimate().value_or(params_.fallback_base_ms);
  const RelativeArm& m = params_.multipliers[arm];
  return ArmRange{SimTime::from_ms_f(m.lo * base), SimTime::from_ms_f(m.hi * base)};
}

Eigen::VectorXd BanditPolicy::context(const Observation& obs) {
  const std::vector<double> raw = raw_features(obs, params_.features);
  Eigen::VectorXd x(dim_);
  x[0] = 1.0;
  if (params_.norm == FeatureNorm::Raw) {
    for (Eigen::Index i = 1; i < dim_; ++i) x[i] = raw[static_cast<std::size_t>(i)];
    return x;
  }
  scaler_.observe(std::vector<double>(raw.begin() + 1, raw.end()));
  for (Eigen::Index i = 1; i < dim_; ++i) {
    double z = scaler_.scale(static_cast<std::size_t>(i - 1), raw[static_cast<std::size_t>(i)]);
    if (params_.norm == FeatureNorm::ZScoreClip3) z = std::clamp(z, -3.0, 3.0);
    x[i] = z;
  }
  return x;
}

std::size_t BanditPolicy::select_arm(const Eigen::VectorXd& x, RngStream& rng) const {
  if (params_.exploration == Exploration::Thompson) return bandit::thompson_choose(arms_, x, params_.ts_scale, rng);
  return bandit::linucb_choose(arms_, x, params_.alpha);
}

void BanditPolicy::update_arm(std::size_t arm, const Eigen::VectorXd& x, double reward) {
  arms_.at(arm).apply(rule_, x, reward);
}

Decision BanditPolicy::choose(const Observation& obs, RngStream& rng) {
  Eigen::VectorXd x = context(obs);
  const bool forced = params_.safe && gate_.forced();
  const std::size_t arm = forced ? arms_.size() - 1 : select_arm(x, rng);
  Decision d;
  d.arm = static_cast<int>(arm);
  d.forced_safe = forced;
  d.timeout = sample_in(range(arm), env_.min_jitter_width, rng);
  if (obs.starts_attempt()) pending_ = Pending{arm, std::move(x)};
  return d;
}

PolicyEffects BanditPolicy::observe_outcome(const AttemptResult& res) {
  PolicyEffects fx;
  if (res.outcome == AttemptOutcome::Superseded) {
    pending_.reset();
    return fx;
  }
  if (pending_) {
    const double r = shaped_reward(params_.reward, res);
    update_arm(pending_->arm, pending_->x, r);
    rewards_.push_back(RewardRecord{static_cast<int>(pending_->arm), r, res});
    pending_.reset();
  }
  if (params_.safe) {
    const auto t = res.outcome == AttemptOutcome::Won ? gate_.on_won() : gate_.on_failed();
    fx.safety_entered = t.entered;
    fx.safety_exited = t.exited;
  }
  return fx;
}

void BanditPolicy::observe_heartbeat(const HeartbeatSample& hb) {
  if (params_.scaling == ArmScaling::QuantileRelative) quantile_.observe(hb.one_way_delay_ms);
}

bool BanditPolicy::reset() {
  for (auto& a : arms_) a.reset();
  quantile_.reset();
  scaler_.reset();
  pending_.reset();
  return gate_.reset();
}

void BanditPolicy::save_state(std::ostream& os) const {
  os << "arms " << arms_.size() << ' ' << dim_ << '\n';
  for (const auto& a : arms_) {
    os << "A";
    for (Eigen::Index i = 0; i < dim_; ++i)
      for (Eigen::Index j = 0; j < dim_; ++j) put_num(os, a.A()(i, j));
    os << "\nb";
    save_vec(os, a.b());
    os << "\nhistory " << a.history().size() << '\n';
    for (const auto& s : a.history()) {
      save_vec(os, s.x);
      put_num(os, s.r);
      os << '\n';
    }
  }
  os << "safety " << gate_.consecutive_failures() << ' ' << gate_.cooldown_remaining() << '\n';
  save_quantile(os, quantile_);
  os << "scaler " << scaler_.count();
  for (double v : scaler_.mean()) put_num(os, v);
  for (double v : scaler_.m2()) put_num(os, v);
  os << '\n' << "pending " << (pending_ ? 1 : 0);
  if (pending_) {
    os << ' ' << pending_->arm;
    save_vec(os, pending_->x);
  }
  os << '\n';
}

void BanditPolicy::load_state(std::istream& is) {
  expect(is, "arms");
  const auto n = get_int(is);
  const auto d = get_int(is);
  if (n != static_cast<long long>(arms_.size()) || d != dim_) throw std::runtime_error("policy snapshot: arm shape mismatch");
  for (auto& a : arms_) {
    expect(is, "A");
    Eigen::MatrixXd A(dim_, dim_);
    for (Eigen::Index i = 0; i < dim_; ++i)
      for (Eigen::Index j = 0; j < dim_; ++j) A(i, j) = get_num(is);
    expect(is, "b");
    Eigen::VectorXd b = load_vec(is, dim_);
    expect(is, "history");
    const auto h = get_int(is);
    std::deque<bandit::LinearArm<double>::Sample> hist;
    for (long long k = 0; k < h; ++k) {
      Eigen::VectorXd x = load_vec(is, dim_);
      const double r = get_num(is);
      hist.push_back({std::move(x), r});
    }
    a.assign(std::move(A), std::move(b), std::move(hist));
  }
  expect(is, "safety");
  const auto cf = static_cast<int>(get_int(is));
  const auto cd = static_cast<int>(get_int(is));
  gate_.assign(cf, cd);
  load_quantile(is, quantile_);
  expect(is, "scaler");
  const auto cnt = static_cast<std::size_t>(get_int(is));
  std::vector<double> mean(scaler_.dims()), m2(scaler_.dims());
  for (auto& v : mean) v = get_num(is);
  for (auto& v : m2) v = get_num(is);
  scaler_.assign(cnt, std::move(mean), std::move(m2));
  expect(is, "pending");
  if (get_int(is) != 0) {
    const auto arm = static_cast<std::size_t>(get_int(is));
    pending_ = Pending{arm, load_vec(is, dim_)};
  } else {
    pending_.reset();
  }
}

// --- baselines --------------------------------------------------------------

namespace {

class RandomPolicy final : public TimeoutPolicy {
public:
  RandomPolicy(RandomParams p, PolicyEnvironment env) : p_(p), env_(std::move(env)) {}
  std::string_view id() const override { return "random"; }
  Decision choose(const Observation&, RngStream& rng) override {
    return Decision{sample_in(ArmRange{p_.lo, p_.hi}, env_.min_jitter_width, rng), std::nullopt, false, std::nullopt};
  }
  bool reset() override { return false; }

protected:
  void save_state(std::ostream&) const override {}
  void load_state(std::istream&) override {}

private:
  RandomParams p_;
  PolicyEnvironment env_;
};

class StaticPolicy final : public TimeoutPolicy {
public:
  explicit StaticPolicy(PolicyEnvironment env) : env_(std::move(env)) {}
  std::string_view id() const override { return "static_conservative"; }
  Decision choose(const Observation&, RngStream& rng) override {
    return Decision{sample_in(env_.arms.safe(), env_.min_jitter_width, rng), static_cast<int>(env_.arms.safe_index()),
                    false, std::nullopt};
  }
  bool reset() override { return false; }

protected:
  void save_state(std::ostream&) const override {}
  void load_state(std::istream&) override {}

private:
  PolicyEnvironment env_;
};

/// Doubles both range ends per consecutive local failure, capped; resets on a win.
class BackoffPolicy final : public TimeoutPolicy {
public:
  BackoffPolicy(BackoffParams p, PolicyEnvironment env) : p_(p), env_(std::move(env)) {
    cap_ = p_.cap.value_or(env_.arms.safe().hi * 2);
  }
  std::string_view id() const override { return "backoff"; }
  Decision choose(const Observation&, RngStream& rng) override {
    double f = std::ldexp(1.0, std::min(failures_, 30));
    f = std::min(f, static_cast<double>(cap_.us) / static_cast<double>(p_.hi.us));
    f = std::max(f, 1.0);
    const ArmRange r{SimTime{std::llround(static_cast<double>(p_.lo.us) * f)}, SimTime{std::llround(static_cast<double>(p_.hi.us) * f)}};
    return Decision{sample_in(r, env_.min_jitter_width, rng), std::nullopt, false, std::nullopt};
  }
  PolicyEffects observe_outcome(const AttemptResult& res) override {
    if (res.outcome == AttemptOutcome::Won) failures_ = 0;
    else if (res.outcome == AttemptOutcome::Failed) ++failures_;
    return {};
  }
  bool reset() override {
    failures_ = 0;
    return false;
  }
  int failures() const { return failures_; }

protected:
  void save_state(std::ostream& os) const override { os << "failures " << failures_ << '\n'; }
  void load_state(std::istream& is) override {
    expect(is, "failures");
    failures_ = static_cast<int>(get_int(is));
  }

private:
  BackoffParams p_;
  PolicyEnvironment env_;
  SimTime cap_;
  int failures_ = 0;
};

/// Thresholds an RTT estimate (2x EWMA one-way heartbeat delay) onto the arms.
class RttHeuristicPolicy final : public TimeoutPolicy {
public:
  RttHeuristicPolicy(RttHeuristicParams p, PolicyEnvironment env) : p_(p), env_(std::move(env)), delay_(p.ewma_alpha) {}
  std::string_view id() const override { return "rtt_heuristic"; }
  Decision choose(const Observation&, RngStream& rng) override {
    const int arm = delay_.seen() ? threshold_arm(2.0 * delay_.mean(), p_.thr_lo_ms, p_.thr_hi_ms, env_.arms.size())
                                  : static_cast<int>(std::min<std::size_t>(1, env_.arms.size() - 1));
    return Decision{sample_in(env_.arms[static_cast<std::size_t>(arm)], env_.min_jitter_width, rng), arm, false, std::nullopt};
  }
  void observe_heartbeat(const HeartbeatSample& hb) override { delay_.observe(hb.one_way_delay_ms); }
  bool reset() override {
    delay_.reset();
    return false;
  }

protected:
  void save_state(std::ostream& os) const override { save_ewma(os, delay_); }
  void load_state(std::istream& is) override { load_ewma(is, delay_); }

private:
  RttHeuristicParams p_;
  PolicyEnvironment env_;
  Ewma delay_;
};

/// Accrual suspicion from a normal inter-arrival model, thresholded onto the arms.
class PhiAccrualPolicy final : public TimeoutPolicy {
public:
  PhiAccrualPolicy(PhiAccrualParams p, PolicyEnvironment env) : p_(p), env_(std::move(env)), gaps_(p.ewma_alpha) {}
  std::string_view id() const override { return "phi_accrual"; }
  Decision choose(const Observation& obs, RngStream& rng) override {
    int arm = static_cast<int>(std::min<std::size_t>(1, env_.arms.size() - 1));
    if (gaps_.seen()) {
      const double phi = phi_value(obs.since_last_hb_ms, gaps_.mean(), std::max(gaps_.stddev(), p_.min_std_ms));
      arm = threshold_arm(phi, p_.phi_lo, p_.phi_hi, env_.arms.size());
    }
    return Decision{sample_in(env_.arms[static_cast<std::size_t>(arm)], env_.min_jitter_width, rng), arm, false, std::nullopt};
  }
  void observe_heartbeat(const HeartbeatSample& hb) override {
    if (hb.interarrival_ms) gaps_.observe(*hb.interarrival_ms);
  }
  bool reset() override {
    gaps_.reset();
    return false;
  }

protected:
  void save_state(std::ostream& os) const override { save_ewma(os, gaps_); }
  void load_state(std::istream& is) override { load_ewma(is, gaps_); }

private:
  PhiAccrualParams p_;
  PolicyEnvironment env_;
  Ewma gaps_;
};

class QuantileDecayPolicy final : public TimeoutPolicy {
public:
  QuantileDecayPolicy(QuantileDecayParams p, PolicyEnvironment env)
      : p_(p), env_(std::move(env)), q_(p.p, p.decay) {}
  std::string_view id() const override { return "quantile_decay"; }
  Decision choose(const Observation&, RngStream& rng) override {
    ArmRange r = env_.arms[std::min<std::size_t>(1, env_.arms.size() - 1)];
    if (auto q = q_.estimate()) r = ArmRange{SimTime::from_ms_f(p_.mult_lo * *q), SimTime::from_ms_f(p_.mult_hi * *q)};
    return Decision{sample_in(r, env_.min_jitter_width, rng), std::nullopt, false, std::nullopt};
  }
  void observe_heartbeat(const HeartbeatSample& hb) override { q_.observe(hb.one_way_delay_ms); }
  bool reset() override {
    q_.reset();
    return false;
  }

protected:
  void save_state(std::ostream& os) const override { save_quantile(os, q_); }
  void load_state(std::istream& is) override { load_quantile(is, q_); }

private:
  QuantileDecayParams p_;
  PolicyEnvironment env_;
  QuantileEstimator q_;
};

/// RTT-style timeout from one-way heartbeat delays; the joint variant also
/// moves the heartbeat cadence. Deadlines are drawn from [T, 2T).
class DynatunePolicy final : public TimeoutPolicy {
public:
  DynatunePolicy(DynatuneParams p, PolicyEnvironment env) : p_(p), env_(std::move(env)), delay_(p.ewma_alpha) {}
  std::string_view id() const override { return p_.joint ? "dynatune_joint" : "dynatune_et"; }
  Decision choose(const Observation& obs, RngStream& rng) override {
    Decision d;
    double t_ms;
    if (!delay_.seen()) {
      t_ms = dynatune_et_timeout_ms(0.0, obs.heartbeat_interval.ms(), p_);
    } else {
      const double rtt = p_.oneway_factor * delay_.mean();
      if (p_.joint) {
        const JointSetting js = dynatune_joint_adjust(rtt, p_);
        t_ms = js.timeout_ms;
        d.heartbeat_interval = SimTime::from_ms_f(js.heartbeat_ms);
      } else {
        t_ms = dynatune_et_timeout_ms(rtt, obs.heartbeat_interval.ms(), p_);
      }
    }
    const SimTime t = SimTime::from_ms_f(t_ms);
    d.timeout = sample_in(ArmRange{t, t * 2}, env_.min_jitter_width, rng);
    return d;
  }
  void observe_heartbeat(const HeartbeatSample& hb) override { delay_.observe(hb.one_way_delay_ms); }
  bool reset() override {
    delay_.reset();
    return false;
  }

protected:
  void save_state(std::ostream& os) const override { save_ewma(os, delay_); }
  void load_state(std::istream& is) override { load_ewma(is, delay_); }

private:
  DynatuneParams p_;
  PolicyEnvironment env_;
  Ewma delay_;
};

/// Privileged baseline: reads the injected regime id and applies a fixed map.
class OraclePolicy final : public TimeoutPolicy {
public:
  OraclePolicy(std::string id, OracleParams p, PolicyEnvironment env) : id_(std::move(id)), p_(std::move(p)), env_(std::move(env)) {
    for (const auto& [reg, arm] : p_.mapping) {
      if (arm < 0 || static_cast<std::size_t>(arm) >= env_.arms.size()) {
        throw std::invalid_argument(id_ + ": regime " + std::to_string(reg) + " maps to missing arm A" + std::to_string(arm + 1));
      }
    }
  }
  std::string_view id() const override { return id_; }
  Decision choose(const Observation& obs, RngStream& rng) override {
    auto it = p_.mapping.find(obs.regime);
    if (it == p_.mapping.end()) throw std::invalid_argument(id_ + ": regime " + std::to_string(obs.regime) + " is not mapped");
    const auto arm = static_cast<std::size_t>(it->second);
    return Decision{sample_in(env_.arms[arm], env_.min_jitter_width, rng), it->second, false, std::nullopt};
  }
  bool reset() override { return false; }

protected:
  void save_state(std::ostream&) const override {}
  void load_state(std::istream&) override {}

private:
  std::string id_;
  OracleParams p_;
  PolicyEnvironment env_;
};

} // namespace

std::unique_ptr<TimeoutPolicy> make_policy(const PolicySpec& spec, const PolicyEnvironment& env) {
  std::vector<std::string> errs;
  if (!is_known_policy(spec.id)) throw std::invalid_argument("unknown policy id '" + spec.id + "'");
  if (is_bandit(spec.id)) {
    auto [p, o] = read_bandit(spec, errs, "policy.params");
    if (!errs.empty()) throw std::invalid_argument(errs.front());
    PolicyEnvironment e = env;
    if (o.arm_set) e.arms = ArmSet::named(*o.arm_set);
    if (o.min_jitter_ms) e.min_jitter_width = std::max(e.min_jitter_width, SimTime::from_ms_f(*o.min_jitter_ms));
    return std::make_unique<BanditPolicy>(spec.id, std::move(p), std::move(e));
  }
  ParsedBaseline b = read_baseline(spec, errs, "policy.params");
  if (!errs.empty()) throw std::invalid_argument(errs.front());
  const std::string& id = spec.id;
  if (id == "random") return std::make_unique<RandomPolicy>(b.random, env);
  if (id == "static_conservative") return std::make_unique<StaticPolicy>(env);
  if (id == "backoff") return std::make_unique<BackoffPolicy>(b.backoff, env);
  if (id == "rtt_heuristic") return std::make_unique<RttHeuristicPolicy>(b.rtt, env);
  if (id == "phi_accrual") return std::make_unique<PhiAccrualPolicy>(b.phi, env);
  if (id == "quantile_decay") return std::make_unique<QuantileDecayPolicy>(b.quantile, env);
  if (id == "dynatune_et" || id == "dynatune_joint") return std::make_unique<DynatunePolicy>(b.dynatune, env);
  return std::make_unique<OraclePolicy>(id, b.oracle, env);
}

const std::vector<RewardRecord>* reward_log(const TimeoutPolicy& p) {
  if (auto* b = dynamic_cast<const BanditPolicy*>(&p)) return &b->rewards();
  return nullptr;
}

} // namespace raftsim
