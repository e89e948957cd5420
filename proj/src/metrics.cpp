#include "raftsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>

#include "raftsim/rng.hpp"

namespace raftsim {

SimTime WritabilityTimeline::unwritable_time() const {
  SimTime total{};
  for (const auto& i : unwritable) total += i.duration();
  return total;
}

double WritabilityTimeline::unwritable_fraction() const {
  return horizon.us > 0 ? static_cast<double>(unwritable_time().us) / static_cast<double>(horizon.us) : 0.0;
}

WritabilityTimeline compute_writability(const std::vector<ProtocolEvent>& events, const MetricParams& p) {
  if (p.tick.us <= 0) throw std::invalid_argument("compute_writability: tick must be positive");
  const auto n = static_cast<std::size_t>(p.nodes);
  const int majority = p.nodes / 2 + 1;
  constexpr std::int64_t kNever = INT64_MIN;

  std::vector<bool> alive(n, true);
  std::vector<std::int64_t> heard(n * n, kNever);  // heard[i*n + leader]
  std::vector<std::int64_t> sent(n, kNever);

  WritabilityTimeline out;
  out.tick = p.tick;
  out.horizon = p.horizon;
  const std::int64_t samples = (p.horizon.us + p.tick.us - 1) / p.tick.us;
  out.writable.reserve(static_cast<std::size_t>(samples));

  std::size_t e = 0;
  for (std::int64_t k = 0; k < samples; ++k) {
    const std::int64_t t = k * p.tick.us;
    for (; e < events.size() && events[e].time.us <= t; ++e) {
      const ProtocolEvent& ev = events[e];
      if (!ev.node) continue;
      const auto i = static_cast<std::size_t>(*ev.node);
      if (i >= n) continue;
      switch (ev.kind) {
        case EventType::HeartbeatReceived:
          if (ev.peer && static_cast<std::size_t>(*ev.peer) < n) heard[i * n + static_cast<std::size_t>(*ev.peer)] = ev.time.us;
          break;
        case EventType::HeartbeatSent: sent[i] = ev.time.us; break;
        case EventType::NodeCrashed:
          alive[i] = false;
          std::fill(heard.begin() + static_cast<std::ptrdiff_t>(i * n), heard.begin() + static_cast<std::ptrdiff_t>((i + 1) * n), kNever);
          sent[i] = kNever;
          break;
        case EventType::NodeRestarted: alive[i] = true; break;
        default: break;
      }
    }
    const std::int64_t from = t - p.grace.us;
    bool ok = false;
    for (std::size_t l = 0; l < n && !ok; ++l) {
      int c = (alive[l] && sent[l] != kNever && sent[l] >= from) ? 1 : 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (i != l && alive[i] && heard[i * n + l] != kNever && heard[i * n + l] >= from) ++c;
      }
      ok = c >= majority;
    }
    out.writable.push_back(ok);
  }

  for (std::size_t k = 0; k < out.writable.size();) {
    if (out.writable[k]) {
      ++k;
      continue;
    }
    std::size_t j = k;
    while (j < out.writable.size() && !out.writable[j]) ++j;
    const SimTime start{static_cast<std::int64_t>(k) * p.tick.us};
    const SimTime end{std::min(static_cast<std::int64_t>(j) * p.tick.us, p.horizon.us)};
    out.unwritable.push_back(Interval{start, end});
    k = j;
  }
  return out;
}

double nearest_rank(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size()) - 1e-12));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

DistributionStats distribution(std::vector<double> values) {
  DistributionStats s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.empty = false;
  s.count = values.size();
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  s.p50 = nearest_rank(values, 0.50);
  s.p95 = nearest_rank(values, 0.95);
  s.p99 = nearest_rank(values, 0.99);
  s.max = values.back();
  return s;
}

DistributionStats recovery_stats(const WritabilityTimeline& t) {
  std::vector<double> d;
  d.reserve(t.unwritable.size());
  for (const auto& i : t.unwritable) d.push_back(i.duration().ms());
  return distribution(std::move(d));
}

SplitVote split_vote_rate(const std::vector<ProtocolEvent>& events) {
  SplitVote s;
  for (const auto& ev : events) {
    if (ev.kind == EventType::ElectionFailed) ++s.failed;
    else if (ev.kind == EventType::LeaderElected) ++s.elected;
  }
  const std::size_t total = s.failed + s.elected;
  s.no_attempts = total == 0;
  s.rate = total ? static_cast<double>(s.failed) / static_cast<double>(total) : 0.0;
  return s;
}

FailureBreakdown failure_breakdown(const std::vector<ProtocolEvent>& events, int nodes) {
  FailureBreakdown b;
  const int majority = nodes / 2 + 1;
  std::vector<bool> alive(static_cast<std::size_t>(nodes), true);
  // (candidate, term) -> peers that logged the RequestVote
  std::map<std::pair<int, std::int64_t>, std::set<int>> reach;
  for (const auto& ev : events) {
    switch (ev.kind) {
      case EventType::NodeCrashed: alive[static_cast<std::size_t>(*ev.node)] = false; break;
      case EventType::NodeRestarted: alive[static_cast<std::size_t>(*ev.node)] = true; break;
      case EventType::RequestVoteReceived:
        if (ev.peer && ev.term && ev.node) reach[{*ev.peer, *ev.term}].insert(*ev.node);
        break;
      case EventType::ElectionFailed: {
        const auto up = std::count(alive.begin(), alive.end(), true);
        if (up < majority) {
          ++b.no_quorum;
          break;
        }
        const auto it = reach.find({ev.node.value_or(-1), ev.term.value_or(-1)});
        const std::size_t got = it == reach.end() ? 0 : it->second.size();
        if (static_cast<int>(got) < majority - 1) ++b.low_reach;
        else ++b.contention;
        break;
      }
      default: break;
    }
  }
  return b;
}

SafetyOverlap safety_overlap(const std::vector<ProtocolEvent>& events, SimTime horizon) {
  SafetyOverlap s;
  std::map<int, SimTime> open;
  std::vector<Interval> eps;
  for (const auto& ev : events) {
    if (!ev.node) continue;
    if (ev.kind == EventType::SafetyEnter) {
      open.emplace(*ev.node, ev.time);
    } else if (ev.kind == EventType::SafetyExit) {
      auto it = open.find(*ev.node);
      if (it == open.end()) continue;
      eps.push_back(Interval{it->second, std::min(ev.time, horizon)});
      open.erase(it);
    }
  }
  for (const auto& [_, start] : open) {
    eps.push_back(Interval{start, horizon});
    ++s.unmatched;
  }
  s.episodes = eps.size();
  if (eps.empty() || horizon.us <= 0) return s;
  double total = 0.0;
  std::vector<std::pair<std::int64_t, int>> edges;
  for (const auto& e : eps) {
    total += e.duration().ms();
    edges.emplace_back(e.start.us, +1);
    edges.emplace_back(e.end.us, -1);
  }
  s.mean_duration_ms = total / static_cast<double>(eps.size());
  std::sort(edges.begin(), edges.end());
  std::int64_t at2 = 0, at3 = 0;
  int depth = 0;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    depth += edges[i].second;
    if (i + 1 < edges.size()) {
      const std::int64_t span = edges[i + 1].first - edges[i].first;
      if (depth >= 2) at2 += span;
      if (depth >= 3) at3 += span;
    }
  }
  s.overlap2 = static_cast<double>(at2) / static_cast<double>(horizon.us);
  s.overlap3 = static_cast<double>(at3) / static_cast<double>(horizon.us);
  return s;
}

double term_churn(const std::vector<ProtocolEvent>& events, SimTime horizon) {
  std::int64_t max_term = 0;
  for (const auto& ev : events) {
    if (ev.term) max_term = std::max(max_term, *ev.term);
  }
  const double minutes = horizon.sec() / 60.0;
  return minutes > 0 ? static_cast<double>(max_term) / minutes : 0.0;
}

std::vector<double> time_to_leader(const std::vector<ProtocolEvent>& events) {
  std::vector<double> out;
  for (const auto& ev : events) {
    if (ev.kind == EventType::LeaderElected && ev.latency) out.push_back(ev.latency->ms());
  }
  return out;
}

MetricsSummary summarize(const std::vector<ProtocolEvent>& events, const MetricParams& p) {
  MetricsSummary s;
  const WritabilityTimeline tl = compute_writability(events, p);
  s.recovery = recovery_stats(tl);
  s.unwritable_fraction = tl.unwritable_fraction();
  s.split_vote = split_vote_rate(events);
  const auto ttl = time_to_leader(events);
  s.leaders_elected = ttl.size();
  s.time_to_leader = distribution(ttl);
  s.failures = failure_breakdown(events, p.nodes);
  s.safety = safety_overlap(events, p.horizon);
  s.term_churn = term_churn(events, p.horizon);
  return s;
}

namespace {

nlohmann::json dist_json(const DistributionStats& d) {
  return {{"count", d.count}, {"mean", d.mean}, {"p50", d.p50}, {"p95", d.p95}, {"p99", d.p99}, {"max", d.max}, {"empty", d.empty}};
}

} // namespace

nlohmann::json to_json(const MetricsSummary& s) {
  return {
      {"recovery_ms", dist_json(s.recovery)},
      {"unwritable_fraction", s.unwritable_fraction},
      {"split_vote", {{"rate", s.split_vote.rate}, {"failed", s.split_vote.failed}, {"elected", s.split_vote.elected}, {"no_attempts", s.split_vote.no_attempts}}},
      {"time_to_leader_ms", dist_json(s.time_to_leader)},
      {"failure_causes",
       {{"no_quorum", s.failures.fraction(s.failures.no_quorum)},
        {"low_reach", s.failures.fraction(s.failures.low_reach)},
        {"contention", s.failures.fraction(s.failures.contention)},
        {"failed_elections", s.failures.total()}}},
      {"safety",
       {{"episodes", s.safety.episodes},
        {"mean_duration_ms", s.safety.mean_duration_ms},
        {"overlap_ge2", s.safety.overlap2},
        {"overlap_ge3", s.safety.overlap3},
        {"unmatched", s.safety.unmatched}}},
      {"term_churn_per_min", s.term_churn},
      {"leaders_elected", s.leaders_elected},
  };
}

ConfidenceInterval bootstrap_ci(const std::vector<double>& values, double level, std::size_t resamples, std::uint64_t seed) {
  if (values.empty()) throw std::invalid_argument("bootstrap_ci: no values");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("bootstrap_ci: level must be in (0, 1)");
  if (resamples == 0) throw std::invalid_argument("bootstrap_ci: resamples must be positive");
  ConfidenceInterval ci;
  const double n = static_cast<double>(values.size());
  ci.point = std::accumulate(values.begin(), values.end(), 0.0) / n;
  RngStream rng(seed, "bootstrap");
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[rng.index(values.size())];
    m = s / n;
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - level) / 2.0;
  const auto B = static_cast<double>(resamples);
  const auto lo = static_cast<std::size_t>(std::floor(tail * B));
  const auto hi = static_cast<std::size_t>(std::ceil((1.0 - tail) * B)) - 1;
  ci.lo = means[std::min(lo, resamples - 1)];
  ci.hi = means[std::min(hi, resamples - 1)];
  return ci;
}

} // namespace raftsim
