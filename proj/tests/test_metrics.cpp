#include <doctest.h>

#include <cmath>

#include "raftsim/cluster.hpp"
#include "raftsim/config.hpp"
#include "raftsim/metrics.hpp"
#include "metric_oracles.hpp"

using namespace raftsim;

namespace {

ProtocolEvent ev(double ms, int node, EventType kind) {
  ProtocolEvent e;
  e.time = SimTime::from_ms_f(ms);
  e.node = node;
  e.kind = kind;
  return e;
}

ProtocolEvent hb_recv(double ms, int node, int leader) {
  ProtocolEvent e = ev(ms, node, EventType::HeartbeatReceived);
  e.peer = leader;
  return e;
}

ProtocolEvent with_term(ProtocolEvent e, std::int64_t term, std::optional<int> peer = std::nullopt) {
  e.term = term;
  e.peer = peer;
  return e;
}

// Leader `l` heartbeats every 50 ms in [from, to); every other node in `who` hears it 5 ms later.
void heartbeats(std::vector<ProtocolEvent>& out, int l, const std::vector<int>& who, double from, double to) {
  for (double t = from; t < to; t += 50) {
    out.push_back(ev(t, l, EventType::HeartbeatSent));
    for (int i : who)
      if (i != l) out.push_back(hb_recv(t + 5, i, l));
  }
}

void sort_events(std::vector<ProtocolEvent>& v) {
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
}

} // namespace

TEST_CASE("grace window") {
  CHECK(grace_window(SimTime::from_ms(50), SimTime::from_ms(10)) == SimTime::from_ms(150));
  CHECK(grace_window(SimTime::from_ms(10), SimTime::from_ms(40)) == SimTime::from_ms(80));
  CHECK(load_scenario("main-hard-wan").grace_window() == SimTime::from_ms(150));
}

TEST_CASE("writability matches the brute-force per-tick oracle") {
  RngStream rng(2024);
  for (int rep = 0; rep < 300; ++rep) {
    MetricParams p;
    p.nodes = static_cast<int>(rng.uniform_int(1, 5));
    p.horizon = SimTime::from_ms(rng.uniform_int(50, 2000) + (rng.bernoulli(0.3) ? 3 : 0));
    p.tick = SimTime::from_ms(10);
    p.grace = SimTime::from_ms(rng.bernoulli(0.5) ? 150 : 40);
    const auto events = oracle::synthetic_trace(rng, p.nodes, p.horizon, 200);
    const auto tl = compute_writability(events, p);
    REQUIRE(tl.writable == oracle::writability(events, p));
    SimTime sum{};
    for (const auto& i : tl.unwritable) sum += i.duration();
    REQUIRE(sum == tl.unwritable_time());
    REQUIRE(tl.unwritable_fraction() == doctest::Approx(1.0 - tl.writable_fraction()));
  }
}

TEST_CASE("writability: steady state, leader crash and lost majority") {
  MetricParams p;
  p.horizon = SimTime::from_ms(2000);
  std::vector<ProtocolEvent> e;
  SUBCASE("healthy") {
    heartbeats(e, 0, {0, 1, 2, 3, 4}, 0, 2000);
    sort_events(e);
    const auto tl = compute_writability(e, p);
    // tick 0 precedes the first delivery
    REQUIRE(tl.unwritable.size() == 1);
    CHECK(tl.unwritable[0] == Interval{SimTime{}, SimTime::from_ms(10)});
  }
  SUBCASE("leader crash then a new leader") {
    heartbeats(e, 0, {0, 1, 2, 3, 4}, 0, 500);  // last heartbeat 450, heard at 455
    e.push_back(ev(470, 0, EventType::NodeCrashed));
    heartbeats(e, 1, {1, 2, 3, 4}, 900, 2000);  // followers hear at 905
    sort_events(e);
    const auto tl = compute_writability(e, p);
    REQUIRE(tl.unwritable.size() == 2);
    // followers' last heard 455 expires after 605; first tick after is 610.
    // New majority at 905 -> first writable tick 910.
    CHECK(tl.unwritable[1] == Interval{SimTime::from_ms(610), SimTime::from_ms(910)});
    CHECK(recovery_stats(tl).max == doctest::Approx(300));
  }
  SUBCASE("only two of five alive") {
    heartbeats(e, 0, {0, 1, 2, 3, 4}, 0, 2000);
    e.push_back(ev(0, 2, EventType::NodeCrashed));
    e.push_back(ev(0, 3, EventType::NodeCrashed));
    e.push_back(ev(0, 4, EventType::NodeCrashed));
    sort_events(e);
    const auto tl = compute_writability(e, p);
    CHECK(tl.unwritable_fraction() == 1.0);
    REQUIRE(tl.unwritable.size() == 1);
    CHECK(tl.unwritable[0].end == p.horizon);  // truncated at the horizon
  }
}

TEST_CASE("nearest-rank recovery statistics") {
  const auto s = distribution({100, 300, 500});
  CHECK(s.mean == 300);
  CHECK(s.max == 500);
  CHECK(s.p50 == 300);
  CHECK(s.p95 == 500);
  const auto one = distribution({42});
  CHECK(one.mean == 42);
  CHECK(one.p95 == 42);
  CHECK(one.p99 == 42);
  CHECK(one.max == 42);
  const auto none = distribution({});
  CHECK(none.empty);
  CHECK(none.mean == 0);
  std::vector<double> hundred;
  for (int i = 1; i <= 100; ++i) hundred.push_back(i);
  CHECK(nearest_rank(hundred, 0.95) == 95);
  CHECK(nearest_rank(hundred, 0.99) == 99);
  CHECK(nearest_rank(hundred, 0.951) == 96);
}

TEST_CASE("split-vote rate") {
  std::vector<ProtocolEvent> e{with_term(ev(10, 0, EventType::ElectionFailed), 1),
                               with_term(ev(20, 1, EventType::LeaderElected), 2),
                               with_term(ev(30, 2, EventType::LeaderElected), 3)};
  CHECK(split_vote_rate(e).rate == doctest::Approx(1.0 / 3));
  e.resize(1);
  CHECK(split_vote_rate(e).rate == 1.0);
  const SplitVote none = split_vote_rate({});
  CHECK(none.no_attempts);
  CHECK(none.rate == 0.0);
}

TEST_CASE("failure breakdown") {
  std::vector<ProtocolEvent> e;
  SUBCASE("no quorum") {
    for (int i = 2; i < 5; ++i) e.push_back(ev(0, i, EventType::NodeCrashed));
    e.push_back(with_term(ev(100, 0, EventType::RequestVoteReceived), 1, 1));
    e.push_back(with_term(ev(300, 1, EventType::ElectionFailed), 1));
    const auto b = failure_breakdown(e, 5);
    CHECK(b.no_quorum == 1);
    CHECK(b.fraction(b.no_quorum) == 1.0);
  }
  SUBCASE("low reach") {
    e.push_back(with_term(ev(100, 3, EventType::RequestVoteReceived), 4, 1));
    e.push_back(with_term(ev(300, 1, EventType::ElectionFailed), 4));
    CHECK(failure_breakdown(e, 5).low_reach == 1);
  }
  SUBCASE("two candidates split the vote") {
    // term 7: node 0 and node 1 both stand; each reaches three peers, each
    // wins one vote, neither gets three.
    for (int peer : {1, 2, 3}) e.push_back(with_term(ev(100, peer, EventType::RequestVoteReceived), 7, 0));
    for (int peer : {0, 3, 4}) e.push_back(with_term(ev(101, peer, EventType::RequestVoteReceived), 7, 1));
    e.push_back(with_term(ev(100, 2, EventType::VoteGranted), 7, 0));
    e.push_back(with_term(ev(101, 4, EventType::VoteGranted), 7, 1));
    e.push_back(with_term(ev(400, 0, EventType::ElectionFailed), 7));
    e.push_back(with_term(ev(420, 1, EventType::ElectionFailed), 7));
    sort_events(e);
    const auto b = failure_breakdown(e, 5);
    CHECK(b.contention == 2);
    CHECK(b.total() == 2);
    CHECK(b.fraction(b.contention) == 1.0);
  }
}

TEST_CASE("safety overlap") {
  const SimTime H = SimTime::from_sec(60);
  SUBCASE("single episode") {
    std::vector<ProtocolEvent> e{ev(1000, 0, EventType::SafetyEnter), ev(6000, 0, EventType::SafetyExit)};
    const auto s = safety_overlap(e, H);
    CHECK(s.episodes == 1);
    CHECK(s.mean_duration_ms == 5000);
    CHECK(s.overlap2 == 0);
  }
  SUBCASE("two overlapping for 10 s") {
    std::vector<ProtocolEvent> e{ev(0, 0, EventType::SafetyEnter), ev(5000, 1, EventType::SafetyEnter),
                                 ev(15000, 0, EventType::SafetyExit), ev(20000, 1, EventType::SafetyExit)};
    CHECK(safety_overlap(e, H).overlap2 == doctest::Approx(1.0 / 6));
  }
  SUBCASE("three nested and one open at the horizon") {
    std::vector<ProtocolEvent> e{ev(0, 0, EventType::SafetyEnter), ev(1000, 1, EventType::SafetyEnter),
                                 ev(2000, 2, EventType::SafetyEnter), ev(3000, 2, EventType::SafetyExit),
                                 ev(4000, 1, EventType::SafetyExit), ev(5000, 0, EventType::SafetyExit),
                                 ev(59000, 3, EventType::SafetyEnter)};
    const auto s = safety_overlap(e, H);
    CHECK(s.overlap3 == doctest::Approx(1000.0 / 60000));
    CHECK(s.overlap2 == doctest::Approx(3000.0 / 60000));
    CHECK(s.unmatched == 1);
    CHECK(s.episodes == 4);
  }
  SUBCASE("sweep line matches a per-millisecond count") {
    RngStream rng(6);
    for (int rep = 0; rep < 100; ++rep) {
      const SimTime h = SimTime::from_ms(2000);
      std::vector<ProtocolEvent> e;
      for (int node = 0; node < 5; ++node) {
        std::int64_t t = rng.uniform_int(0, 300);
        while (t < 2000) {
          e.push_back(ev(static_cast<double>(t), node, EventType::SafetyEnter));
          t += rng.uniform_int(1, 400);
          if (t >= 2000 && rng.bernoulli(0.5)) break;
          e.push_back(ev(static_cast<double>(std::min<std::int64_t>(t, 2000)), node, EventType::SafetyExit));
          t += rng.uniform_int(1, 400);
        }
      }
      sort_events(e);
      std::vector<int> depth(2000, 0);
      std::map<int, std::int64_t> open;
      for (const auto& x : e) {
        const auto ms = static_cast<std::int64_t>(x.time.ms());
        if (x.kind == EventType::SafetyEnter) open[*x.node] = ms;
        else {
          for (auto k = open[*x.node]; k < ms; ++k) ++depth[static_cast<std::size_t>(k)];
          open.erase(*x.node);
        }
      }
      for (auto [_, s] : open)
        for (auto k = s; k < 2000; ++k) ++depth[static_cast<std::size_t>(k)];
      const double o2 = static_cast<double>(std::count_if(depth.begin(), depth.end(), [](int d) { return d >= 2; })) / 2000;
      const double o3 = static_cast<double>(std::count_if(depth.begin(), depth.end(), [](int d) { return d >= 3; })) / 2000;
      const auto s = safety_overlap(e, h);
      REQUIRE(s.overlap2 == doctest::Approx(o2).epsilon(1e-12));
      REQUIRE(s.overlap3 == doctest::Approx(o3).epsilon(1e-12));
    }
  }
}

TEST_CASE("bootstrap confidence intervals") {
  const auto same = bootstrap_ci({2.5, 2.5, 2.5, 2.5}, 0.95, 1000, 1);
  CHECK(same.lo == 2.5);
  CHECK(same.hi == 2.5);
  const auto single = bootstrap_ci({7.0});
  CHECK(single.point == 7.0);
  CHECK(single.lo == 7.0);
  CHECK(single.hi == 7.0);
  std::vector<double> v{1, 2, 3, 4, 10};
  const auto a = bootstrap_ci(v, 0.95, 2000, 3), b = bootstrap_ci(v, 0.95, 2000, 3);
  CHECK(a.lo == b.lo);
  CHECK(a.hi == b.hi);
  CHECK(a.point == 4.0);
  CHECK(a.lo <= a.point);
  CHECK(a.hi >= a.point);
  CHECK_THROWS(bootstrap_ci({}));
  CHECK_THROWS(bootstrap_ci(v, 1.0));
}

TEST_CASE("metrics are a pure function of the trace bytes") {
  const ScenarioConfig cfg = load_scenario("main-hard-wan");
  const Trace t = simulate(cfg, 1);
  const Trace back = Trace::parse(t.serialize());
  MetricParams p{cfg.nodes, cfg.horizon, cfg.tick, cfg.grace_window()};
  CHECK(to_json(summarize(t.events(), p)).dump() == to_json(summarize(back.events(), p)).dump());
  const auto s = summarize(t.events(), p);
  const auto& f = s.failures;
  if (f.total()) CHECK(f.fraction(f.no_quorum) + f.fraction(f.low_reach) + f.fraction(f.contention) == doctest::Approx(1.0));
  CHECK(s.term_churn > 0);
}
