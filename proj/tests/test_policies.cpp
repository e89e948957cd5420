#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>
#include <map>

#include "raftsim/policy/bandit_policy.hpp"
#include "raftsim/policy/linear_bandit.hpp"
#include "raftsim/policy/policy.hpp"

using namespace raftsim;
using Arm = bandit::LinearArm<double>;
using nlohmann::json;

namespace {

std::unique_ptr<TimeoutPolicy> policy(const std::string& id, json params = json::object(), PolicyEnvironment env = {}) {
  return make_policy(PolicySpec{id, std::move(params)}, env);
}

Observation obs(DecisionReason reason = DecisionReason::Candidacy) {
  Observation o;
  o.reason = reason;
  o.hb_mean_ms = 50;
  o.hb_std_ms = 5;
  o.since_last_hb_ms = 20;
  return o;
}

Eigen::VectorXd random_x(RngStream& rng, Eigen::Index d) {
  Eigen::VectorXd x(d);
  x[0] = 1.0;
  for (Eigen::Index i = 1; i < d; ++i) x[i] = rng.uniform(-2.0, 2.0);
  return x;
}

// Ridge solution from the stacked system [X; sqrt(lambda) I] theta = [r; 0].
Eigen::VectorXd ridge_oracle(const std::vector<Eigen::VectorXd>& xs, const std::vector<double>& rs, double lambda, Eigen::Index d) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n + d, d);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n + d);
  for (Eigen::Index i = 0; i < n; ++i) {
    M.row(i) = xs[static_cast<std::size_t>(i)].transpose();
    y[i] = rs[static_cast<std::size_t>(i)];
  }
  M.bottomRows(d) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(d, d);
  return M.colPivHouseholderQr().solve(y);
}

double phi_inverse(double phi, double mean, double sd) {
  double lo = mean, hi = mean + 20 * sd;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (phi_value(mid, mean, sd) < phi ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

} // namespace

TEST_CASE("LinUCB: fresh arms tie and resolve to the first index") {
  std::vector<Arm> arms(3, Arm(4, 1.0));
  RngStream rng(1);
  for (int i = 0; i < 50; ++i) CHECK(bandit::linucb_choose(arms, random_x(rng, 4), 1.0) == 0);
}

TEST_CASE("LinUCB: hand-computed 2x2 example") {
  std::vector<Arm> arms(2, Arm(2, 1.0));
  Eigen::Vector2d x(1, 1);
  arms[0].update(x, 1.0);
  CHECK(arms[0].A()(0, 1) == 1.0);
  CHECK(arms[0].theta()[0] == doctest::Approx(1.0 / 3));
  const auto s = bandit::ucb_scores(arms, x, 1.0);
  CHECK(s[0] == doctest::Approx(2.0 / 3 + std::sqrt(2.0 / 3)).epsilon(1e-12));
  CHECK(s[1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(s[0] == doctest::Approx(1.483).epsilon(1e-3));
  CHECK(bandit::linucb_choose(arms, x, 1.0) == 0);
}

TEST_CASE("ridge oracle, update isolation and forgetting degeneracy on random replays") {
  RngStream rng(7);
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index d = rng.uniform_int(2, 6);
    const auto k = static_cast<std::size_t>(rng.uniform_int(3, 7));
    const int steps = static_cast<int>(rng.uniform_int(1, 80));
    const double lambda = rng.uniform(0.5, 2.0);
    std::vector<Arm> plain(k, Arm(d, lambda)), disc1(k, Arm(d, lambda)), win(k, Arm(d, lambda));
    std::vector<std::vector<Eigen::VectorXd>> xs(k);
    std::vector<std::vector<double>> rs(k);
    for (int s = 0; s < steps; ++s) {
      const Eigen::VectorXd x = random_x(rng, d);
      REQUIRE(bandit::linucb_choose(plain, x, 1.0) == bandit::linucb_choose(disc1, x, 1.0));
      REQUIRE(bandit::linucb_choose(plain, x, 1.0) == bandit::linucb_choose(win, x, 1.0));
      const auto a = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(k) - 1));
      const double r = rng.uniform(-3.5, 1.0);
      std::vector<Arm> before = plain;
      plain[a].update(x, r);
      disc1[a].discounted_update(x, r, 1.0);
      win[a].windowed_update(x, r, 1000);
      xs[a].push_back(x);
      rs[a].push_back(r);
      for (std::size_t o = 0; o < k; ++o) {
        if (o == a) continue;
        REQUIRE(plain[o].A() == before[o].A());
        REQUIRE(plain[o].b() == before[o].b());
      }
    }
    for (std::size_t a = 0; a < k; ++a) {
      const Eigen::VectorXd oracle = ridge_oracle(xs[a], rs[a], lambda, d);
      REQUIRE((plain[a].theta() - oracle).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("sliding window matches a from-scratch recomputation") {
  RngStream rng(11);
  const Eigen::Index d = 5;
  Arm arm(d, 1.0);
  std::vector<Eigen::VectorXd> xs;
  std::vector<double> rs;
  for (int s = 0; s < 350; ++s) {
    const Eigen::VectorXd x = random_x(rng, d);
    const double r = rng.uniform(-2, 1);
    arm.windowed_update(x, r, 100);
    xs.push_back(x);
    rs.push_back(r);
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    for (std::size_t i = xs.size() > 100 ? xs.size() - 100 : 0; i < xs.size(); ++i) {
      A += xs[i] * xs[i].transpose();
      b += rs[i] * xs[i];
    }
    REQUIRE((arm.A() - A).cwiseAbs().maxCoeff() < 1e-9);
    REQUIRE((arm.b() - b).cwiseAbs().maxCoeff() < 1e-9);
  }
  Arm one(d, 1.0);
  for (int s = 0; s < 5; ++s) one.windowed_update(random_x(rng, d), 0.5, 1);
  const Eigen::VectorXd x = random_x(rng, d);
  one.windowed_update(x, -1.0, 1);
  Arm fresh(d, 1.0);
  fresh.update(x, -1.0);
  CHECK((one.A() - fresh.A()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(one.history().size() == 1);
  CHECK_THROWS(one.windowed_update(x, 0.0, 0));
}

TEST_CASE("discounting restores the ridge prior") {
  const double lambda = 1.5;
  Arm arm(3, lambda);
  arm.update(Eigen::Vector3d(1, 2, 3), 1.0);
  for (int i = 0; i < 200; ++i) arm.discounted_update(Eigen::Vector3d::Zero(), 0.0, 0.98);
  const double residual = std::pow(0.98, 200);
  const Eigen::MatrixXd prior = lambda * Eigen::MatrixXd::Identity(3, 3);
  CHECK((arm.A() - prior).cwiseAbs().maxCoeff() <= residual * 14 + 1e-12);
  CHECK((arm.A() - prior).cwiseAbs().maxCoeff() < 0.3);

  std::vector<Arm> arms(3, Arm(3, 1.0));
  arms[2].update(Eigen::Vector3d(1, 1, 1), 1.0);
  for (int i = 0; i < 2000; ++i) arms[2].discounted_update(Eigen::Vector3d::Zero(), 0.0, 0.98);
  CHECK((arms[2].A() - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(bandit::linucb_choose(arms, Eigen::Vector3d(1, 1, 1), 1.0) == 0);
  CHECK_THROWS(arms[0].discounted_update(Eigen::Vector3d::Zero(), 0.0, 0.0));
  CHECK_THROWS(arms[0].discounted_update(Eigen::Vector3d::Zero(), 0.0, 1.5));
}

TEST_CASE("design matrices stay positive definite") {
  RngStream rng(5);
  const double lambda = 1.0;
  Arm disc(5, lambda), plain(5, lambda), win(5, lambda);
  double min_eig = 1e300;
  for (int i = 0; i < 100000; ++i) {
    Eigen::VectorXd x = random_x(rng, 5) * rng.uniform(0.0, 30.0);
    const double r = rng.uniform(-3, 1);
    disc.discounted_update(x, r, 0.98);
    plain.update(x, r);
    if (i % 10 == 0) win.windowed_update(x, r, 50);
    if (i % 997 == 0) {
      for (const Arm* a : {&disc, &plain, &win}) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a->A());
        min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
      }
    }
  }
  CHECK(min_eig >= lambda * (1 - 1e-6));
}

TEST_CASE("Thompson sampling") {
  std::vector<Arm> arms(3, Arm(4, 1.0));
  RngStream rng(3);
  const Eigen::Vector4d x(1, 0.5, -0.2, 1.0);
  SUBCASE("zero scale is the greedy argmax") {
    arms[1].update(x, 1.0);
    arms[2].update(x, 0.5);
    for (int i = 0; i < 100; ++i) CHECK(bandit::thompson_choose(arms, x, 0.0, rng) == 1);
  }
  SUBCASE("symmetric prior picks arms uniformly") {
    std::vector<int> counts(3, 0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) ++counts[bandit::thompson_choose(arms, x, 1.5, rng)];
    for (int c : counts) CHECK(std::abs(static_cast<double>(c) / n - 1.0 / 3) < 0.02);
  }
}

TEST_CASE("shaped reward") {
  const RewardWeights w;
  CHECK(shaped_reward(w, {AttemptOutcome::Won, SimTime::from_ms(500), SimTime::from_ms(250)}) == doctest::Approx(0.0));
  CHECK(shaped_reward(w, {AttemptOutcome::Failed, SimTime{}, SimTime::from_ms(1200)}) == doctest::Approx(-3.4));
  CHECK_THROWS(shaped_reward(w, {AttemptOutcome::Superseded, SimTime{}, SimTime{}}));
}

TEST_CASE("safety gate") {
  SafetyGate g;
  CHECK_FALSE(g.on_failed().entered);
  CHECK_FALSE(g.on_failed().entered);
  CHECK(g.on_failed().entered);
  CHECK(g.cooldown_remaining() == 2);
  CHECK_FALSE(g.on_failed().entered);  // already forced
  CHECK(g.cooldown_remaining() == 2);
  CHECK_FALSE(g.on_won().exited);
  CHECK(g.forced());
  CHECK(g.on_won().exited);
  CHECK_FALSE(g.forced());
  CHECK(g.on_won().exited == false);
}

TEST_CASE("bandit policy honours the gate and learns only from candidacies") {
  auto p = policy("bandit_safe");
  auto& b = dynamic_cast<BanditPolicy&>(*p);
  RngStream rng(2);
  for (int i = 0; i < 3; ++i) {
    b.choose(obs(), rng);
    b.observe_outcome({AttemptOutcome::Failed, SimTime{}, SimTime::from_ms(200)});
  }
  CHECK(b.safety().forced());
  for (auto reason : {DecisionReason::Heartbeat, DecisionReason::Candidacy, DecisionReason::StepDown}) {
    const Decision d = b.choose(obs(reason), rng);
    CHECK(d.forced_safe);
    CHECK(*d.arm == 2);
    CHECK(d.timeout >= SimTime::from_ms(600));
    CHECK(d.timeout <= SimTime::from_ms(1200));
  }
  CHECK(b.rewards().size() == 3);
  CHECK(b.rewards().back().reward == doctest::Approx(-1.4));

  auto plain = policy("bandit");
  RngStream r2(2);
  for (int i = 0; i < 5; ++i) {
    plain->choose(obs(), r2);
    plain->observe_outcome({AttemptOutcome::Failed, SimTime{}, SimTime::from_ms(200)});
  }
  CHECK_FALSE(plain->choose(obs(), r2).forced_safe);

  auto q = policy("bandit_safe");
  RngStream r3(2);
  q->choose(obs(DecisionReason::Heartbeat), r3);
  q->observe_outcome({AttemptOutcome::Won, SimTime::from_ms(300), SimTime::from_ms(200)});
  CHECK(reward_log(*q)->empty());
}

TEST_CASE("Thompson bandit keeps the gate") {
  auto p = policy("bandit_ts_safe");
  RngStream rng(9);
  for (int i = 0; i < 3; ++i) {
    p->choose(obs(), rng);
    p->observe_outcome({AttemptOutcome::Failed, SimTime{}, SimTime::from_ms(200)});
  }
  for (int i = 0; i < 20; ++i) CHECK(*p->choose(obs(DecisionReason::Heartbeat), rng).arm == 2);
}

TEST_CASE("quantile-relative bandit arms scale with the base") {
  auto p = policy("bandit_qdecay");
  auto& b = dynamic_cast<BanditPolicy&>(*p);
  for (int i = 0; i < 100; ++i) b.observe_heartbeat({60.0, std::nullopt});
  CHECK(b.range(0) == ArmRange{SimTime::from_ms(180), SimTime::from_ms(300)});
  auto q = policy("bandit_qdecay");
  auto& b2 = dynamic_cast<BanditPolicy&>(*q);
  for (int i = 0; i < 100; ++i) b2.observe_heartbeat({120.0, std::nullopt});
  for (std::size_t a = 0; a < b.arm_count(); ++a) {
    CHECK(b2.range(a).lo == b.range(a).lo * 2);
    CHECK(b2.range(a).hi == b.range(a).hi * 2);
  }
  RngStream rng(1);
  for (int i = 0; i < 3; ++i) {
    b.choose(obs(), rng);
    b.observe_outcome({AttemptOutcome::Failed, SimTime{}, SimTime::from_ms(200)});
  }
  const Decision d = b.choose(obs(DecisionReason::Heartbeat), rng);
  CHECK(*d.arm == 2);
  CHECK(d.timeout >= SimTime::from_ms(420));
  CHECK(d.timeout <= SimTime::from_ms(540));
}

TEST_CASE("quantile estimator") {
  QuantileEstimator q(0.9, 0.99);
  CHECK_FALSE(q.estimate());
  for (int i = 0; i < 500; ++i) q.observe(40.0);
  CHECK(*q.estimate() == doctest::Approx(40.0));
  QuantileEstimator u(0.5, 1.0, 101);
  for (int i = 0; i <= 100; ++i) u.observe(i);
  CHECK(*u.estimate() == doctest::Approx(50.0).epsilon(0.02));
}

TEST_CASE("quantile_decay baseline") {
  auto p = policy("quantile_decay", json{{"mult", {3.0, 10.0}}});
  RngStream rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto t = p->choose(obs(), rng).timeout;
    CHECK(t >= SimTime::from_ms(300));
    CHECK(t <= SimTime::from_ms(600));
  }
  for (int i = 0; i < 300; ++i) p->observe_heartbeat({50.0, std::nullopt});
  SimTime lo = SimTime::from_sec(10), hi{};
  for (int i = 0; i < 2000; ++i) {
    const auto t = p->choose(obs(), rng).timeout;
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  CHECK(lo >= SimTime::from_ms(150));
  CHECK(hi <= SimTime::from_ms(500));
  CHECK(lo < SimTime::from_ms(160));
  CHECK(hi > SimTime::from_ms(490));
}

TEST_CASE("dynatune formulas") {
  const DynatuneParams p;
  CHECK(dynatune_et_timeout_ms(100, 50, p) == 400);
  CHECK(dynatune_et_timeout_ms(10, 50, p) == 250);
  CHECK(dynatune_et_timeout_ms(1000, 50, p) == 2400);
  const JointSetting j = dynatune_joint_adjust(400, p);
  CHECK(j.heartbeat_ms == 100);
  CHECK(j.timeout_ms == 1600);
  CHECK(dynatune_joint_adjust(40, p).heartbeat_ms == 20);
  const JointSetting huge = dynatune_joint_adjust(1e6, p);
  CHECK(huge.heartbeat_ms == 1000);
  CHECK(huge.timeout_ms == 2400);
}

TEST_CASE("dynatune_joint sets the heartbeat cadence") {
  auto p = policy("dynatune_joint");
  RngStream rng(1);
  CHECK_FALSE(p->choose(obs(), rng).heartbeat_interval);
  for (int i = 0; i < 50; ++i) p->observe_heartbeat({200.0, std::nullopt});
  const Decision d = p->choose(obs(), rng);
  REQUIRE(d.heartbeat_interval);
  CHECK(*d.heartbeat_interval == SimTime::from_ms(100));
  auto et = policy("dynatune_et");
  for (int i = 0; i < 50; ++i) et->observe_heartbeat({50.0, std::nullopt});
  for (int i = 0; i < 100; ++i) {
    const Decision e = et->choose(obs(), rng);
    CHECK_FALSE(e.heartbeat_interval);
    CHECK(e.timeout >= SimTime::from_ms(400));
    CHECK(e.timeout <= SimTime::from_ms(800));
  }
}

TEST_CASE("threshold baselines") {
  CHECK(threshold_arm(30, 50, 200, 3) == 0);
  CHECK(threshold_arm(50, 50, 200, 3) == 1);
  CHECK(threshold_arm(250, 50, 200, 3) == 2);
  CHECK(threshold_arm(2.5, 2.0, 3.0, 3) == 1);

  RngStream rng(1);
  auto rtt = policy("rtt_heuristic");
  CHECK(*rtt->choose(obs(), rng).arm == 1);
  for (int i = 0; i < 20; ++i) rtt->observe_heartbeat({15.0, std::nullopt});
  CHECK(*rtt->choose(obs(), rng).arm == 0);

  auto phi = policy("phi_accrual");
  CHECK(*phi->choose(obs(), rng).arm == 1);
  for (int i = 0; i < 20; ++i) phi->observe_heartbeat({1.0, 50.0});
  Observation o = obs();
  o.since_last_hb_ms = phi_inverse(2.5, 50.0, 10.0);
  CHECK(phi_value(o.since_last_hb_ms, 50.0, 10.0) == doctest::Approx(2.5).epsilon(1e-9));
  CHECK(*phi->choose(o, rng).arm == 1);
  o.since_last_hb_ms = 10;
  CHECK(*phi->choose(o, rng).arm == 0);
  o.since_last_hb_ms = 200;
  CHECK(*phi->choose(o, rng).arm == 2);
}

TEST_CASE("backoff doubles per failure and resets on a win") {
  auto p = policy("backoff");
  RngStream rng(8);
  auto range_of = [&] {
    SimTime lo = SimTime::from_sec(100), hi{};
    for (int i = 0; i < 3000; ++i) {
      const auto t = p->choose(obs(), rng).timeout;
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
    return std::pair{lo.ms(), hi.ms()};
  };
  auto [l0, h0] = range_of();
  CHECK(l0 >= 150);
  CHECK(h0 <= 300);
  p->observe_outcome({AttemptOutcome::Failed, SimTime{}, SimTime::from_ms(200)});
  p->observe_outcome({AttemptOutcome::Failed, SimTime{}, SimTime::from_ms(400)});
  auto [l2, h2] = range_of();
  CHECK(l2 >= 600);
  CHECK(h2 <= 1200);
  CHECK(l2 < 605);
  CHECK(h2 > 1195);
  for (int i = 0; i < 10; ++i) p->observe_outcome({AttemptOutcome::Failed, SimTime{}, SimTime::from_ms(400)});
  auto [lc, hc] = range_of();
  CHECK(lc >= 1200);
  CHECK(hc <= 2400);
  p->observe_outcome({AttemptOutcome::Won, SimTime::from_ms(300), SimTime::from_ms(400)});
  auto [lr, hr] = range_of();
  CHECK(lr >= 150);
  CHECK(hr <= 300);
}

TEST_CASE("oracle policies") {
  auto p = policy("oracle_hint", json{{"map", {{"0", "A2"}, {"1", "A2"}}}});
  RngStream rng(1);
  Observation o = obs();
  o.regime = 1;
  const Decision d = p->choose(o, rng);
  CHECK(*d.arm == 1);
  CHECK(d.timeout >= SimTime::from_ms(300));
  CHECK(d.timeout <= SimTime::from_ms(600));
  o.regime = 7;
  CHECK_THROWS(p->choose(o, rng));
  CHECK_THROWS(policy("oracle_hint", json{{"map", {{"0", "A4"}}}}));
}

TEST_CASE("min-jitter guard widens narrow arms") {
  PolicyEnvironment env;
  env.arms = ArmSet::alignment();
  env.min_jitter_width = SimTime::from_ms(20);
  CHECK(env.arms[2].width() == SimTime::from_ms(1));
  auto p = policy("static_conservative", json::object(), env);
  RngStream rng(1);
  SimTime lo = SimTime::from_sec(10), hi{};
  for (int i = 0; i < 5000; ++i) {
    const auto t = p->choose(obs(), rng).timeout;
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  CHECK(lo >= SimTime::from_ms(890));
  CHECK(hi <= SimTime::from_ms(910));
  CHECK((hi - lo) > SimTime::from_ms(19));
  CHECK(widen_to(ArmRange{SimTime{5}, SimTime{6}}, SimTime::from_ms(1)).lo == SimTime{1});
}

TEST_CASE("snapshot round-trip reproduces decisions") {
  for (const char* id : {"bandit_safe", "bandit_ts_safe", "bandit_qdecay", "bandit_safe_ln", "phi_accrual", "backoff",
                         "quantile_decay", "dynatune_et"}) {
    CAPTURE(id);
    json params = json::object();
    if (std::string(id) == "bandit_safe_ln") params = json{{"learner", "window"}, {"window", 7}};
    auto a = policy(id, params);
    RngStream rng(21);
    for (int i = 0; i < 40; ++i) {
      Observation o = obs(i % 3 == 0 ? DecisionReason::Candidacy : DecisionReason::Heartbeat);
      o.since_last_hb_ms = 10 + i;
      a->observe_heartbeat({20.0 + i % 7, 50.0 + i % 5});
      a->choose(o, rng);
      if (i % 3 == 0) a->observe_outcome({i % 2 ? AttemptOutcome::Won : AttemptOutcome::Failed, SimTime::from_ms(100 + i), SimTime::from_ms(300)});
    }
    const std::string snap = a->snapshot();
    auto b = policy(id, params);
    b->restore(snap);
    CHECK(b->snapshot() == snap);
    RngStream ra(5), rb(5);
    for (int i = 0; i < 30; ++i) {
      Observation o = obs(i % 2 ? DecisionReason::Candidacy : DecisionReason::VoteGranted);
      o.since_last_hb_ms = 3.0 * i;
      const Decision da = a->choose(o, ra), db = b->choose(o, rb);
      REQUIRE(da.timeout == db.timeout);
      REQUIRE(da.arm == db.arm);
      if (i % 2) {
        a->observe_outcome({AttemptOutcome::Failed, SimTime{}, da.timeout});
        b->observe_outcome({AttemptOutcome::Failed, SimTime{}, db.timeout});
      }
    }
  }
}

TEST_CASE("snapshot restore rejects mismatches") {
  auto a = policy("bandit_safe");
  std::string snap = a->snapshot();
  auto b = policy("bandit_safe");
  std::string bad = snap;
  bad.replace(bad.find("v1"), 2, "v9");
  CHECK_THROWS_AS(b->restore(bad), std::runtime_error);
  CHECK_THROWS_AS(policy("bandit")->restore(snap), std::runtime_error);
  CHECK_THROWS(b->restore(snap.substr(0, snap.size() / 2)));
  CHECK(b->reset() == false);
}

TEST_CASE("policy parameter validation collects every error") {
  const auto errs = validate_policy(PolicySpec{"bandit_safe", json{{"alpha", -1}, {"bogus", 1}, {"learner", "lstm"}}});
  CHECK(errs.size() >= 3);
  bool saw_unknown = false;
  for (const auto& e : errs) {
    CHECK(e.rfind("policy.params", 0) == 0);
    if (e.find("bogus") != std::string::npos) saw_unknown = true;
  }
  CHECK(saw_unknown);
  CHECK_FALSE(validate_policy(PolicySpec{"nope", json::object()}).empty());
  CHECK(validate_policy(PolicySpec{"random", json{{"range_ms", {300, 150}}}}).size() == 1);
  CHECK_THROWS_AS(policy("bandit", json{{"discount", 0.0}}), std::invalid_argument);
  for (const auto& id : known_policy_ids()) {
    if (id.rfind("oracle", 0) == 0) continue;
    CHECK_NOTHROW(policy(id));
  }
}
