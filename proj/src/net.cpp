#include "raftsim/net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace raftsim {

SimTime DelayModel::sample(RngStream& rng) const {
  double d = static_cast<double>(base.us);
  if (jitter_std.us > 0) {
    double z;
    do {
      z = rng.normal();
    } while (std::abs(z) > 2.0);
    d += z * static_cast<double>(jitter_std.us);
  }
  if (tail && tail->mix_probability > 0.0 && rng.bernoulli(tail->mix_probability)) {
    double u = rng.uniform01();
    while (u <= 0.0) u = rng.uniform01();
    d += static_cast<double>(tail->scale.us) * std::pow(u, -1.0 / tail->shape);
  }
  return SimTime{std::max<std::int64_t>(1, std::llround(d))};
}

bool GilbertElliott::step(const BurstLoss& m, RngStream& rng) {
  if (bad_) {
    if (rng.bernoulli(m.p_bad_to_good)) bad_ = false;
  } else {
    if (rng.bernoulli(m.p_good_to_bad)) bad_ = true;
  }
  return bad_ && rng.bernoulli(m.loss_in_bad);
}

int RegimeSchedule::active_regime(SimTime now) const {
  int id = switches.empty() ? 0 : switches.front().regime;
  for (const auto& s : switches) {
    if (s.at > now) break;
    id = s.regime;
  }
  return id;
}

namespace {

SimTime draw_between(RngStream& rng, SimTime lo, SimTime hi) {
  if (hi <= lo) return lo;
  return SimTime{rng.uniform_int(lo.us, hi.us)};
}

bool overlaps(const PartitionFault& a, const PartitionFault& b) { return a.start < b.end && b.start < a.end; }

} // namespace

FaultSchedule realize_faults(const FaultSchedule& spec, int n_nodes, SimTime horizon, std::uint64_t seed) {
  FaultSchedule out;
  out.crashes = spec.crashes;
  out.partitions = spec.partitions;
  const RandomFaults& r = spec.random;
  if (r.crash_count == 0 && r.partition_count == 0) return out;

  RngStream root(seed);
  RngStream rng = root.fork("faults");
  for (int i = 0; i < r.crash_count; ++i) {
    CrashFault c;
    c.down = draw_between(rng, r.crash_window_start, r.crash_window_end);
    c.up = c.down + draw_between(rng, r.crash_down_min, r.crash_down_max);
    c.node = r.crash_target_leader ? kLeaderTarget : static_cast<int>(rng.index(static_cast<std::size_t>(n_nodes)));
    if (c.up > horizon) c.up = horizon;
    if (c.up > c.down) out.crashes.push_back(c);
  }
  for (int i = 0; i < r.partition_count; ++i) {
    PartitionFault p;
    p.start = draw_between(rng, r.partition_window_start, r.partition_window_end);
    p.end = p.start + draw_between(rng, r.partition_min, r.partition_max);
    if (r.partition_isolate_leader) {
      p.isolate_leader = true;
    } else {
      // Random minority side.
      const int minority = std::max(1, (n_nodes - 1) / 2);
      std::vector<int> ids(static_cast<std::size_t>(n_nodes));
      for (int k = 0; k < n_nodes; ++k) ids[static_cast<std::size_t>(k)] = k;
      for (int k = 0; k < minority; ++k) {
        const auto j = static_cast<std::size_t>(k) + rng.index(ids.size() - static_cast<std::size_t>(k));
        std::swap(ids[static_cast<std::size_t>(k)], ids[j]);
      }
      p.side.assign(ids.begin(), ids.begin() + minority);
      std::sort(p.side.begin(), p.side.end());
    }
    if (p.end > horizon) p.end = horizon;
    if (p.end <= p.start) continue;
    const bool clash = std::any_of(out.partitions.begin(), out.partitions.end(),
                                   [&](const PartitionFault& q) { return overlaps(p, q); });
    if (!clash) out.partitions.push_back(p);
  }
  std::stable_sort(out.crashes.begin(), out.crashes.end(),
                   [](const CrashFault& a, const CrashFault& b) { return a.down < b.down; });
  std::stable_sort(out.partitions.begin(), out.partitions.end(),
                   [](const PartitionFault& a, const PartitionFault& b) { return a.start < b.start; });
  return out;
}

Network::Network(NetConfig cfg, int n_nodes, std::uint64_t seed)
    : cfg_(std::move(cfg)), n_(n_nodes), chains_(static_cast<std::size_t>(n_nodes * n_nodes)) {
  RngStream root(seed);
  RngStream net = root.fork("net");
  link_rng_.reserve(static_cast<std::size_t>(n_nodes * n_nodes));
  for (int s = 0; s < n_nodes; ++s) {
    for (int d = 0; d < n_nodes; ++d) {
      link_rng_.push_back(net.fork("link-" + std::to_string(s) + "-" + std::to_string(d)));
    }
  }
}

const Regime& Network::regime(int id) const {
  for (const auto& r : cfg_.regimes) {
    if (r.id == id) return r;
  }
  throw std::out_of_range("Network: undefined regime " + std::to_string(id));
}

SimTime Network::service_delay(int node) const {
  const auto i = static_cast<std::size_t>(node);
  return i < cfg_.service_delay.size() ? cfg_.service_delay[i] : SimTime{};
}

void Network::set_partition(const std::vector<bool>& side_a) {
  if (static_cast<int>(side_a.size()) != n_) throw std::invalid_argument("Network::set_partition: size mismatch");
  partition_ = side_a;
}

std::optional<SimTime> Network::send(int src, int dst, SimTime now) {
  if (src < 0 || dst < 0 || src >= n_ || dst >= n_) throw std::out_of_range("Network::send: node id");
  if (partitioned(src, dst)) return std::nullopt;
  const Regime& reg = regime(active_regime(now));
  RngStream& rng = link_rng_[link(src, dst)];
  if (reg.loss.burst && chains_[link(src, dst)].step(*reg.loss.burst, rng)) return std::nullopt;
  if (reg.loss.iid_loss_probability > 0.0 && rng.bernoulli(reg.loss.iid_loss_probability)) return std::nullopt;
  return now + reg.delay.sample(rng) + service_delay(dst);
}

} // namespace raftsim
