#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <unordered_set>
#include <vector>

#include "raftsim/sim_time.hpp"

namespace raftsim {

enum class EventKind : std::uint8_t { TimerFire, MessageDeliver, FaultAction, TickSample };

using EventHandle = std::uint64_t;

/// Deterministic discrete-event scheduler.
///
/// Events are totally ordered by (fire_at, sequence); sequence numbers are
/// assigned at schedule time, so equal-time events run in insertion order.
class Simulator {
public:
  using Action = std::function<void()>;

  SimTime now() const { return now_; }

  /// Throws std::logic_error when `at` is before the current clock.
  EventHandle schedule(SimTime at, EventKind kind, Action action);
  EventHandle schedule_after(SimTime delay, EventKind kind, Action action) {
    return schedule(now_ + delay, kind, std::move(action));
  }

  /// Returns false when the handle already fired or was never issued.
  bool cancel(EventHandle handle);

  /// Processes every event with fire_at <= end, then sets the clock to end.
  SimTime run_until(SimTime end);

  std::size_t pending() const { return queue_.size() - cancelled_.size(); }
  std::uint64_t processed() const { return processed_; }

private:
  struct Entry {
    SimTime fire_at;
    std::uint64_t sequence;
    EventKind kind;
    Action action;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
      return a.sequence > b.sequence;
    }
  };

  SimTime now_{};
  std::uint64_t next_sequence_ = 0;
  std::uint64_t processed_ = 0;
  std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
  std::unordered_set<EventHandle> live_;
  std::unordered_set<EventHandle> cancelled_;
};

} // namespace raftsim
