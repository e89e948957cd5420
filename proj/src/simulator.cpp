#include "raftsim/simulator.hpp"

#include <stdexcept>
#include <string>

namespace raftsim {

EventHandle Simulator::schedule(SimTime at, EventKind kind, Action action) {
  if (at < now_) {
    throw std::logic_error("Simulator::schedule: fire_at " + std::to_string(at.us) + "us is before clock " +
                           std::to_string(now_.us) + "us");
  }
  const EventHandle h = next_sequence_++;
  queue_.push(Entry{at, h, kind, std::move(action)});
  live_.insert(h);
  return h;
}

bool Simulator::cancel(EventHandle handle) {
  if (live_.erase(handle) == 0) return false;
  cancelled_.insert(handle);
  return true;
}

SimTime Simulator::run_until(SimTime end) {
  while (!queue_.empty() && queue_.top().fire_at <= end) {
    // priority_queue::top is const; the entry is popped right after the move.
    Entry e = std::move(const_cast<Entry&>(queue_.top()));
    queue_.pop();
    if (cancelled_.erase(e.sequence) > 0) continue;
    live_.erase(e.sequence);
    now_ = e.fire_at;
    ++processed_;
    e.action();
  }
  if (end > now_) now_ = end;
  return now_;
}

} // namespace raftsim
