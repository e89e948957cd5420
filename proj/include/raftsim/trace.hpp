#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "raftsim/sim_time.hpp"

namespace raftsim {

enum class EventType : std::uint8_t {
  ElectionTimeout,
  BecameCandidate,
  RequestVoteSent,
  RequestVoteReceived,
  VoteGranted,
  LeaderElected,
  ElectionFailed,
  HeartbeatSent,
  HeartbeatReceived,
  NodeCrashed,
  NodeRestarted,
  PartitionStart,
  PartitionEnd,
  RegimeSwitch,
  PolicyDecision,
  SafetyEnter,
  SafetyExit,
};

std::string_view to_string(EventType t);
std::optional<EventType> event_type_from_string(std::string_view s);

/// One record of the append-only protocol trace.
///
/// Detail fields are kind-specific; unused ones stay empty:
///   arm, timeout   PolicyDecision, BecameCandidate, ElectionFailed
///   peer           RequestVoteReceived / VoteGranted (candidate),
///                  HeartbeatReceived (leader)
///   regime         RegimeSwitch
///   latency        LeaderElected (candidate attempt start -> leader)
///   value          PartitionStart (bitmask of one side)
struct ProtocolEvent {
  SimTime time{};
  std::uint64_t seq = 0;
  std::optional<int> node;
  EventType kind = EventType::ElectionTimeout;
  std::optional<std::int64_t> term;
  std::optional<int> arm;
  std::optional<SimTime> timeout;
  std::optional<int> peer;
  std::optional<int> regime;
  std::optional<SimTime> latency;
  std::optional<std::int64_t> value;

  bool operator==(const ProtocolEvent&) const = default;
};

class TraceParseError : public std::runtime_error {
public:
  TraceParseError(std::size_t line, const std::string& what)
      : std::runtime_error("trace line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

/// Receives events in emission order.
class TraceSink {
public:
  virtual ~TraceSink() = default;
  virtual void emit(const ProtocolEvent& ev) = 0;
};

/// In-memory trace; assigns sequence numbers on emit.
class Trace : public TraceSink {
public:
  void emit(const ProtocolEvent& ev) override;

  const std::vector<ProtocolEvent>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  void clear() { events_.clear(); }

  std::string serialize() const;
  void write(std::ostream& os) const;
  static Trace parse(std::string_view text);
  static Trace read(std::istream& is);

  /// FNV-1a over the serialized bytes.
  std::uint64_t digest() const;

private:
  std::vector<ProtocolEvent> events_;
};

inline constexpr std::string_view kTraceHeader = "# raftsim-trace v1";
inline constexpr std::string_view kTraceColumns =
    "time_us\tseq\tnode\tkind\tterm\tarm\ttimeout_us\tpeer\tregime\tlatency_us\tvalue";

std::string format_event(const ProtocolEvent& ev);
ProtocolEvent parse_event(std::string_view line, std::size_t line_no);

} // namespace raftsim
