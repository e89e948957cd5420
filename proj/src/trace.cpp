#include "raftsim/trace.hpp"

#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "raftsim/rng.hpp"

namespace raftsim {

namespace {

constexpr std::array<std::string_view, 17> kNames = {
    "ElectionTimeout", "BecameCandidate", "RequestVoteSent", "RequestVoteReceived", "VoteGranted",
    "LeaderElected",   "ElectionFailed",  "HeartbeatSent",   "HeartbeatReceived",   "NodeCrashed",
    "NodeRestarted",   "PartitionStart",  "PartitionEnd",    "RegimeSwitch",        "PolicyDecision",
    "SafetyEnter",     "SafetyExit",
};

template <typename T>
void put(std::string& out, const std::optional<T>& v) {
  out += '\t';
  if (v) out += std::to_string(*v);
  else out += '-';
}

void put(std::string& out, const std::optional<SimTime>& v) {
  out += '\t';
  if (v) out += std::to_string(v->us);
  else out += '-';
}

template <typename T>
std::optional<T> get(std::string_view field, std::size_t line_no, std::string_view name) {
  if (field == "-") return std::nullopt;
  T v{};
  auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || p != field.data() + field.size()) {
    throw TraceParseError(line_no, "bad " + std::string(name) + " '" + std::string(field) + "'");
  }
  return v;
}

} // namespace

std::string_view to_string(EventType t) { return kNames[static_cast<std::size_t>(t)]; }

std::optional<EventType> event_type_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == s) return static_cast<EventType>(i);
  }
  return std::nullopt;
}

void Trace::emit(const ProtocolEvent& ev) {
  ProtocolEvent e = ev;
  e.seq = events_.size();
  events_.push_back(std::move(e));
}

std::string format_event(const ProtocolEvent& ev) {
  std::string out = std::to_string(ev.time.us);
  out += '\t';
  out += std::to_string(ev.seq);
  put(out, ev.node);
  out += '\t';
  out += to_string(ev.kind);
  put(out, ev.term);
  put(out, ev.arm);
  put(out, ev.timeout);
  put(out, ev.peer);
  put(out, ev.regime);
  put(out, ev.latency);
  put(out, ev.value);
  return out;
}

ProtocolEvent parse_event(std::string_view line, std::size_t line_no) {
  std::array<std::string_view, 11> f{};
  std::size_t n = 0;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (n == f.size()) throw TraceParseError(line_no, "too many fields");
    f[n++] = line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start);
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  if (n != f.size()) throw TraceParseError(line_no, "expected 11 fields, got " + std::to_string(n));

  ProtocolEvent ev;
  auto t = get<std::int64_t>(f[0], line_no, "time_us");
  auto s = get<std::uint64_t>(f[1], line_no, "seq");
  if (!t || !s) throw TraceParseError(line_no, "time_us and seq are required");
  ev.time = SimTime{*t};
  ev.seq = *s;
  ev.node = get<int>(f[2], line_no, "node");
  auto kind = event_type_from_string(f[3]);
  if (!kind) throw TraceParseError(line_no, "unknown kind '" + std::string(f[3]) + "'");
  ev.kind = *kind;
  ev.term = get<std::int64_t>(f[4], line_no, "term");
  ev.arm = get<int>(f[5], line_no, "arm");
  if (auto v = get<std::int64_t>(f[6], line_no, "timeout_us")) ev.timeout = SimTime{*v};
  ev.peer = get<int>(f[7], line_no, "peer");
  ev.regime = get<int>(f[8], line_no, "regime");
  if (auto v = get<std::int64_t>(f[9], line_no, "latency_us")) ev.latency = SimTime{*v};
  ev.value = get<std::int64_t>(f[10], line_no, "value");
  return ev;
}

void Trace::write(std::ostream& os) const {
  os << kTraceHeader << '\n' << '#' << kTraceColumns << '\n';
  for (const auto& e : events_) os << format_event(e) << '\n';
}

std::string Trace::serialize() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

std::uint64_t Trace::digest() const { return fnv1a64(serialize()); }

Trace Trace::parse(std::string_view text) {
  Trace tr;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool saw_header = false;
  SimTime last{};
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line_no == 1) {
        if (line != kTraceHeader) throw TraceParseError(line_no, "unsupported trace header");
        saw_header = true;
      }
      continue;
    }
    if (!saw_header) throw TraceParseError(line_no, "missing trace header");
    ProtocolEvent ev = parse_event(line, line_no);
    if (ev.time < last) throw TraceParseError(line_no, "events out of time order");
    if (ev.seq != tr.events_.size()) throw TraceParseError(line_no, "sequence gap");
    last = ev.time;
    tr.events_.push_back(std::move(ev));
  }
  return tr;
}

Trace Trace::read(std::istream& is) {
  std::stringstream buf;
  buf << is.rdbuf();
  return parse(buf.str());
}

} // namespace raftsim
