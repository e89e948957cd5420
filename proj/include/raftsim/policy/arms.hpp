#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "raftsim/rng.hpp"
#include "raftsim/sim_time.hpp"

namespace raftsim {

/// Closed timeout range [lo, hi] a deadline is sampled from.
struct ArmRange {
  SimTime lo{};
  SimTime hi{};

  bool operator==(const ArmRange&) const = default;
  SimTime width() const { return hi - lo; }
  SimTime mid() const { return SimTime{(lo.us + hi.us) / 2}; }
  ArmRange scaled(double base_ms) const;
};

/// Widens a range symmetrically about its midpoint so its width is at least
/// `min_width`. The lower bound never drops below 1us.
ArmRange widen_to(ArmRange r, SimTime min_width);

/// Uniform draw in the (possibly widened) range, rounded to whole microseconds.
SimTime sample_in(ArmRange r, SimTime min_width, RngStream& rng);

/// Ordered arm list; the last arm is the most conservative one.
class ArmSet {
public:
  ArmSet() = default;
  explicit ArmSet(std::vector<ArmRange> arms) : arms_(std::move(arms)) {}

  std::size_t size() const { return arms_.size(); }
  bool empty() const { return arms_.empty(); }
  const ArmRange& operator[](std::size_t i) const { return arms_[i]; }
  const std::vector<ArmRange>& arms() const { return arms_; }
  std::size_t safe_index() const { return arms_.size() - 1; }
  const ArmRange& safe() const { return arms_.back(); }

  /// Empty when the set is valid: non-empty, lo < hi per arm, lo non-decreasing.
  std::vector<std::string> validate() const;

  /// A1 150-300, A2 300-600, A3 600-1200 ms.
  static ArmSet standard();
  /// Five arms reaching 2400 ms.
  static ArmSet broad5();
  /// Standard arms shifted one step longer.
  static ArmSet shifted3();
  /// Seven finer arms including intermediate ranges.
  static ArmSet fine7();
  /// Standard arms narrowed to 1 ms around their midpoints.
  static ArmSet alignment();
  /// Named preset; throws std::invalid_argument on unknown names.
  static ArmSet named(std::string_view name);
  static std::vector<std::string> preset_names();

private:
  std::vector<ArmRange> arms_;
};

/// Multiplier arms applied to a moving base timeout.
struct RelativeArm {
  double lo = 3.0;
  double hi = 5.0;
};

} // namespace raftsim
