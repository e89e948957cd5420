#include "raftsim/policy/arms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace raftsim {

namespace {
ArmRange ms(std::int64_t lo, std::int64_t hi) { return ArmRange{SimTime::from_ms(lo), SimTime::from_ms(hi)}; }
} // namespace

ArmRange ArmRange::scaled(double base_ms) const {
  return ArmRange{SimTime::from_ms_f(lo.ms() * base_ms), SimTime::from_ms_f(hi.ms() * base_ms)};
}

ArmRange widen_to(ArmRange r, SimTime min_width) {
  if (r.width() >= min_width) return r;
  const std::int64_t mid2 = r.lo.us + r.hi.us;  // twice the midpoint
  std::int64_t lo = (mid2 - min_width.us) / 2;
  if (lo < 1) lo = 1;
  return ArmRange{SimTime{lo}, SimTime{lo + min_width.us}};
}

SimTime sample_in(ArmRange r, SimTime min_width, RngStream& rng) {
  const ArmRange w = widen_to(r, min_width);
  return SimTime{rng.uniform_int(w.lo.us, w.hi.us)};
}

std::vector<std::string> ArmSet::validate() const {
  std::vector<std::string> errs;
  if (arms_.empty()) errs.emplace_back("arm set is empty");
  for (std::size_t i = 0; i < arms_.size(); ++i) {
    if (arms_[i].lo.us <= 0) errs.push_back("arm " + std::to_string(i) + ": T_min must be positive");
    if (arms_[i].lo >= arms_[i].hi) errs.push_back("arm " + std::to_string(i) + ": T_min must be < T_max");
    if (i > 0 && arms_[i].lo < arms_[i - 1].lo) errs.push_back("arm " + std::to_string(i) + ": arms must be ordered by T_min");
  }
  return errs;
}

ArmSet ArmSet::standard() { return ArmSet({ms(150, 300), ms(300, 600), ms(600, 1200)}); }

ArmSet ArmSet::broad5() {
  return ArmSet({ms(150, 300), ms(300, 600), ms(600, 1200), ms(1200, 1800), ms(1800, 2400)});
}

ArmSet ArmSet::shifted3() { return ArmSet({ms(300, 600), ms(600, 1200), ms(1200, 2400)}); }

ArmSet ArmSet::fine7() {
  return ArmSet({ms(150, 300), ms(225, 450), ms(300, 600), ms(450, 900), ms(600, 1200), ms(750, 1350),
                 ms(900, 1500)});
}

ArmSet ArmSet::alignment() {
  std::vector<ArmRange> arms;
  const ArmSet base = standard();
  for (const auto& a : base.arms()) {
    const std::int64_t mid = a.mid().us;
    arms.push_back(ArmRange{SimTime{mid - 500}, SimTime{mid + 500}});
  }
  return ArmSet(std::move(arms));
}

ArmSet ArmSet::named(std::string_view name) {
  if (name == "standard") return standard();
  if (name == "broad5") return broad5();
  if (name == "shifted3") return shifted3();
  if (name == "fine7") return fine7();
  if (name == "alignment") return alignment();
  throw std::invalid_argument("unknown arm set '" + std::string(name) + "'");
}

std::vector<std::string> ArmSet::preset_names() { return {"standard", "broad5", "shifted3", "fine7", "alignment"}; }

} // namespace raftsim
