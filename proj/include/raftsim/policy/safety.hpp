#pragma once

namespace raftsim {

struct SafetyConfig {
  int failure_threshold = 3;
  int cooldown_elections = 2;
};

/// Forces the safe arm after F consecutive failed attempts. Cooldown only
/// counts down on successful elections.
class SafetyGate {
public:
  struct Transition {
    bool entered = false;
    bool exited = false;
  };

  explicit SafetyGate(SafetyConfig cfg = {}) : cfg_(cfg) {}

  bool forced() const { return cooldown_remaining_ > 0; }
  int consecutive_failures() const { return consecutive_failures_; }
  int cooldown_remaining() const { return cooldown_remaining_; }
  const SafetyConfig& config() const { return cfg_; }

  Transition on_failed() {
    const bool was = forced();
    ++consecutive_failures_;
    if (consecutive_failures_ >= cfg_.failure_threshold && cfg_.cooldown_elections > 0) {
      cooldown_remaining_ = cfg_.cooldown_elections;
    }
    return {!was && forced(), false};
  }

  Transition on_won() {
    const bool was = forced();
    consecutive_failures_ = 0;
    if (cooldown_remaining_ > 0) --cooldown_remaining_;
    return {false, was && !forced()};
  }

  /// Returns true when a forced-safe episode was cut short.
  bool reset() {
    const bool was = forced();
    consecutive_failures_ = 0;
    cooldown_remaining_ = 0;
    return was;
  }

  void assign(int consecutive_failures, int cooldown_remaining) {
    consecutive_failures_ = consecutive_failures;
    cooldown_remaining_ = cooldown_remaining;
  }

private:
  SafetyConfig cfg_;
  int consecutive_failures_ = 0;
  int cooldown_remaining_ = 0;
};

} // namespace raftsim
