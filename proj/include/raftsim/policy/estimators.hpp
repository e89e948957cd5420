#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <vector>

namespace raftsim {

/// Exponentially weighted mean and variance.
class Ewma {
public:
  explicit Ewma(double alpha = 0.125) : alpha_(alpha) {}

  void observe(double x) {
    if (!seen_) {
      mean_ = x;
      var_ = 0.0;
      seen_ = true;
      return;
    }
    const double diff = x - mean_;
    const double incr = alpha_ * diff;
    mean_ += incr;
    var_ = (1.0 - alpha_) * (var_ + diff * incr);
  }

  bool seen() const { return seen_; }
  double mean() const { return mean_; }
  double variance() const { return var_; }
  double stddev() const;
  double alpha() const { return alpha_; }
  void reset() { *this = Ewma(alpha_); }
  void assign(bool seen, double mean, double var) {
    seen_ = seen;
    mean_ = mean;
    var_ = var;
  }

private:
  double alpha_;
  bool seen_ = false;
  double mean_ = 0.0;
  double var_ = 0.0;
};

/// Decayed p-quantile of a stream: the weighted quantile of the most recent
/// `capacity` observations, where an observation k steps old weighs decay^k.
class QuantileEstimator {
public:
  QuantileEstimator(double p = 0.9, double decay = 0.99, std::size_t capacity = 256);

  void observe(double x);
  bool has_estimate() const { return !values_.empty(); }
  /// Estimate in the observation's unit; nullopt before the first observation.
  std::optional<double> estimate() const;

  double p() const { return p_; }
  double decay() const { return decay_; }
  std::size_t capacity() const { return capacity_; }
  const std::deque<double>& values() const { return values_; }
  void reset() { values_.clear(); cached_.reset(); }
  void assign(std::deque<double> values) { values_ = std::move(values); cached_.reset(); }

private:
  double p_;
  double decay_;
  std::size_t capacity_;
  std::deque<double> values_;  // oldest first
  mutable std::optional<double> cached_;
};

/// Per-feature running mean/std (Welford) used for optional z-scoring.
class FeatureScaler {
public:
  explicit FeatureScaler(std::size_t dims = 0) : n_(0), mean_(dims, 0.0), m2_(dims, 0.0) {}

  void observe(const std::vector<double>& x);
  /// (x - mean) / std; features with no spread yet map to 0.
  double scale(std::size_t i, double x) const;
  std::size_t count() const { return n_; }
  std::size_t dims() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& m2() const { return m2_; }
  void reset() { *this = FeatureScaler(mean_.size()); }
  void assign(std::size_t n, std::vector<double> mean, std::vector<double> m2) {
    n_ = n;
    mean_ = std::move(mean);
    m2_ = std::move(m2);
  }

private:
  std::size_t n_;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

} // namespace raftsim
