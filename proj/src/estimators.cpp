#include "raftsim/policy/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace raftsim {

double Ewma::stddev() const { return std::sqrt(std::max(0.0, var_)); }

QuantileEstimator::QuantileEstimator(double p, double decay, std::size_t capacity)
    : p_(p), decay_(decay), capacity_(capacity) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("QuantileEstimator: p must be in (0,1)");
  if (!(decay > 0.0 && decay <= 1.0)) throw std::invalid_argument("QuantileEstimator: decay must be in (0,1]");
  if (capacity == 0) throw std::invalid_argument("QuantileEstimator: capacity must be positive");
}

void QuantileEstimator::observe(double x) {
  values_.push_back(x);
  if (values_.size() > capacity_) values_.pop_front();
  cached_.reset();
}

std::optional<double> QuantileEstimator::estimate() const {
  if (values_.empty()) return std::nullopt;
  if (cached_) return cached_;
  const std::size_t n = values_.size();
  std::vector<std::pair<double, double>> vw;  // (value, weight)
  vw.reserve(n);
  double w = 1.0;
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    vw.emplace_back(values_[n - 1 - k], w);
    total += w;
    w *= decay_;
  }
  std::sort(vw.begin(), vw.end());
  const double target = p_ * total;
  double acc = 0.0;
  double q = vw.back().first;
  for (const auto& [v, wt] : vw) {
    acc += wt;
    if (acc >= target) {
      q = v;
      break;
    }
  }
  cached_ = q;
  return q;
}

void FeatureScaler::observe(const std::vector<double>& x) {
  if (x.size() != mean_.size()) throw std::invalid_argument("FeatureScaler: dimension mismatch");
  ++n_;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean_[i];
    mean_[i] += d / static_cast<double>(n_);
    m2_[i] += d * (x[i] - mean_[i]);
  }
}

double FeatureScaler::scale(std::size_t i, double x) const {
  if (n_ < 2) return 0.0;
  const double sd = std::sqrt(m2_[i] / static_cast<double>(n_ - 1));
  if (!(sd > 0.0)) return 0.0;
  return (x - mean_[i]) / sd;
}

} // namespace raftsim
