#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <deque>
#include <stdexcept>
#include <vector>

#include "raftsim/rng.hpp"

namespace raftsim::bandit {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class Forgetting { None, Discount, Window };

/// How an arm forgets old observations.
template <typename Scalar>
struct ForgettingRule {
  Forgetting kind = Forgetting::None;
  Scalar gamma = Scalar(1);
  std::size_t window = 0;

  static ForgettingRule none() { return {}; }
  static ForgettingRule discount(Scalar g) { return {Forgetting::Discount, g, 0}; }
  static ForgettingRule sliding(std::size_t w) { return {Forgetting::Window, Scalar(1), w}; }
};

/// Ridge-regression state of one arm: A = lambda*I + sum x x^T, b = sum r x.
template <typename Scalar>
class LinearArm {
public:
  struct Sample {
    Vec<Scalar> x;
    Scalar r;
  };

  LinearArm(Eigen::Index dim, Scalar lambda) : lambda_(lambda) {
    if (dim <= 0) throw std::invalid_argument("LinearArm: dimension must be positive");
    if (!(lambda > Scalar(0))) throw std::invalid_argument("LinearArm: lambda must be positive");
    A_ = lambda * Mat<Scalar>::Identity(dim, dim);
    b_ = Vec<Scalar>::Zero(dim);
  }

  Eigen::Index dim() const { return b_.size(); }
  Scalar lambda() const { return lambda_; }
  const Mat<Scalar>& A() const { return A_; }
  const Vec<Scalar>& b() const { return b_; }
  const std::deque<Sample>& history() const { return history_; }

  void reset() {
    A_.setIdentity();
    A_ *= lambda_;
    b_.setZero();
    history_.clear();
  }

  /// Plain rank-one update.
  template <typename Derived>
  void update(const Eigen::MatrixBase<Derived>& x, Scalar r) {
    A_.noalias() += x * x.transpose();
    b_.noalias() += r * x;
  }

  /// A <- gamma*A + (1-gamma)*lambda*I + x x^T ; b <- gamma*b + r*x.
  /// The prior blend keeps A >= lambda*I however long the arm is idle.
  template <typename Derived>
  void discounted_update(const Eigen::MatrixBase<Derived>& x, Scalar r, Scalar gamma) {
    if (!(gamma > Scalar(0)) || gamma > Scalar(1)) throw std::invalid_argument("discounted_update: gamma must be in (0,1]");
    if (gamma != Scalar(1)) {
      A_ *= gamma;
      A_.diagonal().array() += (Scalar(1) - gamma) * lambda_;
      b_ *= gamma;
    }
    update(x, r);
  }

  /// Keeps the last `window` samples and rebuilds (A, b) from them.
  template <typename Derived>
  void windowed_update(const Eigen::MatrixBase<Derived>& x, Scalar r, std::size_t window) {
    if (window == 0) throw std::invalid_argument("windowed_update: window must be >= 1");
    history_.push_back(Sample{x, r});
    while (history_.size() > window) history_.pop_front();
    A_.setIdentity();
    A_ *= lambda_;
    b_.setZero();
    for (const auto& s : history_) update(s.x, s.r);
  }

  template <typename Derived>
  void apply(const ForgettingRule<Scalar>& rule, const Eigen::MatrixBase<Derived>& x, Scalar r) {
    switch (rule.kind) {
      case Forgetting::None: update(x, r); break;
      case Forgetting::Discount: discounted_update(x, r, rule.gamma); break;
      case Forgetting::Window: windowed_update(x, r, rule.window); break;
    }
  }

  /// Direct state assignment, used by snapshot restore.
  void assign(Mat<Scalar> A, Vec<Scalar> b, std::deque<Sample> history) {
    if (A.rows() != dim() || A.cols() != dim() || b.size() != dim()) throw std::invalid_argument("LinearArm::assign: shape");
    A_ = std::move(A);
    b_ = std::move(b);
    history_ = std::move(history);
  }

  Eigen::LLT<Mat<Scalar>> factor() const { return Eigen::LLT<Mat<Scalar>>(A_); }
  Vec<Scalar> theta() const { return factor().solve(b_); }

private:
  Scalar lambda_;
  Mat<Scalar> A_;
  Vec<Scalar> b_;
  std::deque<Sample> history_;
};

/// theta^T x + alpha * sqrt(x^T A^-1 x).
template <typename Scalar, typename Derived>
Scalar ucb_score(const LinearArm<Scalar>& arm, const Eigen::MatrixBase<Derived>& x, Scalar alpha) {
  const Eigen::LLT<Mat<Scalar>> llt = arm.factor();
  const Vec<Scalar> theta = llt.solve(arm.b());
  const Vec<Scalar> v = llt.matrixL().solve(x);
  return theta.dot(x) + alpha * std::sqrt(v.squaredNorm());
}

/// Index of the maximum; ties resolve to the lowest index.
template <typename Scalar>
std::size_t argmax_first(const std::vector<Scalar>& scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

template <typename Scalar, typename Derived>
std::vector<Scalar> ucb_scores(const std::vector<LinearArm<Scalar>>& arms, const Eigen::MatrixBase<Derived>& x,
                               Scalar alpha) {
  std::vector<Scalar> s;
  s.reserve(arms.size());
  for (const auto& a : arms) s.push_back(ucb_score(a, x, alpha));
  return s;
}

template <typename Scalar, typename Derived>
std::size_t linucb_choose(const std::vector<LinearArm<Scalar>>& arms, const Eigen::MatrixBase<Derived>& x, Scalar alpha) {
  return argmax_first(ucb_scores(arms, x, alpha));
}

/// Draw theta ~ N(theta_hat, scale^2 * A^-1). With A = L L^T, L^-T z has
/// covariance A^-1.
template <typename Scalar>
Vec<Scalar> sample_theta(const LinearArm<Scalar>& arm, Scalar scale, RngStream& rng) {
  const Eigen::LLT<Mat<Scalar>> llt = arm.factor();
  Vec<Scalar> z(arm.dim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = static_cast<Scalar>(rng.normal());
  const Vec<Scalar> noise = llt.matrixU().solve(z);
  return llt.solve(arm.b()) + scale * noise;
}

template <typename Scalar, typename Derived>
std::size_t thompson_choose(const std::vector<LinearArm<Scalar>>& arms, const Eigen::MatrixBase<Derived>& x,
                            Scalar scale, RngStream& rng) {
  std::vector<Scalar> s;
  s.reserve(arms.size());
  for (const auto& a : arms) s.push_back(sample_theta(a, scale, rng).dot(x));
  return argmax_first(s);
}

} // namespace raftsim::bandit
