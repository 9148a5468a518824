#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hdice/core.hpp"

namespace hdice::nn {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)

/// Row-wise log-softmax with max subtraction.
template <typename Derived>
auto log_softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Scalar m = logits.row(r).maxCoeff();
    const Scalar lse = m + std::log((logits.row(r).array() - m).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

/// Row-wise entropy of categorical distributions given their log-probabilities.
template <typename Scalar>
VectorX<Scalar> categorical_entropy_rows(const MatrixX<Scalar>& log_probs) {
  return -(log_probs.array().exp() * log_probs.array()).rowwise().sum().matrix();
}

/// Row-wise diagonal Gaussian log-density.
template <typename Scalar>
VectorX<Scalar> gaussian_log_prob_rows(const MatrixX<Scalar>& mean, const MatrixX<Scalar>& log_std,
                                       const MatrixX<Scalar>& x) {
  require_dims(mean.rows() == x.rows() && mean.cols() == x.cols() && log_std.rows() == x.rows() &&
                   log_std.cols() == x.cols(),
               "gaussian log_prob shape mismatch");
  const auto zsc = (x - mean).array() / log_std.array().exp();
  return (Scalar(-0.5) * zsc.square() - log_std.array() - Scalar(kHalfLog2Pi)).rowwise().sum().matrix();
}

template <typename Scalar>
struct CategoricalHead {
  RowVectorX<Scalar> logits;

  explicit CategoricalHead(RowVectorX<Scalar> l) : logits(std::move(l)) {
    if (logits.size() == 0) throw DimensionError("categorical head needs at least one logit");
    ensure_finite(logits, "categorical logits");
  }

  Eigen::Index size() const { return logits.size(); }

  RowVectorX<Scalar> log_probabilities() const { return log_softmax_rows(logits).row(0); }
  RowVectorX<Scalar> probabilities() const { return log_probabilities().array().exp(); }

  Scalar log_prob(Eigen::Index action) const {
    if (action < 0 || action >= size()) throw DimensionError("categorical action out of range");
    return log_probabilities()(action);
  }

  Scalar entropy() const {
    const RowVectorX<Scalar> lp = log_probabilities();
    return std::max(Scalar(0), -(lp.array().exp() * lp.array()).sum());
  }

  Eigen::Index sample(Rng& rng) const {
    const RowVectorX<Scalar> p = probabilities();
    const double u = rng.uniform();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      acc += static_cast<double>(p(i));
      if (u < acc) return i;
    }
    return p.size() - 1;
  }
};

template <typename Scalar>
struct GaussianHead {
  RowVectorX<Scalar> mean;
  RowVectorX<Scalar> log_std;

  GaussianHead(RowVectorX<Scalar> m, RowVectorX<Scalar> ls) : mean(std::move(m)), log_std(std::move(ls)) {
    require_dims(mean.size() == log_std.size() && mean.size() > 0, "gaussian head shape mismatch");
    log_std = log_std.cwiseMax(Scalar(kLogStdMin)).cwiseMin(Scalar(kLogStdMax));
    ensure_finite(mean, "gaussian mean");
  }

  Eigen::Index size() const { return mean.size(); }

  Scalar log_prob(const RowVectorX<Scalar>& x) const {
    require_dims(x.size() == size(), "gaussian action dimension mismatch");
    const auto zsc = (x - mean).array() / log_std.array().exp();
    return (Scalar(-0.5) * zsc.square() - log_std.array() - Scalar(kHalfLog2Pi)).sum();
  }

  Scalar entropy() const { return (log_std.array() + Scalar(0.5) + Scalar(kHalfLog2Pi)).sum(); }

  RowVectorX<Scalar> sample(Rng& rng) const {
    RowVectorX<Scalar> x(size());
    for (Eigen::Index i = 0; i < size(); ++i) x(i) = mean(i) + std::exp(log_std(i)) * Scalar(rng.normal());
    return x;
  }
};

}  // namespace hdice::nn
