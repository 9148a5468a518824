#pragma once

#include <cmath>

#include "hdice/core.hpp"

namespace hdice::nn {

/// Per-feature running mean/variance (Welford, batches merged with Chan's
/// update). apply() standardizes with the sample standard deviation.
template <typename Scalar>
class RunningNormalizer {
 public:
  static constexpr Scalar kStdFloor = Scalar(1e-8);

  RunningNormalizer() = default;
  explicit RunningNormalizer(Eigen::Index features, bool enabled = true)
      : mean_(VectorX<Scalar>::Zero(features)), m2_(VectorX<Scalar>::Zero(features)), enabled_(enabled) {}

  long count() const { return count_; }
  bool enabled() const { return enabled_; }
  Eigen::Index features() const { return mean_.size(); }
  const VectorX<Scalar>& mean() const { return mean_; }
  const VectorX<Scalar>& m2() const { return m2_; }

  VectorX<Scalar> variance() const {
    if (count_ < 2) return VectorX<Scalar>::Ones(features());
    return m2_ / Scalar(count_ - 1);
  }

  VectorX<Scalar> stddev() const { return variance().cwiseSqrt().cwiseMax(kStdFloor); }

  /// Rows are samples.
  void update(const MatrixX<Scalar>& batch) {
    require_dims(batch.cols() == features(), "normalizer feature dimension mismatch");
    if (batch.rows() == 0) return;
    ensure_finite(batch, "normalizer input");
    const auto n_b = batch.rows();
    const VectorX<Scalar> mean_b = batch.colwise().mean().transpose();
    const VectorX<Scalar> m2_b = (batch.rowwise() - mean_b.transpose()).array().square().colwise().sum().transpose();
    const Scalar n_a = Scalar(count_);
    const Scalar n = n_a + Scalar(n_b);
    const VectorX<Scalar> delta = mean_b - mean_;
    mean_ += delta * (Scalar(n_b) / n);
    m2_ += m2_b + delta.cwiseProduct(delta) * (n_a * Scalar(n_b) / n);
    count_ += n_b;
  }

  MatrixX<Scalar> apply(const MatrixX<Scalar>& batch) const {
    require_dims(batch.cols() == features(), "normalizer feature dimension mismatch");
    if (!enabled_ || count_ <= 1) return batch;
    const VectorX<Scalar> sd = stddev();
    MatrixX<Scalar> out = (batch.rowwise() - mean_.transpose()).array().rowwise() / sd.transpose().array();
    ensure_finite(out, "normalizer output");
    return out;
  }

  /// Inverse of apply(); identity under the same conditions.
  MatrixX<Scalar> invert(const MatrixX<Scalar>& batch) const {
    require_dims(batch.cols() == features(), "normalizer feature dimension mismatch");
    if (!enabled_ || count_ <= 1) return batch;
    const VectorX<Scalar> sd = stddev();
    return (batch.array().rowwise() * sd.transpose().array()).matrix().rowwise() + mean_.transpose();
  }

  /// Multiplicative scale that apply() divides by, per feature (1 when apply is identity).
  VectorX<Scalar> scale() const {
    if (!enabled_ || count_ <= 1) return VectorX<Scalar>::Ones(features());
    return stddev();
  }

  static RunningNormalizer restore(long count, VectorX<Scalar> mean, VectorX<Scalar> m2, bool enabled) {
    RunningNormalizer n(mean.size(), enabled);
    n.count_ = count;
    n.mean_ = std::move(mean);
    n.m2_ = std::move(m2);
    return n;
  }

 private:
  long count_ = 0;
  VectorX<Scalar> mean_;
  VectorX<Scalar> m2_;
  bool enabled_ = true;
};

}  // namespace hdice::nn
