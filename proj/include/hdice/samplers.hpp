#pragma once

#include <vector>

#include "hdice/core.hpp"

namespace hdice {

/// Conditional return distribution chi(z|s).
class ReturnDistribution {
 public:
  virtual ~ReturnDistribution() = default;
  /// Density (or mass, for tabular models) of raw returns `z` given each observation row.
  virtual Vector density(const Matrix& observations, const Vector& z) const = 0;
  /// One raw return per observation row.
  virtual Vector sample(const Matrix& observations, Rng& rng) const = 0;
};

/// Return-conditioned action distribution h(a|s,z).
class HindsightSampler {
 public:
  virtual ~HindsightSampler() = default;
  virtual Matrix sample_actions(const Matrix& observations, const Vector& z, Rng& rng) const = 0;
};

/// A function phi(s, a, z) with values in (0, upper_bound()).
class DiceFunction {
 public:
  virtual ~DiceFunction() = default;
  virtual Vector evaluate(const Matrix& observations, const Matrix& actions, const Vector& z) const = 0;
  /// Gradient of sum_i upstream_i * phi(s_i, a_i, z_i) in parameters() order.
  virtual std::vector<Matrix> backward(const Matrix& observations, const Matrix& actions, const Vector& z,
                                       const Vector& upstream) const = 0;
  virtual std::vector<Matrix*> parameters() = 0;
  virtual double upper_bound() const = 0;
};

}  // namespace hdice
