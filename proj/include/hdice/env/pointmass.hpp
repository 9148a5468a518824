#pragma once

#include "hdice/env/environment.hpp"

namespace hdice::env {

/// 1-D point mass on [-1, 1] steered toward x = 0.8. Reward -|x - target| per
/// step; episodes always run to the horizon.
class PointMassEnv final : public Environment {
 public:
  static constexpr double kTarget = 0.8;
  static constexpr double kGain = 0.1;
  static constexpr int kHorizon = 30;

  PointMassEnv();

  const EnvContract& contract() const override { return contract_; }
  Vector reset(std::uint64_t seed) override;
  StepResult step(const Vector& action) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<PointMassEnv>(*this); }
  std::string id() const override { return "pointmass"; }

  double position() const { return x_; }

 private:
  EnvContract contract_;
  double x_ = 0.0;
  int steps_ = 0;
  bool finished_ = true;
};

}  // namespace hdice::env
