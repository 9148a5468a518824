#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hdice/harness/config.hpp"

namespace hdice::harness {

struct MetricsRow {
  long iteration = 0;
  long episodes_elapsed = 0;
  long env_steps = 0;
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  std::optional<double> policy_loss;
  std::optional<double> value_loss;
  std::optional<double> hindsight_loss;
  std::optional<double> return_pred_loss;
  std::optional<double> dice_loss;
  std::optional<double> ratio_mean;
  std::optional<double> ratio_max;
  std::optional<double> ratio_min;
  double wall_ms = 0.0;
};

inline constexpr const char* kCsvHeader =
    "iteration,episodes_elapsed,env_steps,eval_return_mean,eval_return_std,policy_loss,value_loss,"
    "hindsight_loss,return_pred_loss,dice_loss,ratio_mean,ratio_max,ratio_min,wall_ms";

std::string csv_line(const MetricsRow& row);

/// One auxiliary training event.
struct AuxEvent {
  long iteration = 0;
  int batches = 0;        // batches of data consumed
  long steps = 0;         // transitions consumed
  bool weights_changed = false;  // every trained model moved away from its initial draw
};

/// Trained models of a run, kept for probing and snapshots.
struct Models {
  std::unique_ptr<ActorCritic> policy;
  std::unique_ptr<HindsightModel> hindsight;
  std::unique_ptr<ReturnPredictor> return_model;
  std::unique_ptr<DiceModel> dice;
  std::optional<PsiSampler> psi;
};

struct ExperimentResult {
  std::vector<MetricsRow> rows;
  std::vector<AuxEvent> aux_events;
  long saturated_ratios = 0;
  Models models;
  std::optional<std::string> error;  // set when the run aborted
};

/// Runs the training loop in memory: collect, (re)train the auxiliary models
/// when the schedule says so, compute the method's advantages, PPO update,
/// and evaluate every `eval_every` iterations.
ExperimentResult run_experiment(const RunConfig& config);

/// The CSV text of a run: header, rows and an error comment line if it aborted.
std::string metrics_csv(const ExperimentResult& result);

struct RunFiles {
  std::string csv;
  std::string config_echo;
  std::string snapshot;
};

/// Runs the experiment and writes `<out_dir>/<name>.csv`, `.config` and `.snapshot.json`.
RunFiles run_and_write(const RunConfig& config, ExperimentResult* result = nullptr);

/// Evaluates `episodes` stochastic episodes and returns their mean and sample standard deviation.
std::pair<double, double> evaluate_policy(const env::Environment& prototype, const ActingPolicy& policy, int episodes,
                                          std::uint64_t seed);

/// The uniform psi range: the environment's declared returns, or the batch range widened by 1.
std::pair<double, double> psi_range(const RunConfig& config, const env::EnvContract& contract, const Vector& z);

}  // namespace hdice::harness
