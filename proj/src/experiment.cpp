#include "hdice/harness/experiment.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include "hdice/harness/probe.hpp"

namespace hdice::harness {

namespace {

std::string field(const std::optional<double>& x) { return x ? format_double(*x) : std::string(); }

std::vector<Matrix> copy_params(std::vector<Matrix*> params) {
  std::vector<Matrix> out;
  for (const auto* p : params) out.push_back(*p);
  return out;
}

bool any_changed(std::vector<Matrix*> params, const std::vector<Matrix>& initial) {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (*params[i] != initial[i]) return true;
  return false;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

// Stream ids for the per-run random streams.
enum Stream : std::uint64_t { kPolicyInit = 1, kCollect = 2, kPpoShuffle = 3, kAuxTraining = 4, kEval = 5 };

}  // namespace

std::string csv_line(const MetricsRow& r) {
  std::string out = std::to_string(r.iteration) + "," + std::to_string(r.episodes_elapsed) + "," +
                    std::to_string(r.env_steps) + "," + format_double(r.eval_return_mean) + "," +
                    format_double(r.eval_return_std);
  for (const auto* x : {&r.policy_loss, &r.value_loss, &r.hindsight_loss, &r.return_pred_loss, &r.dice_loss,
                        &r.ratio_mean, &r.ratio_max, &r.ratio_min})
    out += "," + field(*x);
  out += "," + format_double(r.wall_ms);
  return out;
}

std::pair<double, double> evaluate_policy(const env::Environment& prototype, const ActingPolicy& policy, int episodes,
                                          std::uint64_t seed) {
  const RolloutBatch b = collect(prototype, policy, Budget::episodes(episodes), seed);
  const Vector& r = b.episode_rewards;
  const double mean = r.mean();
  const double sd = r.size() > 1 ? std::sqrt((r.array() - mean).square().sum() / static_cast<double>(r.size() - 1)) : 0.0;
  return {mean, sd};
}

std::pair<double, double> psi_range(const RunConfig& config, const env::EnvContract& contract, const Vector& z) {
  if (config.psi_lo) return {*config.psi_lo, *config.psi_hi};
  if (contract.return_range) return {contract.return_range->lo, contract.return_range->hi};
  return {z.minCoeff() - 1.0, z.maxCoeff() + 1.0};
}

ExperimentResult run_experiment(const RunConfig& config) {
  config.validate();
  ExperimentResult result;
  const auto proto = env::make_environment(config.env);
  const auto& contract = proto->contract();
  const auto obs_dim = contract.observation_dim;
  const auto& space = contract.action_space;
  const Method method = config.method;
  const std::uint64_t seed = config.seed;

  auto& m = result.models;
  m.policy = std::make_unique<ActorCritic>(obs_dim, space, config.policy_hidden, method == Method::Ppo,
                                           mix_seed(seed, kPolicyInit));
  nn::Adam<double> optimizer({config.ppo.lr});
  Rng ppo_rng(mix_seed(seed, kPpoShuffle));
  Rng aux_rng(mix_seed(seed, kAuxTraining));
  AuxSchedule schedule(config.aux_schedule);

  long episodes = 0, steps = 0;
  long iteration = 0;
  try {
    for (iteration = 1; iteration <= config.iterations; ++iteration) {
      const auto t0 = std::chrono::steady_clock::now();
      RolloutBatch batch = collect(*proto, *m.policy, config.budget, mix_seed(mix_seed(seed, kCollect), iteration));
      compute_returns(batch, config.ppo.gamma);
      episodes += static_cast<long>(batch.trajectory_count());
      steps += batch.size();

      MetricsRow row;
      row.iteration = iteration;
      row.episodes_elapsed = episodes;
      row.env_steps = steps;

      if (method == Method::Ppo) {
        const auto gae = gae_advantages(batch, *m.policy, config.ppo.gamma, config.ppo.gae_lambda);
        const auto stats =
            ppo_update(*m.policy, optimizer, batch, gae.advantages, &gae.value_targets, config.ppo, ppo_rng);
        row.policy_loss = stats.policy_loss;
        row.value_loss = stats.value_loss;
      } else {
        auto decision = schedule.push(iteration, batch);
        if (decision.train_now) {
          const RolloutBatch& data = decision.data;
          const Vector z = conditioning_returns(data, config.condition_on);
          const std::uint64_t event_seed = mix_seed(seed, 1000 + result.aux_events.size());
          AuxEvent event{iteration, decision.batches, data.size(), true};

          m.hindsight = std::make_unique<HindsightModel>(obs_dim, space, mix_seed(event_seed, 0));
          const auto h_init = copy_params(m.hindsight->parameters());
          row.hindsight_loss =
              train_hindsight(*m.hindsight, data.observations, data.actions, z, config.hindsight, aux_rng).final_loss;
          event.weights_changed = any_changed(m.hindsight->parameters(), h_init);

          if (method == Method::HDice) {
            m.return_model = std::make_unique<ReturnPredictor>(obs_dim, mix_seed(event_seed, 1),
                                                               config.normalize_return_targets);
            const auto r_init = copy_params(m.return_model->parameters());
            row.return_pred_loss =
                train_return_predictor(*m.return_model, data.observations, z, config.return_model, aux_rng).final_loss;

            if (config.psi == PsiSampler::Kind::Conditional) {
              m.psi = PsiSampler::conditional();
            } else {
              const auto [lo, hi] = psi_range(config, contract, z);
              m.psi = PsiSampler::uniform(lo, hi);
            }
            m.dice = std::make_unique<DiceModel>(obs_dim, space, config.dice_c, mix_seed(event_seed, 2));
            m.dice->fit_normalizer(z);
            const auto d_init = copy_params(m.dice->parameters());
            row.dice_loss = train_dice(*m.dice, *m.return_model, *m.hindsight, data.observations, data.actions,
                                       *m.psi, config.dice, aux_rng)
                                .final_loss;
            event.weights_changed = event.weights_changed && any_changed(m.return_model->parameters(), r_init) &&
                                    any_changed(m.dice->parameters(), d_init);
          }
          result.aux_events.push_back(event);
        }

        // The policy waits until the first auxiliary models exist.
        const bool ready = m.hindsight && (method != Method::HDice || m.dice);
        if (ready) {
          const Vector z = conditioning_returns(batch, config.condition_on);
          RatioResult ratios =
              method == Method::HDice
                  ? hdice_advantage(*m.dice, *m.return_model, batch.observations, batch.actions, z, *m.psi)
                  : hca_advantage(*m.policy, *m.hindsight, batch, z, method == Method::PpoHcaClip, config.ratio_cap);
          result.saturated_ratios += ratios.saturated;
          row.ratio_mean = ratios.ratios.mean();
          row.ratio_max = ratios.ratios.maxCoeff();
          row.ratio_min = ratios.ratios.minCoeff();
          const auto stats =
              ppo_update(*m.policy, optimizer, batch, ratios.advantages, nullptr, config.ppo, ppo_rng);
          row.policy_loss = stats.policy_loss;
        }
      }

      if (iteration % config.eval_every == 0) {
        const auto [mean, sd] = evaluate_policy(*proto, *m.policy, config.eval_episodes,
                                                mix_seed(mix_seed(seed, kEval), iteration));
        row.eval_return_mean = mean;
        row.eval_return_std = sd;
        if (config.log_wall_time)
          row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        result.rows.push_back(row);
      }
    }
  } catch (const std::exception& e) {
    result.error = "# error at iteration " + std::to_string(iteration) + ": " + e.what();
  }
  return result;
}

std::string metrics_csv(const ExperimentResult& result) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : result.rows) out += csv_line(r) + "\n";
  if (result.error) {
    std::string msg = *result.error;
    for (auto& ch : msg)
      if (ch == '\n') ch = ' ';
    out += msg + "\n";
  }
  return out;
}

RunFiles run_and_write(const RunConfig& config, ExperimentResult* out) {
  namespace fs = std::filesystem;
  const fs::path dir(config.out_dir);
  fs::create_directories(dir);
  RunFiles files{(dir / (config.name() + ".csv")).string(), (dir / (config.name() + ".config")).string(),
                 (dir / (config.name() + ".snapshot.json")).string()};
  write_file(files.config_echo, echo_config(config));
  ExperimentResult result = run_experiment(config);
  write_file(files.csv, metrics_csv(result));
  write_file(files.snapshot, snapshot_json(config, result.models));
  if (out) *out = std::move(result);
  return files;
}

}  // namespace hdice::harness
