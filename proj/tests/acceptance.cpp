// One PASS/FAIL line per acceptance criterion. Tolerances are fixed here.
// Optional arguments select criteria by number (6 needs 5). Exit status is
// the number of failing criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hdice/dice.hpp"
#include "hdice/env/chain.hpp"
#include "hdice/harness/experiment.hpp"
#include "hdice/harness/probe.hpp"
#include "hdice/oracle.hpp"

using namespace hdice;
using namespace hdice::harness;

namespace {

constexpr double kEq1Tol = 1e-10;
constexpr double kMinimizerTol = 1e-6;
constexpr double kRatioPathTol = 1e-10;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradFloor = 1e-6;
constexpr double kGradStep = 1e-5;
constexpr double kTableRatioTol = 0.0005;
constexpr long kGridIterations = 100;  // 5000 episodes at 50 per update
constexpr int kSeeds = 3;
constexpr double kDenseFraction = 0.9;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << x;
  return os.str();
}

std::vector<int> g_selected;

int report(int id, const std::string& name, const std::function<Outcome()>& check) {
  if (!g_selected.empty() && std::find(g_selected.begin(), g_selected.end(), id) == g_selected.end()) return 0;
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (o.detail.ends_with("; ")) o.detail.resize(o.detail.size() - 2);
  std::cout << "criterion " << id << " [" << name << "]: " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << " ("
            << fmt(secs, 3) << " s)" << std::endl;
  return o.pass ? 0 : 1;
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Ten chain instances with up to 6 states and horizon 5, all satisfying the
// hindsight positivity condition the identity relies on.
std::vector<std::pair<env::ChainMdpSpec, Matrix>> chain_suite() {
  Rng rng(20240611);
  const int sizes[][3] = {{2, 2, 2}, {3, 2, 3}, {2, 3, 4}, {4, 2, 3}, {3, 3, 3},
                          {5, 2, 3}, {6, 2, 3}, {2, 2, 5}, {3, 2, 4}, {4, 3, 2}};
  std::vector<std::pair<env::ChainMdpSpec, Matrix>> out;
  int i = 0;
  for (const auto& [s, a, h] : sizes) {
    const double gamma = i++ % 2 ? 0.9 : 1.0;
    auto spec = env::random_positive_chain(rng, s, a, h, gamma);
    out.emplace_back(spec, env::random_policy(rng, s, a));
  }
  return out;
}

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = scale * rng.normal();
  return m;
}

Matrix random_actions(Rng& rng, Eigen::Index n, std::size_t k) {
  Matrix a(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) a(i, 0) = static_cast<double>(rng.index(k));
  return a;
}

struct GradStats {
  long compared = 0;
  double worst = 0.0;
};

void compare_gradients(const std::vector<Matrix*>& params, const std::vector<Matrix>& analytic,
                       const std::function<double()>& loss, GradStats& stats) {
  for (std::size_t p = 0; p < params.size(); ++p)
    for (Eigen::Index i = 0; i < params[p]->size(); ++i) {
      const double orig = (*params[p])(i);
      (*params[p])(i) = orig + kGradStep;
      const double fp = loss();
      (*params[p])(i) = orig - kGradStep;
      const double fm = loss();
      (*params[p])(i) = orig;
      const double fd = (fp - fm) / (2 * kGradStep);
      const double an = analytic[p](i);
      const double scale = std::max(std::abs(fd), std::abs(an));
      if (scale < kGradFloor) continue;
      stats.worst = std::max(stats.worst, std::abs(an - fd) / scale);
      ++stats.compared;
    }
}

// Gaussian chi with a fixed mean and spread, used to drive the dice loss.
class FixedChi final : public ReturnDistribution {
 public:
  Vector density(const Matrix&, const Vector& z) const override {
    return (-(z.array() + 20.0).square() / 1800.0).exp() / (30.0 * std::sqrt(2 * std::numbers::pi));
  }
  Vector sample(const Matrix& obs, Rng& rng) const override {
    Vector z(obs.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = -20.0 + 30.0 * rng.normal();
    return z;
  }
};

class UniformHindsight final : public HindsightSampler {
 public:
  explicit UniformHindsight(std::size_t k) : k_(k) {}
  Matrix sample_actions(const Matrix& obs, const Vector&, Rng& rng) const override {
    return random_actions(rng, obs.rows(), k_);
  }

 private:
  std::size_t k_;
};

struct SeedRuns {
  std::vector<double> finals;
  std::vector<ExperimentResult> results;
};

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double pstdev(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

SeedRuns run_seeds(const std::string& env, Method method) {
  SeedRuns out;
  for (int seed = 0; seed < kSeeds; ++seed) {
    RunConfig c = default_config(env, method);
    c.seed = static_cast<std::uint64_t>(seed);
    c.iterations = kGridIterations;
    c.eval_every = 5;
    ExperimentResult r = run_experiment(c);
    if (r.error) throw NumericError(std::string(to_string(method)) + " seed " + std::to_string(seed) + ": " + *r.error);
    out.finals.push_back(r.rows.back().eval_return_mean);
    out.results.push_back(std::move(r));
  }
  return out;
}

// Probe state on the bundled v1 map: Left steps into fire, Right onto the last diamond.
constexpr const char* kProbeState = R"({"cell": [1, 2], "remaining": [0, 0, 0, 1]})";

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  std::cout.setf(std::ios::unitbuf);
  for (int i = 1; i < argc; ++i) g_selected.push_back(std::stoi(argv[i]));
  int failures = 0;

  failures += report(1, "advantage identity on chain MDPs", [] {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    int instances = 0;
    for (const auto& [spec, pi] : chain_suite()) {
      worst = std::max(worst, oracle::verify_eq1(oracle::exact_quantities(spec, pi)));
      ++instances;
    }
    const double secs = elapsed_since(t0);
    return Outcome{instances >= 10 && worst < kEq1Tol && secs < 10.0,
                   std::to_string(instances) + " instances, max error " + fmt(worst) + " < " + fmt(kEq1Tol) +
                       ", runtime " + fmt(secs, 3) + " s < 10 s"};
  });

  failures += report(2, "tabular minimizer matches the closed form", [] {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0, paths = 0.0;
    for (const auto& [spec, pi] : chain_suite()) {
      const auto q = oracle::exact_quantities(spec, pi);
      for (auto mode : {oracle::PsiMode::Uniform, oracle::PsiMode::Conditional})
        worst = std::max(worst, oracle::tabular_dice_minimizer(q, mode).max_deviation);
      paths = std::max(paths, oracle::ratio_path_discrepancy(q));
    }
    const double secs = elapsed_since(t0);
    return Outcome{worst < kMinimizerTol && paths < kRatioPathTol && secs < 30.0,
                   "max deviation " + fmt(worst) + " < " + fmt(kMinimizerTol) + ", ratio paths " + fmt(paths) + " < " +
                       fmt(kRatioPathTol) + ", runtime " + fmt(secs, 3) + " s < 30 s"};
  });

  failures += report(3, "gradient fidelity", [] {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(7);
    GradStats stats;
    int configs = 0;
    for (int trial = 0; trial < 20; ++trial, ++configs) {  // MLP forward
      const Eigen::Index in = 1 + static_cast<Eigen::Index>(rng.index(4));
      const Eigen::Index hid = 2 + static_cast<Eigen::Index>(rng.index(6));
      const Eigen::Index out = 2 + static_cast<Eigen::Index>(rng.index(3));
      auto t = nn::OutputTransform<double>::identity();
      if (trial % 3 == 1) t = nn::OutputTransform<double>::sigmoid_scaled(0.5 + trial % 7);
      if (trial % 3 == 2) t = nn::OutputTransform<double>::log_std_clamp(out / 2, -3.0, 3.0);
      nn::Mlp<double> net({in, hid, hid, out}, t, 100 + static_cast<std::uint64_t>(trial));
      const Matrix x = random_matrix(rng, 3, in);
      const Matrix up = random_matrix(rng, 3, out);
      nn::Mlp<double>::Cache cache;
      net.forward(x, cache);
      const auto g = net.backward(cache, up);
      compare_gradients(net.parameters(), g.params, [&] { return (net.forward(x).array() * up.array()).sum(); }, stats);
    }
    for (int trial = 0; trial < 20; ++trial, ++configs) {  // PPO surrogate
      PpoConfig cfg;
      cfg.entropy_coef = 0.01 * (trial % 5);
      const bool discrete = trial % 2 == 0;
      const auto space = discrete ? env::ActionSpace::discrete(3 + trial % 3) : env::ActionSpace::continuous(2, -1, 1);
      ActorCritic model(3, space, {8, 8}, discrete, 200 + static_cast<std::uint64_t>(trial));
      const Matrix obs = random_matrix(rng, 5, 3);
      const Matrix act = discrete ? random_actions(rng, 5, static_cast<std::size_t>(space.size())) : random_matrix(rng, 5, 2, 0.5);
      const Vector old_lp = model.log_probs(obs, act) + random_matrix(rng, 5, 1, 0.3).col(0);
      const Vector adv = random_matrix(rng, 5, 1).col(0);
      const Vector targets = random_matrix(rng, 5, 1).col(0);
      const Vector* tp = discrete ? &targets : nullptr;
      const auto loss = ppo_loss(model, obs, act, old_lp, adv, tp, cfg);
      compare_gradients(model.parameters(), loss.grads,
                        [&] { return ppo_loss(model, obs, act, old_lp, adv, tp, cfg).total; }, stats);
    }
    for (int trial = 0; trial < 20; ++trial, ++configs) {  // hindsight likelihood
      const bool discrete = trial % 2 == 0;
      const auto space = discrete ? env::ActionSpace::discrete(4) : env::ActionSpace::continuous(2, -1, 1);
      HindsightModel h(3, space, 300 + static_cast<std::uint64_t>(trial), {8, 8});
      const Matrix obs = random_matrix(rng, 6, 3);
      const Vector z = random_matrix(rng, 6, 1, 50).col(0);
      h.fit_normalizer(z);
      const Matrix act = discrete ? random_actions(rng, 6, 4) : random_matrix(rng, 6, 2, 0.5);
      const auto loss = h.nll(obs, z, act);
      compare_gradients(h.parameters(), loss.grads, [&] { return h.nll(obs, z, act).value; }, stats);
    }
    for (int trial = 0; trial < 20; ++trial, ++configs) {  // return likelihood
      ReturnPredictor chi(3, 400 + static_cast<std::uint64_t>(trial), trial % 2 == 0, {8, 8});
      const Matrix obs = random_matrix(rng, 6, 3);
      const Vector z = random_matrix(rng, 6, 1, 40).col(0);
      chi.fit_normalizer(z);
      const auto loss = chi.nll(obs, z);
      compare_gradients(chi.parameters(), loss.grads, [&] { return chi.nll(obs, z).value; }, stats);
    }
    for (int trial = 0; trial < 20; ++trial, ++configs) {  // dice objective
      DiceModel phi(3, env::ActionSpace::discrete(4), 0.5 + trial % 4, 500 + static_cast<std::uint64_t>(trial), {8, 8});
      const Matrix obs = random_matrix(rng, 7, 3);
      const Matrix act = random_actions(rng, 7, 4);
      FixedChi chi;
      UniformHindsight h(4);
      phi.fit_normalizer(chi.sample(obs, rng));
      const auto psi = trial % 2 ? PsiSampler::uniform(-100, 69) : PsiSampler::conditional();
      const DiceSamples samples = draw_dice_samples(obs, act, chi, h, psi, rng);
      const auto loss = dice_objective(phi, samples);
      compare_gradients(phi.parameters(), loss.grads, [&] { return dice_objective(phi, samples).value; }, stats);
    }
    const double secs = elapsed_since(t0);
    return Outcome{configs == 100 && stats.worst < kGradRelTol && secs < 60.0,
                   std::to_string(configs) + " configurations, " + std::to_string(stats.compared) +
                       " entries, max relative error " + fmt(stats.worst) + " < " + fmt(kGradRelTol) + ", runtime " +
                       fmt(secs, 3) + " s < 60 s"};
  });

  failures += report(4, "direct ratio arithmetic", [] {
    const double r = direct_ratio(0.002, 0.349);
    return Outcome{std::abs(r - 0.006) <= kTableRatioTol,
                   "0.002 / 0.349 = " + fmt(r) + ", |r - 0.006| = " + fmt(std::abs(r - 0.006)) + " <= " + fmt(kTableRatioTol)};
  });

  // The learning comparison and the probe share the same runs.
  std::vector<std::pair<Method, SeedRuns>> grid;
  failures += report(5, "GridWorld-v1 learning ordering", [&] {
    for (auto m : {Method::Ppo, Method::PpoHca, Method::PpoHcaClip, Method::HDice})
      grid.emplace_back(m, run_seeds("gridworld-v1+delayed", m));
    std::string detail;
    double mean_of[4], std_of[4];
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto& runs = grid[i].second;
      mean_of[i] = mean(runs.finals);
      std_of[i] = pstdev(runs.finals);
      detail += std::string(to_string(grid[i].first)) + " " + fmt(mean_of[i]) + " +- " + fmt(std_of[i]) + "; ";
    }
    const bool beats_ppo = mean_of[3] > mean_of[0];
    const bool beats_hca = mean_of[3] > mean_of[1];
    const bool hca_widest = std_of[1] >= *std::max_element(std_of, std_of + 4);
    detail += std::string("hdice > ppo: ") + (beats_ppo ? "yes" : "no") + ", hdice > ppo-hca: " +
              (beats_hca ? "yes" : "no") + ", ppo-hca largest std: " + (hca_widest ? "yes" : "no");
    return Outcome{beats_ppo && beats_hca && hca_widest, detail};
  });

  failures += report(6, "probe trend", [&] {
    if (grid.empty()) return Outcome{false, "no GridWorld-v1 runs"};
    auto& hd = grid.back().second;
    std::size_t pick = hd.finals.size();
    for (std::size_t i = 0; i < hd.finals.size(); ++i)
      if (hd.finals[i] > 0.0) {
        pick = i;
        break;
      }
    if (pick == hd.finals.size()) return Outcome{false, "no H-DICE run reached a positive return"};
    Snapshot snap;
    snap.env = "gridworld-v1+delayed";
    snap.method = Method::HDice;
    snap.models = std::move(hd.results[pick].models);
    const Vector obs = parse_probe_state(kProbeState, snap.env);
    const auto actions = parse_probe_actions("left,right", snap.models.policy->action_space());
    const auto rows = probe_state(snap, obs, actions, {-100.0, 69.0});
    // rows: (Left, -100), (Left, 69), (Right, -100), (Right, 69)
    const bool left = rows[0].h > rows[1].h;
    const bool right = rows[3].h > rows[2].h;
    auto spread = [&](auto field) {
      double lo = 1e300, hi = 0.0;
      for (const auto& r : rows) lo = std::min(lo, field(r)), hi = std::max(hi, field(r));
      return hi / lo;
    };
    const double s_hdice = spread([](const ProbeRow& r) { return r.hdice; });
    const double s_direct = spread([](const ProbeRow& r) { return r.direct; });
    std::ostringstream table;
    for (const auto& r : rows)
      table << r.action_name << "@" << r.z << " pi " << fmt(r.pi, 3) << " h " << fmt(r.h, 3) << " direct "
            << fmt(r.direct, 3) << " hdice " << fmt(r.hdice, 3) << "; ";
    return Outcome{left && right && s_hdice < s_direct,
                   "seed " + std::to_string(pick) + ": " + table.str() + "h(Left|-100) > h(Left|69): " +
                       (left ? "yes" : "no") + ", h(Right|69) > h(Right|-100): " + (right ? "yes" : "no") +
                       ", spread hdice " + fmt(s_hdice) + " vs direct " + fmt(s_direct)};
  });

  failures += report(7, "output ranges", [] {
    Rng rng(11);
    long bad_phi = 0, bad_clip = 0, queries = 0;
    for (double c : {0.5, 1.0, 2.0, 10.0}) {
      DiceModel phi(3, env::ActionSpace::discrete(4), c, 42);
      phi.fit_normalizer(Vector{{-1.0, 1.0}});
      for (auto* p : phi.parameters()) *p *= 20.0;  // drive the sigmoid toward saturation
      const Eigen::Index n = 10000;
      const Vector out = phi.evaluate(random_matrix(rng, n, 3, 30.0), random_actions(rng, n, 4),
                                      random_matrix(rng, n, 1, 1e3).col(0));
      bad_phi += (out.array() <= 0.0 || out.array() >= c).count();
      queries += n;
    }
    const Eigen::Index n = 10000;
    const Vector lpi = -random_matrix(rng, n, 1, 5.0).cwiseAbs().col(0);
    const Vector lh = -random_matrix(rng, n, 1, 5.0).cwiseAbs().col(0);
    const auto clipped = hca_advantage_from_log_probs(lpi, lh, random_matrix(rng, n, 1, 100).col(0), true);
    bad_clip = (clipped.ratios.array() < 0.0 || clipped.ratios.array() > 1.0).count();
    return Outcome{bad_phi == 0 && bad_clip == 0, std::to_string(queries) + " phi queries outside (0, C): " +
                                                      std::to_string(bad_phi) + "; " + std::to_string(n) +
                                                      " clipped ratios outside [0, 1]: " + std::to_string(bad_clip)};
  });

  failures += report(8, "off-policy schedules on v2", [] {
    constexpr long iterations = 20;
    std::string detail;
    bool ok = true;
    for (int n : {1, 5, 10}) {
      RunConfig c = default_config("gridworld-v2+delayed", Method::HDice);
      c.iterations = iterations;
      c.eval_every = iterations;
      c.aux_schedule = n;
      const auto r = run_experiment(c);
      const bool batches_ok = std::all_of(r.aux_events.begin(), r.aux_events.end(),
                                          [&](const AuxEvent& e) { return e.batches == n && e.iteration % n == 0; });
      const bool this_ok = !r.error && r.aux_events.size() == static_cast<std::size_t>(iterations / n) && batches_ok;
      ok = ok && this_ok;
      detail += "n=" + std::to_string(n) + ": " + std::to_string(r.aux_events.size()) + " events (expected " +
                std::to_string(iterations / n) + ")" + (r.error ? ", aborted: " + *r.error : "") +
                (batches_ok ? "" : ", wrong batch count") + "; ";
    }
    return Outcome{ok, detail};
  });

  failures += report(9, "dense rewards", [] {
    RunConfig base = default_config("gridworld-v1", Method::Ppo);
    base.iterations = kGridIterations;
    base.eval_every = 5;
    const auto ppo = run_experiment(base);
    RunConfig hc = default_config("gridworld-v1", Method::HDice);
    hc.iterations = kGridIterations;
    hc.eval_every = 5;
    const auto hd = run_experiment(hc);
    if (ppo.error || hd.error) return Outcome{false, "run aborted"};
    auto best = [](const ExperimentResult& r) {
      double b = -1e300;
      for (const auto& row : r.rows) b = std::max(b, row.eval_return_mean);
      return b;
    };
    const double ppo_best = best(ppo), hd_best = best(hd);
    const double threshold = kDenseFraction * ppo_best;
    return Outcome{ppo_best > 0.0 && ppo_best > threshold && hd_best > threshold,
                   "PPO best " + fmt(ppo_best) + ", H-DICE best " + fmt(hd_best) + ", threshold 0.9 x PPO best = " +
                       fmt(threshold)};
  });

  failures += report(10, "determinism", [] {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "hdice_acceptance_determinism";
    fs::remove_all(root);
    bool same = true;
    std::string detail;
    for (auto method : {Method::Ppo, Method::PpoHca, Method::PpoHcaClip, Method::HDice}) {
      std::string texts[2];
      for (int rep = 0; rep < 2; ++rep) {
        RunConfig c = default_config("gridworld-v1+delayed", method);
        c.seed = 3;
        c.iterations = 5;
        c.out_dir = (root / std::to_string(rep)).string();
        texts[rep] = read_file(run_and_write(c).csv);
      }
      const bool eq = !texts[0].empty() && texts[0] == texts[1];
      same = same && eq;
      detail += std::string(to_string(method)) + (eq ? " identical" : " DIFFERS") + " (" +
                std::to_string(texts[0].size()) + " bytes); ";
    }
    fs::remove_all(root);
    return Outcome{same, detail};
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures;
}
