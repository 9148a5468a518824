#include "hdice/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace hdice::oracle {

int TabularQuantities::z_index(double z) const {
  const auto it = std::lower_bound(z_values.begin(), z_values.end(), z);
  if (it == z_values.end() || *it != z) return -1;
  return static_cast<int>(it - z_values.begin());
}

double TabularQuantities::p_sa(int s, int a) const {
  double sum = 0.0;
  for (int k = 0; k < z_count(); ++k) sum += joint[index(s, a, k)];
  return sum;
}

double TabularQuantities::p_sz(int s, int k) const {
  double sum = 0.0;
  for (int a = 0; a < n_actions; ++a) sum += joint[index(s, a, k)];
  return sum;
}

double TabularQuantities::chi(int s, int k) const { return d(s) > 0.0 ? p_sz(s, k) / d(s) : 0.0; }

double TabularQuantities::h(int s, int a, int k) const {
  const double psz = p_sz(s, k);
  return psz > 0.0 ? joint[index(s, a, k)] / psz : 0.0;
}

TabularQuantities exact_quantities(const env::ChainMdpSpec& spec, const Matrix& policy, Weighting weighting,
                                   std::size_t cap) {
  const auto paths = env::chain_enumerate(spec, policy, cap);
  const int S = spec.n_states, A = spec.n_actions, H = spec.horizon;

  std::vector<double> w(static_cast<std::size_t>(H));
  for (int t = 0; t < H; ++t) w[static_cast<std::size_t>(t)] = weighting == Weighting::Uniform ? 1.0 : std::pow(spec.gamma, t);
  double w_total = 0.0;
  for (double x : w) w_total += x;

  // Returns-to-go per path step, and the distinct values among them.
  std::vector<std::vector<double>> rtg(paths.size());
  std::map<double, int> support;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    rtg[i].resize(static_cast<std::size_t>(H));
    double g = 0.0;
    for (int t = H; t-- > 0;) {
      g = paths[i].rewards[static_cast<std::size_t>(t)] + spec.gamma * g;
      rtg[i][static_cast<std::size_t>(t)] = g;
      support.emplace(g, 0);
    }
  }

  TabularQuantities q;
  q.n_states = S;
  q.n_actions = A;
  q.policy = policy;
  for (auto& [z, k] : support) {
    k = static_cast<int>(q.z_values.size());
    q.z_values.push_back(z);
  }
  const int K = q.z_count();
  q.joint.assign(static_cast<std::size_t>(S) * A * K, 0.0);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    for (int t = 0; t < H; ++t) {
      const auto ut = static_cast<std::size_t>(t);
      const int k = support.at(rtg[i][ut]);
      q.joint[q.index(paths[i].states[ut], paths[i].actions[ut], k)] += paths[i].probability * w[ut] / w_total;
    }
  }

  // Independent route for the state marginal: forward propagation of P(s_t).
  std::vector<Vector> p_state(static_cast<std::size_t>(H), Vector::Zero(S));
  for (int s = 0; s < S; ++s) p_state[0](s) = spec.initial[static_cast<std::size_t>(s)];
  for (int t = 0; t + 1 < H; ++t)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        for (int n = 0; n < S; ++n)
          p_state[static_cast<std::size_t>(t) + 1](n) += p_state[static_cast<std::size_t>(t)](s) * policy(s, a) *
                                                         spec.transition(s, a, n);
  q.d = Vector::Zero(S);
  for (int t = 0; t < H; ++t) q.d += p_state[static_cast<std::size_t>(t)] * (w[static_cast<std::size_t>(t)] / w_total);

  // Time-indexed backward induction, then visitation-weighted aggregation.
  Matrix q_t = Matrix::Zero(S, A);
  Vector v_next = Vector::Zero(S);
  Matrix q_acc = Matrix::Zero(S, A);
  Vector mass = Vector::Zero(S);
  for (int t = H; t-- > 0;) {
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        double future = 0.0;
        for (int n = 0; n < S; ++n) future += spec.transition(s, a, n) * v_next(n);
        q_t(s, a) = spec.reward(s, a) + spec.gamma * future;
      }
    const double wt = w[static_cast<std::size_t>(t)] / w_total;
    const Vector& ps = p_state[static_cast<std::size_t>(t)];
    q_acc += (ps * wt).asDiagonal() * q_t;
    mass += ps * wt;
    v_next = (policy.array() * q_t.array()).rowwise().sum();
  }
  q.q = Matrix::Zero(S, A);
  for (int s = 0; s < S; ++s)
    if (mass(s) > 0.0) q.q.row(s) = q_acc.row(s) / mass(s);
  q.v = (policy.array() * q.q.array()).rowwise().sum();
  return q;
}

double verify_eq1(const TabularQuantities& q) {
  double worst = 0.0;
  for (int s = 0; s < q.n_states; ++s) {
    for (int a = 0; a < q.n_actions; ++a) {
      const double psa = q.p_sa(s, a);
      if (psa <= 0.0) continue;
      double lhs = 0.0;
      for (int k = 0; k < q.z_count(); ++k) {
        const double p = q.joint[q.index(s, a, k)];
        if (p <= 0.0) continue;
        const double h = q.h(s, a, k);
        if (h <= 0.0) throw ContractError("hindsight probability vanishes on a visited (s, a, z)");
        lhs += (p / psa) * (1.0 - q.policy(s, a) / h) * q.z_values[static_cast<std::size_t>(k)];
      }
      worst = std::max(worst, std::abs(lhs - (q.q(s, a) - q.v(s))));
    }
  }
  return worst;
}

bool hindsight_positive(const TabularQuantities& q) {
  for (int s = 0; s < q.n_states; ++s)
    for (int k = 0; k < q.z_count(); ++k) {
      if (q.p_sz(s, k) <= 0.0) continue;
      for (int a = 0; a < q.n_actions; ++a)
        if (q.policy(s, a) > 0.0 && q.joint[q.index(s, a, k)] <= 0.0) return false;
    }
  return true;
}

double psi_value(const TabularQuantities& q, PsiMode mode, int s, int k) {
  return mode == PsiMode::Uniform ? 1.0 / static_cast<double>(q.z_count()) : q.chi(s, k);
}

DiceSolution tabular_dice_minimizer(const TabularQuantities& q, PsiMode mode, double bound, long max_iterations,
                                    double tolerance) {
  const std::size_t cells = q.joint.size();
  std::vector<double> target(cells, 0.0);  // linear coefficient d(s) pi(a|s) psi(z)
  DiceSolution sol;
  sol.closed_form.assign(cells, 0.0);
  sol.support.assign(cells, false);
  double l_max = 0.0, l_min = std::numeric_limits<double>::infinity(), largest = 0.0;
  for (int s = 0; s < q.n_states; ++s)
    for (int a = 0; a < q.n_actions; ++a)
      for (int k = 0; k < q.z_count(); ++k) {
        const auto i = q.index(s, a, k);
        target[i] = q.d(s) * q.policy(s, a) * psi_value(q, mode, s, k);
        if (q.joint[i] > 0.0) {
          sol.support[i] = true;
          sol.closed_form[i] = target[i] / q.joint[i];
          largest = std::max(largest, sol.closed_form[i]);
          l_max = std::max(l_max, q.joint[i]);
          l_min = std::min(l_min, q.joint[i]);
        }
      }
  if (l_max <= 0.0) throw ContractError("empty (s, a, z) support");
  sol.bound = bound > 0.0 ? bound : 2.0 * largest;

  // Nesterov's method for strongly convex objectives, projected onto the box.
  const double step = 1.0 / l_max;
  const double root_kappa = std::sqrt(l_max / l_min);
  const double momentum = (root_kappa - 1.0) / (root_kappa + 1.0);
  std::vector<double> x(cells, 0.0), y(cells, 0.0), x_prev(cells, 0.0);
  for (sol.iterations = 0; sol.iterations < max_iterations; ++sol.iterations) {
    double change = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
      const double grad = q.joint[i] * y[i] - target[i];
      x_prev[i] = x[i];
      x[i] = std::clamp(y[i] - step * grad, 0.0, sol.bound);
      change = std::max(change, std::abs(x[i] - x_prev[i]));
    }
    for (std::size_t i = 0; i < cells; ++i) y[i] = x[i] + momentum * (x[i] - x_prev[i]);
    if (change <= tolerance * std::max(1.0, sol.bound)) {
      ++sol.iterations;
      break;
    }
  }
  sol.iterative = x;
  for (std::size_t i = 0; i < cells; ++i)
    if (sol.support[i]) sol.max_deviation = std::max(sol.max_deviation, std::abs(x[i] - sol.closed_form[i]));
  return sol;
}

std::vector<double> direct_ratio_table(const TabularQuantities& q) {
  std::vector<double> out(q.joint.size(), 0.0);
  for (int s = 0; s < q.n_states; ++s)
    for (int a = 0; a < q.n_actions; ++a)
      for (int k = 0; k < q.z_count(); ++k) {
        const auto i = q.index(s, a, k);
        if (q.joint[i] > 0.0) out[i] = q.policy(s, a) / q.h(s, a, k);
      }
  return out;
}

double ratio_path_discrepancy(const TabularQuantities& q) {
  const auto uniform = tabular_dice_minimizer(q, PsiMode::Uniform, 0.0, 0);
  const auto conditional = tabular_dice_minimizer(q, PsiMode::Conditional, 0.0, 0);
  double worst = 0.0;
  for (int s = 0; s < q.n_states; ++s)
    for (int a = 0; a < q.n_actions; ++a)
      for (int k = 0; k < q.z_count(); ++k) {
        const auto i = q.index(s, a, k);
        if (!uniform.support[i]) continue;
        const double via_uniform = uniform.closed_form[i] / psi_value(q, PsiMode::Uniform, s, k) * q.chi(s, k);
        worst = std::max(worst, std::abs(via_uniform - conditional.closed_form[i]));
      }
  return worst;
}

int state_of(const Matrix& observations, Eigen::Index row) {
  Eigen::Index s;
  observations.row(row).maxCoeff(&s);
  return static_cast<int>(s);
}

Matrix one_hot_states(const std::vector<int>& states, int n_states) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(states.size()), n_states);
  for (std::size_t i = 0; i < states.size(); ++i) out(static_cast<Eigen::Index>(i), states[i]) = 1.0;
  return out;
}

namespace {

int require_z(const TabularQuantities& q, double z) {
  const int k = q.z_index(z);
  if (k < 0) throw ContractError("return value outside the tabular support");
  return k;
}

template <typename Prob>
int draw(int n, Rng& rng, Prob&& prob) {
  const double u = rng.uniform();
  double acc = 0.0;
  int last = -1;
  for (int i = 0; i < n; ++i) {
    const double p = prob(i);
    if (p <= 0.0) continue;
    last = i;
    acc += p;
    if (u < acc) return i;
  }
  if (last < 0) throw ContractError("cannot sample from an empty distribution");
  return last;
}

}  // namespace

Vector TabularChi::density(const Matrix& observations, const Vector& z) const {
  Vector out(observations.rows());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const int k = q_.z_index(z(i));
    out(i) = k < 0 ? 0.0 : q_.chi(state_of(observations, i), k);
  }
  return out;
}

Vector TabularChi::sample(const Matrix& observations, Rng& rng) const {
  Vector out(observations.rows());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const int s = state_of(observations, i);
    out(i) = q_.z_values[static_cast<std::size_t>(draw(q_.z_count(), rng, [&](int k) { return q_.chi(s, k); }))];
  }
  return out;
}

Matrix TabularHindsight::sample_actions(const Matrix& observations, const Vector& z, Rng& rng) const {
  Matrix out(observations.rows(), 1);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const int s = state_of(observations, i);
    const int k = require_z(q_, z(i));
    out(i, 0) = draw(q_.n_actions, rng, [&](int a) { return q_.h(s, a, k); });
  }
  return out;
}

TabularDice::TabularDice(const TabularQuantities& q, double c)
    : q_(q), c_(c), logits_(Matrix::Zero(static_cast<Eigen::Index>(q.joint.size()), 1)) {
  if (!(c > 0.0)) throw ContractError("the DICE range bound C must be positive");
}

void TabularDice::assign(const std::vector<double>& phi) {
  require_dims(phi.size() == q_.joint.size(), "phi table size mismatch");
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const double r = std::clamp(phi[i] / c_, 1e-300, std::nextafter(1.0, 0.0));
    logits_(static_cast<Eigen::Index>(i), 0) = std::log(r) - std::log1p(-r);
  }
}

double TabularDice::value(std::size_t cell) const {
  return c_ / (1.0 + std::exp(-logits_(static_cast<Eigen::Index>(cell), 0)));
}

std::size_t TabularDice::cell(const Matrix& observations, const Matrix& actions, const Vector& z,
                              Eigen::Index row) const {
  const int a = static_cast<int>(actions(row, 0));
  if (a < 0 || a >= q_.n_actions) throw DimensionError("tabular action out of range");
  return q_.index(state_of(observations, row), a, require_z(q_, z(row)));
}

Vector TabularDice::evaluate(const Matrix& observations, const Matrix& actions, const Vector& z) const {
  Vector out(observations.rows());
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = value(cell(observations, actions, z, i));
  return out;
}

std::vector<Matrix> TabularDice::backward(const Matrix& observations, const Matrix& actions, const Vector& z,
                                          const Vector& upstream) const {
  Matrix g = Matrix::Zero(logits_.rows(), 1);
  for (Eigen::Index i = 0; i < observations.rows(); ++i) {
    const auto c = cell(observations, actions, z, i);
    const double v = value(c);
    g(static_cast<Eigen::Index>(c), 0) += upstream(i) * v * (1.0 - v / c_);
  }
  return {g};
}

ReplicatedBatch replicate_paths(const env::ChainMdpSpec& spec, const Matrix& policy, long copies) {
  const auto paths = env::chain_enumerate(spec, policy);
  std::vector<int> states;
  std::vector<double> actions, rtg;
  for (const auto& p : paths) {
    const long reps = std::lround(p.probability * static_cast<double>(copies));
    std::vector<double> g(p.rewards.size());
    double acc = 0.0;
    for (std::size_t t = p.rewards.size(); t-- > 0;) g[t] = acc = p.rewards[t] + spec.gamma * acc;
    for (long r = 0; r < reps; ++r)
      for (std::size_t t = 0; t < p.rewards.size(); ++t) {
        states.push_back(p.states[t]);
        actions.push_back(p.actions[t]);
        rtg.push_back(g[t]);
      }
  }
  ReplicatedBatch b;
  b.observations = one_hot_states(states, spec.n_states);
  b.actions = Eigen::Map<const Vector>(actions.data(), static_cast<Eigen::Index>(actions.size()));
  b.returns_to_go = Eigen::Map<const Vector>(rtg.data(), static_cast<Eigen::Index>(rtg.size()));
  return b;
}

}  // namespace hdice::oracle
