#pragma once

#include <cstddef>
#include <vector>

#include "hdice/env/chain.hpp"
#include "hdice/samplers.hpp"

namespace hdice::oracle {

/// How the time steps of a trajectory are weighted when forming the state
/// visitation mixture: equally, or by gamma^t.
enum class Weighting { Uniform, Discounted };

/// Exact tables over the enumerable (s, a, z) support of a chain MDP.
/// z ranges over the distinct returns-to-go, bucketed by exact equality.
struct TabularQuantities {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> z_values;  // sorted ascending
  Matrix policy;                 // pi(a|s)
  Vector d;                      // visitation mixture d(s)
  std::vector<double> joint;     // P(s, a, z), index [(s * A + a) * K + k]
  Matrix q;                      // Q(s,a), from backward induction
  Vector v;                      // V(s)

  int z_count() const { return static_cast<int>(z_values.size()); }
  std::size_t index(int s, int a, int k) const {
    return (static_cast<std::size_t>(s) * n_actions + a) * z_values.size() + k;
  }
  /// Position of an exact return value in z_values, or -1.
  int z_index(double z) const;

  double p_sa(int s, int a) const;
  double p_sz(int s, int k) const;
  double chi(int s, int k) const;        // P(z|s)
  double h(int s, int a, int k) const;   // P(a|s,z); 0 where P(s,z) = 0
};

TabularQuantities exact_quantities(const env::ChainMdpSpec& spec, const Matrix& policy,
                                   Weighting weighting = Weighting::Uniform,
                                   std::size_t cap = env::kMaxEnumeratedPaths);

/// max over (s,a) with d(s) pi(a|s) > 0 of |E[(1 - pi/h) z | s, a] - (Q(s,a) - V(s))|.
/// The identity needs hindsight_positive(q); otherwise the error is generally nonzero.
double verify_eq1(const TabularQuantities& q);

/// True when h(a|s,z) > 0 for every (s, a, z) with pi(a|s) > 0 and chi(z|s) > 0.
bool hindsight_positive(const TabularQuantities& q);

enum class PsiMode { Uniform, Conditional };

/// psi(z|s): 1/K over the return support, or chi(z|s).
double psi_value(const TabularQuantities& q, PsiMode mode, int s, int k);

struct DiceSolution {
  std::vector<double> closed_form;  // d(s) pi(a|s) psi(z) / P(s,a,z), 0 off support
  std::vector<double> iterative;    // projected accelerated gradient descent from zero
  std::vector<bool> support;        // P(s,a,z) > 0
  double bound = 0.0;               // box [0, bound] used by the descent
  double max_deviation = 0.0;       // over the support
  long iterations = 0;
};

/// Minimizes sum P(s,a,z) phi^2 / 2 - sum d(s) pi(a|s) psi(z) phi over
/// phi in [0, bound]^(S x A x K). bound <= 0 picks twice the largest closed-form value.
DiceSolution tabular_dice_minimizer(const TabularQuantities& q, PsiMode mode, double bound = 0.0,
                                    long max_iterations = 1000000, double tolerance = 1e-15);

/// pi(a|s) / h(a|s,z) on the support, 0 elsewhere.
std::vector<double> direct_ratio_table(const TabularQuantities& q);

/// max over the support of |(phi_u / psi_u) chi - phi_c| using the closed forms.
double ratio_path_discrepancy(const TabularQuantities& q);

/// Chain observations are one-hot state rows.
int state_of(const Matrix& observations, Eigen::Index row);
Matrix one_hot_states(const std::vector<int>& states, int n_states);

/// chi(z|s) as an exact probability mass function.
class TabularChi final : public ReturnDistribution {
 public:
  explicit TabularChi(const TabularQuantities& q) : q_(q) {}
  Vector density(const Matrix& observations, const Vector& z) const override;
  Vector sample(const Matrix& observations, Rng& rng) const override;

 private:
  const TabularQuantities& q_;
};

/// h(a|s,z) from the exact joint.
class TabularHindsight final : public HindsightSampler {
 public:
  explicit TabularHindsight(const TabularQuantities& q) : q_(q) {}
  Matrix sample_actions(const Matrix& observations, const Vector& z, Rng& rng) const override;

 private:
  const TabularQuantities& q_;
};

/// phi = C * sigmoid(theta) with one logit per (s, a, z) cell.
class TabularDice final : public DiceFunction {
 public:
  TabularDice(const TabularQuantities& q, double c);
  /// Sets phi to the given table (values clamped strictly inside (0, C)).
  void assign(const std::vector<double>& phi);

  Vector evaluate(const Matrix& observations, const Matrix& actions, const Vector& z) const override;
  std::vector<Matrix> backward(const Matrix& observations, const Matrix& actions, const Vector& z,
                               const Vector& upstream) const override;
  std::vector<Matrix*> parameters() override { return {&logits_}; }
  double upper_bound() const override { return c_; }

  double value(std::size_t cell) const;

 private:
  std::size_t cell(const Matrix& observations, const Matrix& actions, const Vector& z, Eigen::Index row) const;

  const TabularQuantities& q_;
  double c_;
  Matrix logits_;  // cells x 1
};

/// Steps of exactly-weighted trajectories: each path appears round(p * copies)
/// times, giving a batch whose empirical (s, a) law approximates d(s) pi(a|s).
struct ReplicatedBatch {
  Matrix observations;
  Matrix actions;
  Vector returns_to_go;
};
ReplicatedBatch replicate_paths(const env::ChainMdpSpec& spec, const Matrix& policy, long copies);

}  // namespace hdice::oracle
