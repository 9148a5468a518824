#include <doctest.h>

#include "hdice/env/chain.hpp"
#include "hdice/oracle.hpp"

using namespace hdice;
using namespace hdice::oracle;

namespace {

// Ten instances spanning the size limits: up to 6 states and horizon 5.
std::vector<std::pair<env::ChainMdpSpec, Matrix>> suite(std::uint64_t seed) {
  Rng rng(seed);
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

Matrix one_hot_policy(int n_states, int n_actions, Rng& rng) {
  Matrix pi = Matrix::Zero(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) pi(s, static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n_actions)))) = 1.0;
  return pi;
}

}  // namespace

TEST_CASE("advantage identity holds exactly on the randomized suite") {
  for (const auto& [spec, pi] : suite(1)) {
    const auto q = exact_quantities(spec, pi);
    CHECK(hindsight_positive(q));
    CHECK(verify_eq1(q) < 1e-10);
    const auto qd = exact_quantities(spec, pi, Weighting::Discounted);
    CHECK(verify_eq1(qd) < 1e-10);
  }
}

TEST_CASE("advantage identity fails when an action cannot reach a return of its state") {
  // The identity needs h > 0 wherever pi > 0; action-dependent rewards break that.
  Rng rng(13);
  const auto spec = env::random_chain(rng, 2, 2, 2, 1.0);
  const auto q = exact_quantities(spec, env::random_policy(rng, 2, 2));
  CHECK_FALSE(hindsight_positive(q));
  CHECK(verify_eq1(q) > 1e-3);
}

TEST_CASE("deterministic policy gives zero error on both sides") {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const auto spec = env::random_chain(rng, 3, 3, 3, 0.9);
    const auto q = exact_quantities(spec, one_hot_policy(3, 3, rng));
    CHECK(verify_eq1(q) < 1e-12);
  }
}

TEST_CASE("zero discount reduces to a one-step identity") {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const auto spec = env::random_positive_chain(rng, 3, 2, 3, 0.0);
    const auto q = exact_quantities(spec, env::random_policy(rng, 3, 2));
    CHECK(verify_eq1(q) < 1e-12);
  }
}

TEST_CASE("tabular minimizer converges to the closed form in both psi modes") {
  for (const auto& [spec, pi] : suite(1)) {
    const auto q = exact_quantities(spec, pi);
    for (auto mode : {PsiMode::Uniform, PsiMode::Conditional}) {
      const auto sol = tabular_dice_minimizer(q, mode);
      CHECK(sol.max_deviation < 1e-6);
    }
    CHECK(ratio_path_discrepancy(q) < 1e-10);
  }
}

TEST_CASE("closed form against direct ratios") {
  for (const auto& [spec, pi] : suite(4)) {
    const auto q = exact_quantities(spec, pi);
    const auto direct = direct_ratio_table(q);
    const auto uniform = tabular_dice_minimizer(q, PsiMode::Uniform, 0.0, 1);
    const auto conditional = tabular_dice_minimizer(q, PsiMode::Conditional, 0.0, 1);
    const double k = static_cast<double>(q.z_count());
    for (int s = 0; s < q.n_states; ++s)
      for (int a = 0; a < q.n_actions; ++a)
        for (int z = 0; z < q.z_count(); ++z) {
          const auto i = q.index(s, a, z);
          if (!uniform.support[i]) continue;
          // One global constant (K) links phi * chi to pi / h under uniform psi.
          CHECK(uniform.closed_form[i] * q.chi(s, z) * k == doctest::Approx(direct[i]).epsilon(1e-12));
          CHECK(conditional.closed_form[i] == doctest::Approx(direct[i]).epsilon(1e-12));
        }
  }
}

TEST_CASE("matched hindsight and conditional psi give phi identically one") {
  // Rewards and transitions independent of the action, so h = pi.
  Rng rng(5);
  auto spec = env::random_positive_chain(rng, 3, 3, 3, 1.0);
  for (int s = 0; s < 3; ++s)
    for (int a = 1; a < 3; ++a)
      for (int n = 0; n < 3; ++n) spec.transitions[(static_cast<std::size_t>(s) * 3 + a) * 3 + n] = spec.transition(s, 0, n);
  const Matrix pi = env::random_policy(rng, 3, 3);
  const auto q = exact_quantities(spec, pi);
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 3; ++a)
      for (int k = 0; k < q.z_count(); ++k)
        if (q.p_sz(s, k) > 0.0) CHECK(q.h(s, a, k) == doctest::Approx(pi(s, a)).epsilon(1e-12));
  const auto sol = tabular_dice_minimizer(q, PsiMode::Conditional);
  for (std::size_t i = 0; i < sol.closed_form.size(); ++i)
    if (sol.support[i]) CHECK(sol.closed_form[i] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("deterministic dynamics and policy put all hindsight mass on the taken action") {
  env::ChainMdpSpec spec;
  spec.n_states = 2;
  spec.n_actions = 2;
  spec.horizon = 3;
  spec.gamma = 1.0;
  spec.initial = {1.0, 0.0};
  spec.transitions = {0, 1, 1, 0, 1, 0, 0, 1};
  spec.rewards = {1.0, -1.0, 2.0, 0.0};
  Matrix pi(2, 2);
  pi << 0, 1, 1, 0;
  const auto q = exact_quantities(spec, pi);
  for (int s = 0; s < 2; ++s)
    for (int k = 0; k < q.z_count(); ++k)
      if (q.p_sz(s, k) > 0.0) CHECK(q.h(s, s == 0 ? 1 : 0, k) == 1.0);
}

TEST_CASE("two-state instance against hand enumeration") {
  // s0 --a0--> s0 (r 0), s0 --a1--> s1 (r 1), s1 absorbing with r 2; horizon 2.
  env::ChainMdpSpec spec;
  spec.n_states = 2;
  spec.n_actions = 2;
  spec.horizon = 2;
  spec.gamma = 1.0;
  spec.initial = {1.0, 0.0};
  spec.transitions = {1, 0, 0, 1, 0, 1, 0, 1};
  spec.rewards = {0.0, 1.0, 2.0, 2.0};
  Matrix pi(2, 2);
  pi << 0.25, 0.75, 0.5, 0.5;
  const auto q = exact_quantities(spec, pi);
  REQUIRE(q.z_values == std::vector<double>{0.0, 1.0, 2.0, 3.0});
  CHECK(q.d(0) == doctest::Approx(0.625));
  CHECK(q.d(1) == doctest::Approx(0.375));
  CHECK(q.chi(0, 0) == doctest::Approx(0.1));
  CHECK(q.chi(0, 1) == doctest::Approx(0.3));
  CHECK(q.chi(0, 2) == 0.0);
  CHECK(q.chi(0, 3) == doctest::Approx(0.6));
  CHECK(q.chi(1, 2) == doctest::Approx(1.0));
  CHECK(q.h(0, 0, 0) == doctest::Approx(1.0));
  CHECK(q.h(0, 0, 1) == doctest::Approx(0.5));
  CHECK(q.h(0, 1, 3) == doctest::Approx(1.0));
  CHECK(q.h(1, 0, 2) == doctest::Approx(0.5));
}

TEST_CASE("conditional tables normalize and V averages Q") {
  for (const auto& [spec, pi] : suite(6)) {
    const auto q = exact_quantities(spec, pi);
    double total = 0.0;
    for (double p : q.joint) total += p;
    CHECK(std::abs(total - 1.0) < 1e-12);
    CHECK(std::abs(q.d.sum() - 1.0) < 1e-12);
    for (int s = 0; s < q.n_states; ++s) {
      if (q.d(s) <= 0.0) continue;
      double chi_sum = 0.0;
      for (int k = 0; k < q.z_count(); ++k) {
        chi_sum += q.chi(s, k);
        if (q.p_sz(s, k) <= 0.0) continue;
        double h_sum = 0.0;
        for (int a = 0; a < q.n_actions; ++a) h_sum += q.h(s, a, k);
        CHECK(std::abs(h_sum - 1.0) < 1e-12);
      }
      CHECK(std::abs(chi_sum - 1.0) < 1e-12);
      CHECK(std::abs(q.v(s) - (pi.row(s).array() * q.q.row(s).array()).sum()) < 1e-12);
    }
  }
}

TEST_CASE("enumeration cap is enforced") {
  Rng rng(7);
  const auto spec = env::random_positive_chain(rng, 6, 3, 5, 1.0);
  CHECK_THROWS_AS(exact_quantities(spec, env::random_policy(rng, 6, 3)), SizeError);
}
