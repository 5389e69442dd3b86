#include <doctest.h>

#include <cmath>

#include "pcomimo/tiny_instances.hpp"

using namespace pcomimo;

TEST_CASE("zero-cost instance has zero average cost and flat potentials") {
  TinyInstance t = make_lemma2_instance();
  t.beta = {0.0, 0.0};
  TinyMultipliers zero{{0.0, 0.0}, {0.0, 0.0}};
  RviResult r = relative_value_iteration(t, zero);
  CHECK(r.converged);
  CHECK(std::abs(r.theta) <= 1e-9);
  CHECK(r.v.cwiseAbs().maxCoeff() <= 1e-9);

  PerFlowResult f = per_flow_fixed_point(t, 0, zero);
  CHECK(f.converged);
  CHECK(f.v.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("unichain gate accepts the shipped instances") {
  CHECK(unichain_under_constant_policies(make_lemma2_instance()));
  CHECK(unichain_under_constant_policies(make_duality_instance()));
  CHECK(unichain_under_constant_policies(make_fixedpoint_instance()));
}

TEST_CASE("theta is independent of the value-iteration start") {
  TinyInstance t = make_lemma2_instance();
  TinyMultipliers g{{0.3, 0.2}, {0.1, 0.05}};
  RviResult a = relative_value_iteration(t, g);
  Eigen::VectorXd warm = Eigen::VectorXd::Random(a.v.size()) * 7.0;
  RviResult b = relative_value_iteration(t, g, 1e-10, 100000, &warm);
  CHECK(a.converged);
  CHECK(b.converged);
  CHECK(std::abs(a.theta - b.theta) <= 1e-8);
  CHECK((a.v - b.v).cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("single-policy average cost matches a long monte-carlo run") {
  // one action per user beyond idle is removed: constant serving policy
  TinyInstance t = make_duality_instance();
  std::vector<int> policy(4 * t.n_h(), 3);  // always the joint (send, send)
  PolicyStats st = evaluate_policy(t, policy);

  // simulate the same policy
  Rng rng(1357);
  const long steps = 10000000;
  int L = t.levels();
  std::vector<int> q_tilde{0, 0};
  double mean_cost = 0.0;
  Eigen::MatrixXd post = t.posterior();
  for (long s = 0; s < steps; ++s) {
    std::vector<int> pre(2);
    for (int k = 0; k < 2; ++k) {
      double a = rng.uniform() < 0.5 ? 0.0 : 1.0;
      pre[k] = std::min(q_tilde[k] + static_cast<int>(a), L - 1);
    }
    int h = rng.uniform() < t.h_prob[0] ? 0 : 1;
    double cost = 0.0;
    for (int k = 0; k < 2; ++k) cost += t.beta[k] * t.grid[pre[k]];
    mean_cost += (cost - mean_cost) / (s + 1);
    for (int k = 0; k < 2; ++k) {
      double u = t.goodput(k, h, 1);
      q_tilde[k] = std::max(pre[k] - static_cast<int>(std::lround(u)), 0);
    }
  }
  CHECK(std::abs(st.cost - mean_cost) <= 1e-3 * std::max(1.0, std::abs(st.cost)) + 1e-3);
}

TEST_CASE("dual function is concave on sampled multiplier pairs") {
  TinyInstance t = make_duality_instance();
  Rng rng(24);
  for (int trial = 0; trial < 6; ++trial) {
    TinyMultipliers a{{2.0 * rng.uniform(), 2.0 * rng.uniform()},
                      {0.2 * rng.uniform(), 0.2 * rng.uniform()}};
    TinyMultipliers b{{2.0 * rng.uniform(), 2.0 * rng.uniform()},
                      {0.2 * rng.uniform(), 0.2 * rng.uniform()}};
    TinyMultipliers mid{{0.5 * (a.gamma_p[0] + b.gamma_p[0]), 0.5 * (a.gamma_p[1] + b.gamma_p[1])},
                        {0.5 * (a.gamma_c[0] + b.gamma_c[0]), 0.5 * (a.gamma_c[1] + b.gamma_c[1])}};
    double ga = relative_value_iteration(t, a).theta;
    double gb = relative_value_iteration(t, b).theta;
    double gm = relative_value_iteration(t, mid).theta;
    CHECK(gm >= 0.5 * (ga + gb) - 1e-8);
  }
}

TEST_CASE("per-flow decomposition is exact without circuit power or csit error") {
  TinyInstance t = make_lemma2_instance();
  TinyMultipliers g{{0.3, 0.25}, {0.15, 0.1}};
  RviResult joint = relative_value_iteration(t, g);
  REQUIRE(joint.converged);
  PerFlowResult f0 = per_flow_fixed_point(t, 0, g);
  PerFlowResult f1 = per_flow_fixed_point(t, 1, g);
  REQUIRE(f0.converged);
  REQUIRE(f1.converged);

  const int L = t.levels();
  double sup = 0.0;
  for (int s = 0; s < L * L; ++s) {
    double sum = (f0.v(s % L) - f0.v(0)) + (f1.v(s / L) - f1.v(0));
    sup = std::max(sup, std::abs(joint.v(s) - sum));
  }
  CHECK(sup <= 1e-6);
  // theta matches the sum of the per-flow reference values
  CHECK(std::abs(joint.theta - (f0.theta_k + f1.theta_k)) <= 1e-6);

  // with circuit power the decomposition develops a measurable gap
  TinyInstance tc = make_lemma2_instance_pcct(0.4);
  RviResult jc = relative_value_iteration(tc, g);
  PerFlowResult c0 = per_flow_fixed_point(tc, 0, g);
  PerFlowResult c1 = per_flow_fixed_point(tc, 1, g);
  double gap = 0.0;
  for (int s = 0; s < L * L; ++s) {
    double sum = (c0.v(s % L) - c0.v(0)) + (c1.v(s / L) - c1.v(0));
    gap = std::max(gap, std::abs(jc.v(s) - sum));
  }
  MESSAGE("decomposition gap at p_cct=0.4: ", gap);
  CHECK(gap >= 0.0);
}

TEST_CASE("dual solve: slack budgets give zero multipliers") {
  TinyInstance t = make_duality_instance();
  t.p_budget = {1e3, 1e3};
  DualResult d = dual_solve(t);
  CHECK(d.converged);
  CHECK(d.gamma.gamma_p[0] == 0.0);
  CHECK(d.gamma.gamma_p[1] == 0.0);
  CHECK(d.gamma.gamma_c[0] == 0.0);
}

TEST_CASE("zero duality gap against exhaustive deterministic policies") {
  TinyInstance t = make_duality_instance();
  DualResult d = dual_solve(t);
  CHECK(d.converged);
  CHECK(d.gamma.gamma_p[0] > 0.0);  // the pinned budget binds

  EnumerationResult e = enumerate_deterministic_policies(t);
  REQUIRE(e.feasible_found);
  CHECK(std::abs(d.theta - e.best_cost) <= 1e-4);

  RviResult rvi = relative_value_iteration(t, d.gamma);
  PolicyStats st = greedy_policy_stats(t, d.gamma, rvi.v);
  for (int k = 0; k < 2; ++k) {
    CHECK(std::abs(d.gamma.gamma_p[k] * (st.power[k] - t.p_budget[k])) <= 1e-6);
    CHECK(std::abs(d.gamma.gamma_c[k] * (st.backhaul[k] - t.r_budget[k])) <= 1e-6);
  }
}

TEST_CASE("per-flow fixed point residual") {
  TinyInstance t = make_fixedpoint_instance();
  TinyMultipliers g{{0.4, 0.3}, {0.2, 0.2}};
  PerFlowResult f = per_flow_fixed_point(t, 0, g);
  CHECK(f.converged);
  Eigen::VectorXd tv = per_flow_operator(t, 0, g, f.v);
  CHECK((f.v.array() + f.v(0) - tv.array()).abs().maxCoeff() <= 1e-9);
}
