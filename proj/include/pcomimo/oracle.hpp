#pragma once

#include <Eigen/Dense>
#include <vector>

#include "pcomimo/learner.hpp"

namespace pcomimo {

/// One user action on a desk-scale instance. Rates are multiples of the queue
/// grid spacing so the queue recursion stays on the grid exactly.
struct TinyAction {
  double p_private = 0.0;              // private-stream power at the own BS
  std::vector<double> p_common_share;  // common-stream power drawn at each BS
  double rate_c = 0.0;                 // common rate = backhaul consumption
  double rate_p = 0.0;
};

/// Fully enumerable two-user instance: whole-matrix channel states, discrete
/// per-user action sets, lattice queues and mass-point arrivals.
struct TinyInstance {
  int n_users = 2;
  std::vector<double> grid;  // ascending queue levels starting at 0 (shared by users)

  std::vector<double> h_prob;   // global channel state distribution
  Eigen::MatrixXd csit_kernel;  // Pr{csit | true}, n_h x n_h

  std::vector<std::vector<TinyAction>> actions;  // per user
  // capacities: per user, (n_h x n_actions[k]) tables in bits/frame
  std::vector<Eigen::MatrixXd> cap_c, cap_p;

  std::vector<std::vector<std::pair<double, double>>> arrivals;  // per user: (bits, prob)

  double p_cct = 0.0;
  std::vector<double> p_budget, r_budget, beta;

  int n_h() const { return static_cast<int>(h_prob.size()); }
  int levels() const { return static_cast<int>(grid.size()); }
  double n_q() const { return grid.back(); }
  double spacing() const { return grid[1] - grid[0]; }
  int n_joint_actions() const;
  std::vector<int> joint_action(int index) const;  // per-user action indices

  double goodput(int k, int h, int a) const;
  double tx_power(int bs, const std::vector<int>& joint) const;
  double bs_power(int bs, const std::vector<int>& joint) const;  // tx + circuit
  Eigen::MatrixXd posterior() const;  // Pr{true | csit}
  std::vector<double> csit_prob() const;

  void validate() const;  // grid closure, stochasticity, zero action presence
};

struct TinyMultipliers {
  std::vector<double> gamma_p, gamma_c;
};

/// Joint relative value iteration on the post-decision Bellman operator.
struct RviResult {
  double theta = 0.0;
  Eigen::VectorXd v;  // over joint post-decision states, v(0) = 0
  int sweeps = 0;
  double residual = 0.0;
  bool converged = false;
};

RviResult relative_value_iteration(const TinyInstance& inst, const TinyMultipliers& gamma,
                                   double tol = 1e-10, int max_sweeps = 100000,
                                   const Eigen::VectorXd* warm_start = nullptr);

/// Sufficient unichain gate: every constant-action policy must have a single
/// terminal communicating class.
bool unichain_under_constant_policies(const TinyInstance& inst);

/// Damped iteration of the per-flow operator to the fixed point
/// V + V(ref) e = T_k(V).
struct PerFlowResult {
  Eigen::VectorXd v;
  double theta_k = 0.0;  // V(ref) at the fixed point
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

PerFlowResult per_flow_fixed_point(const TinyInstance& inst, int k, const TinyMultipliers& gamma,
                                   int ref_index = 0, double damping = 1.0, double tol = 1e-10,
                                   int max_iter = 100000);

/// One application of the per-flow operator T_k (exact expectations); used to
/// measure Bellman residuals of externally learned tables.
Eigen::VectorXd per_flow_operator(const TinyInstance& inst, int k, const TinyMultipliers& gamma,
                                  const Eigen::VectorXd& v);

/// Greedy policy wrt a converged joint V, its stationary distribution and
/// long-run averages.
struct PolicyStats {
  double cost = 0.0;                    // weighted delay cost
  std::vector<double> power, backhaul;  // per BS / per user
};

PolicyStats greedy_policy_stats(const TinyInstance& inst, const TinyMultipliers& gamma,
                                const Eigen::VectorXd& v);

/// Projected supergradient ascent on the dual function with relative value
/// iteration as the inner solver.
struct DualResult {
  TinyMultipliers gamma;
  double theta = 0.0;
  int iterations = 0;
  bool converged = false;
};

DualResult dual_solve(const TinyInstance& inst, int max_iter = 400, double move_tol = 1e-8);

/// Exhaustive deterministic stationary policies (maps from observed state
/// (pre-decision queues, csit) to a joint action); the best feasible average
/// cost is the constrained optimum the dual is checked against.
struct EnumerationResult {
  double best_cost = 0.0;
  bool feasible_found = false;
  std::vector<int> best_policy;
  std::vector<double> power, backhaul;
  long policies_checked = 0;
};

EnumerationResult enumerate_deterministic_policies(const TinyInstance& inst,
                                                   double budget_slack = 1e-9);

/// Long-run average cost of a fixed policy (observed-state indexed) by exact
/// stationary analysis; also reports consumption.
PolicyStats evaluate_policy(const TinyInstance& inst, const std::vector<int>& policy);

}  // namespace pcomimo
