#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "pcomimo/phy.hpp"

namespace pcomimo {

/// Per-flow post-decision potentials on a uniform queue grid with linear
/// interpolation between levels.
class PotentialTable {
 public:
  PotentialTable(int users, int levels, double n_q, int reference_index = 0);

  int users() const { return static_cast<int>(v_.size()); }
  int levels() const { return levels_; }
  double n_q() const { return n_q_; }
  double spacing() const { return spacing_; }
  double level(int i) const { return i * spacing_; }
  int reference_index() const { return reference_index_; }

  double eval(int k, double q) const;
  double slope(int k, double q) const;  // derivative of eval; 0 outside [0, N_Q]
  void td_update(int k, double q_tilde, double scaled_delta);

  Eigen::VectorXd& values(int k) { return v_[k]; }
  const Eigen::VectorXd& values(int k) const { return v_[k]; }

 private:
  int levels_;
  double n_q_, spacing_;
  int reference_index_;
  std::vector<Eigen::VectorXd> v_;
};

struct Multipliers {
  std::vector<double> gamma_p, gamma_c;
  double bound = 1e3;

  static Multipliers init(int users, double value, double bound);
  void project();
};

/// kappa(t) = c / (1 + t/t0)^p
struct StepSchedule {
  double c = 1.0, t0 = 500.0, p = 1.0;
  double operator()(long t) const;
};

/// Checks kappa >= 0, sum = inf, sum of squares < inf for both, and that the
/// slow schedule vanishes relative to the fast one.
bool two_timescale_ok(const StepSchedule& fast, const StepSchedule& slow);

// logistic indicator surrogate f^eta(x, y) ~= 1(x <= y), and its kernel
// J(z) = -eta e^{z eta} / (1 + e^{z eta})^2 = d f^eta / dx at z = x - y
double logistic_f(double x, double y, double eta);
double logistic_j(double z, double eta);
double logistic_j_approx(double z, double eta);  // -(eta/5) 1(|z| <= 2/eta)

struct FeedbackVector {
  struct PerUser {
    bool ack_c = false, near_c = false, ack_p = false, near_p = false;
  };
  std::vector<PerUser> z;
};

FeedbackVector build_feedback(const ControlAction& action, const UserCapacities& caps,
                              double eta);

/// Per-stage objective evaluation context: expectation over CSIT-posterior
/// channel outcomes of the indicator-weighted potential terms plus the
/// multiplier-priced power and backhaul. Diagnostic / oracle use only.
struct PerStageEval {
  const StreamAllocation* alloc = nullptr;
  std::vector<double> q;  // pre-decision queues
  const PotentialTable* table = nullptr;
  const Multipliers* gamma = nullptr;
  const PrecoderSet* pre = nullptr;
  double p_cct = 0.0, eta = 50.0;
  // CSIT-posterior channel outcomes; exact enumeration for small supports,
  // fixed-seed Monte-Carlo draws otherwise (the caller builds either).
  std::vector<std::pair<double, const CapacityModel*>> outcomes;

  double objective(const ControlAction& a) const;  // hard indicators
  double smoothed(const ControlAction& a) const;   // logistic everywhere
};

enum class ActionComponent { CommonPower, PrivatePower, CommonRate, PrivateRate };

/// Everything BS k observes about the executed action's realized outcome.
struct GradientContext {
  const StreamAllocation* alloc = nullptr;
  int k = 0;
  double q_k = 0.0;
  const PotentialTable* table = nullptr;
  const Multipliers* gamma = nullptr;
  double p_cct = 0.0, eta = 50.0, w_tau = 1.0;
  const Eigen::MatrixXd* alpha_k = nullptr;  // K x d_c[k]
  double C_c = 0.0, C_p = 0.0;               // realized mutual information, bits/frame
  Eigen::VectorXd sigma_c, i_c, sigma_p, i_p;
  std::vector<double> p_tx;  // per-BS transmit power at the executed action
  bool approx = false;       // ACK/NAK feedback mode
  FeedbackVector::PerUser feedback;
};

double stochastic_partial_gradient(const GradientContext& g, const ControlAction& a,
                                   ActionComponent comp, int stream_index);

/// y for every component of user k, laid out [P_c | P_p | R_c | R_p].
Eigen::VectorXd gradient_vector(const GradientContext& g, const ControlAction& a);

struct Algorithm1Observation {
  double q_tilde_prev = 0.0;  // post-decision state being updated
  double q_pre = 0.0;         // pre-decision queue this frame
  double goodput = 0.0;
  double cost_f = 0.0;  // beta-unweighted delay cost f(Q_k)
  double own_private_power = 0.0;
  double own_tx_power = 0.0;  // BS k transmit power incl. common shares
  double backhaul = 0.0;      // R_{(k,c)}
  std::vector<double> common_share;  // power for user k's common streams at each BS
};

/// One two-timescale step: potential TD update at the previous post-decision
/// state, then projected multiplier updates from realized consumption.
void algorithm1_update(PotentialTable& table, Multipliers& gm, int k,
                       const Algorithm1Observation& obs, double beta_k,
                       const std::vector<double>& p_budget, const std::vector<double>& r_budget,
                       double p_cct, long t, const StepSchedule& kv, const StepSchedule& kg);

/// Per-flow learning cost g_k (also used by the oracle's per-flow operator).
double per_flow_cost(const Multipliers& gm, int k, double beta_k, double cost_f,
                     double own_private_power, const std::vector<double>& common_share,
                     double backhaul, const std::vector<double>& p_budget,
                     const std::vector<double>& r_budget, double p_cct);

struct StepCaps {
  double power = std::numeric_limits<double>::infinity();
  double rate = std::numeric_limits<double>::infinity();
};

/// a <- [a - kappa_a y]^+, with per-component step magnitudes optionally capped.
void algorithm2_update(Eigen::VectorXd& entry, const Eigen::VectorXd& y, double kappa_a,
                       const StreamAllocation& alloc, int k, const StepCaps& caps);

/// Persistent per-BS action table indexed by (own queue cell, CSIT hash bucket).
class OnlineActionTable {
 public:
  OnlineActionTable(const StreamAllocation& alloc, int k, int n_qcells, int n_buckets,
                    double q_max);

  int qcell(double q) const;
  int bucket(std::uint64_t csit_hash) const { return static_cast<int>(csit_hash % n_buckets_); }
  Eigen::VectorXd& entry(double q, std::uint64_t csit_hash);
  const Eigen::VectorXd& entry(double q, std::uint64_t csit_hash) const;

  ControlAction unpack(const Eigen::VectorXd& entry) const;  // single-user action view
  void pack(const ControlAction& a, Eigen::VectorXd& entry) const;
  int n_qcells() const { return n_qcells_; }
  int n_buckets() const { return n_buckets_; }

 private:
  StreamAllocation alloc_;
  int k_, n_qcells_, n_buckets_;
  double q_max_;
  std::vector<Eigen::VectorXd> entries_;
};

struct InnerLoopResult {
  ControlAction action;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;
};

/// Offline mode of the per-stage solver: iterate the projected partial-gradient
/// update on the smoothed objective (expectation over eval.outcomes) until the
/// gradient is below tol or the iteration cap is hit. `frozen` (per-user flags
/// in table layout) pins selected components for slice diagnostics.
InnerLoopResult solve_per_stage_inner(const PerStageEval& eval, ControlAction init,
                                      double step, int max_iter = 10000, double tol = 1e-6,
                                      const std::vector<Eigen::VectorXi>* frozen = nullptr);

}  // namespace pcomimo
