#include "pcomimo/learner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pcomimo {

namespace {
constexpr double kLn2 = 0.69314718055994530942;

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  double e = std::exp(t);
  return e / (1.0 + e);
}
}  // namespace

PotentialTable::PotentialTable(int users, int levels, double n_q, int reference_index)
    : levels_(levels), n_q_(n_q), reference_index_(reference_index) {
  if (users < 1 || levels < 2 || n_q <= 0.0)
    throw std::invalid_argument("PotentialTable: users >= 1, levels >= 2, n_q > 0 required");
  if (reference_index < 0 || reference_index >= levels)
    throw std::invalid_argument("PotentialTable: reference index out of range");
  spacing_ = n_q / (levels - 1);
  v_.assign(users, Eigen::VectorXd::Zero(levels));
}

double PotentialTable::eval(int k, double q) const {
  double x = std::clamp(q, 0.0, n_q_) / spacing_;
  int i0 = std::min(static_cast<int>(x), levels_ - 2);
  double w = x - i0;
  return v_[k](i0) * (1.0 - w) + v_[k](i0 + 1) * w;
}

double PotentialTable::slope(int k, double q) const {
  if (q < 0.0 || q > n_q_) return 0.0;
  int i0 = std::min(static_cast<int>(q / spacing_), levels_ - 2);
  return (v_[k](i0 + 1) - v_[k](i0)) / spacing_;
}

void PotentialTable::td_update(int k, double q_tilde, double scaled_delta) {
  double x = std::clamp(q_tilde, 0.0, n_q_) / spacing_;
  int i0 = std::min(static_cast<int>(x), levels_ - 1);
  double w = x - i0;
  if (w <= 0.0 || i0 == levels_ - 1) {
    v_[k](i0) += scaled_delta;
  } else {
    v_[k](i0) += (1.0 - w) * scaled_delta;
    v_[k](i0 + 1) += w * scaled_delta;
  }
}

Multipliers Multipliers::init(int users, double value, double bound) {
  Multipliers m;
  m.gamma_p.assign(users, value);
  m.gamma_c.assign(users, value);
  m.bound = bound;
  return m;
}

void Multipliers::project() {
  for (double& g : gamma_p) g = std::clamp(g, 0.0, bound);
  for (double& g : gamma_c) g = std::clamp(g, 0.0, bound);
}

double StepSchedule::operator()(long t) const { return c / std::pow(1.0 + t / t0, p); }

bool two_timescale_ok(const StepSchedule& fast, const StepSchedule& slow) {
  auto valid = [](const StepSchedule& s) {
    // c/(1+t/t0)^p: nonnegative, divergent sum needs p <= 1, square-summable needs p > 1/2
    return s.c > 0.0 && s.t0 > 0.0 && s.p > 0.5 && s.p <= 1.0;
  };
  return valid(fast) && valid(slow) && slow.p > fast.p;
}

double logistic_f(double x, double y, double eta) {
  return sigmoid(-(x - y) * eta);
}

double logistic_j(double z, double eta) {
  double s = sigmoid(z * eta);
  return -eta * s * (1.0 - s);
}

double logistic_j_approx(double z, double eta) {
  return std::abs(z) <= 2.0 / eta ? -eta / 5.0 : 0.0;
}

FeedbackVector build_feedback(const ControlAction& action, const UserCapacities& caps,
                              double eta) {
  if (eta <= 0.0) throw std::invalid_argument("build_feedback: eta must be positive");
  FeedbackVector fb;
  fb.z.resize(action.R_c.size());
  for (std::size_t k = 0; k < action.R_c.size(); ++k) {
    fb.z[k].ack_c = action.R_c[k] <= caps.C_c[k];
    fb.z[k].near_c = std::abs(action.R_c[k] - caps.C_c[k]) <= 2.0 / eta;
    fb.z[k].ack_p = action.R_p[k] <= caps.C_p[k];
    fb.z[k].near_p = std::abs(action.R_p[k] - caps.C_p[k]) <= 2.0 / eta;
  }
  return fb;
}

namespace {

// indicator-weighted potential combination for one user
double v_combo(const PotentialTable& t, int k, double q, double r_c, double r_p, double f_c,
               double f_p) {
  return (1.0 - f_c) * (1.0 - f_p) * t.eval(k, q) + (1.0 - f_c) * f_p * t.eval(k, q - r_p) +
         f_c * (1.0 - f_p) * t.eval(k, q - r_c) + f_c * f_p * t.eval(k, q - r_c - r_p);
}

}  // namespace

double PerStageEval::objective(const ControlAction& a) const {
  PowerBreakdown pb = power_consumption(*alloc, a, *pre, 0.0);
  double h = 0.0;
  for (int k = 0; k < alloc->K; ++k) {
    h += gamma->gamma_p[k] * (pb.tx[k] + (pb.tx[k] > 0.0 ? p_cct : 0.0));
    h += gamma->gamma_c[k] * a.R_c[k];
  }
  for (const auto& [prob, model] : outcomes) {
    UserCapacities caps = model->caps(a);
    for (int k = 0; k < alloc->K; ++k) {
      double f_c = a.R_c[k] <= caps.C_c[k] ? 1.0 : 0.0;
      double f_p = a.R_p[k] <= caps.C_p[k] ? 1.0 : 0.0;
      h += prob * v_combo(*table, k, q[k], a.R_c[k], a.R_p[k], f_c, f_p);
    }
  }
  return h;
}

double PerStageEval::smoothed(const ControlAction& a) const {
  PowerBreakdown pb = power_consumption(*alloc, a, *pre, 0.0);
  double h = 0.0;
  for (int k = 0; k < alloc->K; ++k) {
    h += gamma->gamma_p[k] * (pb.tx[k] + p_cct * logistic_f(0.0, pb.tx[k], eta));
    h += gamma->gamma_c[k] * a.R_c[k];
  }
  for (const auto& [prob, model] : outcomes) {
    UserCapacities caps = model->caps(a);
    for (int k = 0; k < alloc->K; ++k) {
      double f_c = logistic_f(a.R_c[k], caps.C_c[k], eta);
      double f_p = logistic_f(a.R_p[k], caps.C_p[k], eta);
      h += prob * v_combo(*table, k, q[k], a.R_c[k], a.R_p[k], f_c, f_p);
    }
  }
  return h;
}

double stochastic_partial_gradient(const GradientContext& g, const ControlAction& a,
                                   ActionComponent comp, int i) {
  const int k = g.k;
  const PotentialTable& t = *g.table;
  const double q = g.q_k, r_c = a.R_c[k], r_p = a.R_p[k];

  double f_c, f_p, j_c, j_p;
  if (g.approx) {
    f_c = g.feedback.ack_c ? 1.0 : 0.0;
    f_p = g.feedback.ack_p ? 1.0 : 0.0;
    j_c = g.feedback.near_c ? -g.eta / 5.0 : 0.0;
    j_p = g.feedback.near_p ? -g.eta / 5.0 : 0.0;
  } else {
    f_c = logistic_f(r_c, g.C_c, g.eta);
    f_p = logistic_f(r_p, g.C_p, g.eta);
    j_c = logistic_j(r_c - g.C_c, g.eta);
    j_p = logistic_j(r_p - g.C_p, g.eta);
  }

  double dgdfc = -(1.0 - f_p) * t.eval(k, q) - f_p * t.eval(k, q - r_p) +
                 (1.0 - f_p) * t.eval(k, q - r_c) + f_p * t.eval(k, q - r_c - r_p);
  double dgdfp = -(1.0 - f_c) * t.eval(k, q) + (1.0 - f_c) * t.eval(k, q - r_p) -
                 f_c * t.eval(k, q - r_c) + f_c * t.eval(k, q - r_c - r_p);

  // d/dP of the smoothed idle indicator f^eta(0, P_tx)
  double dphi = g.approx ? (g.p_tx[k] <= 2.0 / g.eta ? g.eta / 5.0 : 0.0)
                         : -logistic_j(g.p_tx[k], g.eta);

  switch (comp) {
    case ActionComponent::PrivatePower: {
      double dcp = g.approx ? 1.0
                            : g.w_tau * g.sigma_p(i) /
                                  ((1.0 + g.i_p(i) + g.sigma_p(i) * a.P_p[k](i)) * kLn2);
      return g.gamma->gamma_p[k] + g.gamma->gamma_p[k] * g.p_cct * dphi + dgdfp * (-j_p) * dcp;
    }
    case ActionComponent::CommonPower: {
      double y = 0.0;
      for (int n = 0; n < g.alloc->K; ++n) y += g.gamma->gamma_p[n] * (*g.alpha_k)(n, i);
      y += g.gamma->gamma_p[k] * g.p_cct * dphi * (*g.alpha_k)(k, i);
      double dcc = g.approx ? 1.0
                            : g.w_tau * g.sigma_c(i) /
                                  ((1.0 + g.i_c(i) + g.sigma_c(i) * a.P_c[k](i)) * kLn2);
      return y + dgdfc * (-j_c) * dcc;
    }
    case ActionComponent::CommonRate:
      return g.gamma->gamma_c[k] + j_c * dgdfc + f_c * (1.0 - f_p) * (-t.slope(k, q - r_c)) +
             f_c * f_p * (-t.slope(k, q - r_c - r_p));
    case ActionComponent::PrivateRate:
      return j_p * dgdfp + (1.0 - f_c) * f_p * (-t.slope(k, q - r_p)) +
             f_c * f_p * (-t.slope(k, q - r_c - r_p));
  }
  throw std::invalid_argument("stochastic_partial_gradient: unknown component");
}

Eigen::VectorXd gradient_vector(const GradientContext& g, const ControlAction& a) {
  const auto& al = *g.alloc;
  const int k = g.k;
  Eigen::VectorXd y(al.action_size(k));
  int idx = 0;
  for (int i = 0; i < al.d_c[k]; ++i)
    y(idx++) = stochastic_partial_gradient(g, a, ActionComponent::CommonPower, i);
  for (int i = 0; i < al.d_p[k]; ++i)
    y(idx++) = stochastic_partial_gradient(g, a, ActionComponent::PrivatePower, i);
  y(idx++) = stochastic_partial_gradient(g, a, ActionComponent::CommonRate, 0);
  y(idx++) = stochastic_partial_gradient(g, a, ActionComponent::PrivateRate, 0);
  return y;
}

double per_flow_cost(const Multipliers& gm, int k, double beta_k, double cost_f,
                     double own_private_power, const std::vector<double>& common_share,
                     double backhaul, const std::vector<double>& p_budget,
                     const std::vector<double>& r_budget, double p_cct) {
  double g = beta_k * cost_f;
  g += gm.gamma_p[k] *
       (own_private_power + (own_private_power > 0.0 ? p_cct : 0.0) - p_budget[k]);
  for (std::size_t n = 0; n < common_share.size(); ++n) g += gm.gamma_p[n] * common_share[n];
  g += gm.gamma_c[k] * (backhaul - r_budget[k]);
  return g;
}

void algorithm1_update(PotentialTable& table, Multipliers& gm, int k,
                       const Algorithm1Observation& obs, double beta_k,
                       const std::vector<double>& p_budget, const std::vector<double>& r_budget,
                       double p_cct, long t, const StepSchedule& kv, const StepSchedule& kg) {
  double g = per_flow_cost(gm, k, beta_k, obs.cost_f, obs.own_private_power, obs.common_share,
                           obs.backhaul, p_budget, r_budget, p_cct);
  double ref = table.level(table.reference_index());
  double delta = g + table.eval(k, std::max(obs.q_pre - obs.goodput, 0.0)) -
                 table.eval(k, ref) - table.eval(k, obs.q_tilde_prev);
  table.td_update(k, obs.q_tilde_prev, kv(t) * delta);

  double total_power = obs.own_tx_power + (obs.own_tx_power > 0.0 ? p_cct : 0.0);
  gm.gamma_p[k] = std::clamp(gm.gamma_p[k] + kg(t) * (total_power - p_budget[k]), 0.0, gm.bound);
  gm.gamma_c[k] = std::clamp(gm.gamma_c[k] + kg(t) * (obs.backhaul - r_budget[k]), 0.0, gm.bound);
}

void algorithm2_update(Eigen::VectorXd& entry, const Eigen::VectorXd& y, double kappa_a,
                       const StreamAllocation& alloc, int k, const StepCaps& caps) {
  const int n_pow = alloc.d_c[k] + alloc.d_p[k];
  for (int i = 0; i < entry.size(); ++i) {
    double cap = i < n_pow ? caps.power : caps.rate;
    double step = std::clamp(kappa_a * y(i), -cap, cap);
    entry(i) = std::max(entry(i) - step, 0.0);
  }
}

OnlineActionTable::OnlineActionTable(const StreamAllocation& alloc, int k, int n_qcells,
                                     int n_buckets, double q_max)
    : alloc_(alloc), k_(k), n_qcells_(n_qcells), n_buckets_(n_buckets), q_max_(q_max) {
  if (n_qcells < 1 || n_buckets < 1 || q_max <= 0.0)
    throw std::invalid_argument("OnlineActionTable: bad dimensions");
  entries_.assign(static_cast<std::size_t>(n_qcells) * n_buckets,
                  Eigen::VectorXd::Zero(alloc_.action_size(k)));
}

int OnlineActionTable::qcell(double q) const {
  double x = std::clamp(q, 0.0, q_max_) / q_max_;
  return std::min(static_cast<int>(x * n_qcells_), n_qcells_ - 1);
}

Eigen::VectorXd& OnlineActionTable::entry(double q, std::uint64_t csit_hash) {
  return entries_[static_cast<std::size_t>(qcell(q)) * n_buckets_ + bucket(csit_hash)];
}

const Eigen::VectorXd& OnlineActionTable::entry(double q, std::uint64_t csit_hash) const {
  return entries_[static_cast<std::size_t>(qcell(q)) * n_buckets_ + bucket(csit_hash)];
}

ControlAction OnlineActionTable::unpack(const Eigen::VectorXd& e) const {
  ControlAction a = ControlAction::zeros(alloc_);
  int idx = 0;
  for (int i = 0; i < alloc_.d_c[k_]; ++i) a.P_c[k_](i) = e(idx++);
  for (int i = 0; i < alloc_.d_p[k_]; ++i) a.P_p[k_](i) = e(idx++);
  a.R_c[k_] = e(idx++);
  a.R_p[k_] = e(idx++);
  return a;
}

void OnlineActionTable::pack(const ControlAction& a, Eigen::VectorXd& e) const {
  int idx = 0;
  for (int i = 0; i < alloc_.d_c[k_]; ++i) e(idx++) = a.P_c[k_](i);
  for (int i = 0; i < alloc_.d_p[k_]; ++i) e(idx++) = a.P_p[k_](i);
  e(idx++) = a.R_c[k_];
  e(idx++) = a.R_p[k_];
}

InnerLoopResult solve_per_stage_inner(const PerStageEval& eval, ControlAction init, double step,
                                      int max_iter, double tol,
                                      const std::vector<Eigen::VectorXi>* frozen) {
  const auto& al = *eval.alloc;
  InnerLoopResult res;
  res.action = std::move(init);
  res.action.clamp_nonnegative();

  auto component_gradients = [&](const ControlAction& a) {
    std::vector<Eigen::VectorXd> y(al.K);
    PowerBreakdown pb = power_consumption(al, a, *eval.pre, 0.0);
    for (int k = 0; k < al.K; ++k) y[k] = Eigen::VectorXd::Zero(al.action_size(k));
    for (const auto& [prob, model] : eval.outcomes) {
      LinkQuality lq = model->link(a);
      UserCapacities caps = mutual_information(al, lq, a, model->w_tau);
      for (int k = 0; k < al.K; ++k) {
        GradientContext g;
        g.alloc = &al;
        g.k = k;
        g.q_k = eval.q[k];
        g.table = eval.table;
        g.gamma = eval.gamma;
        g.p_cct = eval.p_cct;
        g.eta = eval.eta;
        g.w_tau = model->w_tau;
        g.alpha_k = &eval.pre->alpha[k];
        g.C_c = caps.C_c[k];
        g.C_p = caps.C_p[k];
        g.sigma_c = lq.sigma_c[k];
        g.i_c = lq.i_c[k];
        g.sigma_p = lq.sigma_p[k];
        g.i_p = lq.i_p[k];
        g.p_tx = pb.tx;
        y[k] += prob * gradient_vector(g, a);
      }
    }
    return y;
  };

  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    auto y = component_gradients(res.action);
    double proj_norm = 0.0;
    for (int k = 0; k < al.K; ++k) {
      Eigen::VectorXd entry(al.action_size(k));
      OnlineActionTable tmp(al, k, 1, 1, 1.0);  // packing helper
      tmp.pack(res.action, entry);
      for (int i = 0; i < entry.size(); ++i) {
        if (frozen && (*frozen)[k](i)) continue;
        double g = entry(i) > 0.0 ? y[k](i) : std::min(y[k](i), 0.0);
        proj_norm = std::max(proj_norm, std::abs(g));
        entry(i) = std::max(entry(i) - step * y[k](i), 0.0);
      }
      ControlAction unpacked = tmp.unpack(entry);
      res.action.P_c[k] = unpacked.P_c[k];
      res.action.P_p[k] = unpacked.P_p[k];
      res.action.R_c[k] = unpacked.R_c[k];
      res.action.R_p[k] = unpacked.R_p[k];
    }
    res.grad_norm = proj_norm;
    if (proj_norm <= tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace pcomimo
