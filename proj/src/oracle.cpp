#include "pcomimo/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pcomimo {

namespace {

// joint index helpers (user 0 varies fastest)
int joint_index(const std::vector<int>& per_user, int radix) {
  int idx = 0;
  for (int k = static_cast<int>(per_user.size()) - 1; k >= 0; --k)
    idx = idx * radix + per_user[k];
  return idx;
}

std::vector<int> split_index(int idx, int radix, int users) {
  std::vector<int> out(users);
  for (int k = 0; k < users; ++k) {
    out[k] = idx % radix;
    idx /= radix;
  }
  return out;
}

int grid_index(const TinyInstance& inst, double value) {
  double x = value / inst.spacing();
  int i = static_cast<int>(std::lround(x));
  if (i < 0 || i >= inst.levels() || std::abs(x - i) > 1e-9)
    throw std::invalid_argument("tiny instance: value " + std::to_string(value) +
                                " is off the queue grid");
  return i;
}

struct JointArrival {
  std::vector<int> bits_idx;  // arrival size expressed in grid steps
  double prob;
};

std::vector<JointArrival> joint_arrivals(const TinyInstance& inst) {
  std::vector<JointArrival> out;
  const int K = inst.n_users;
  std::vector<int> counter(K, 0);
  while (true) {
    JointArrival ja;
    ja.prob = 1.0;
    ja.bits_idx.resize(K);
    for (int k = 0; k < K; ++k) {
      const auto& [bits, prob] = inst.arrivals[k][counter[k]];
      ja.bits_idx[k] = static_cast<int>(std::lround(bits / inst.spacing()));
      ja.prob *= prob;
    }
    out.push_back(std::move(ja));
    int k = 0;
    while (k < K) {
      if (++counter[k] < static_cast<int>(inst.arrivals[k].size())) break;
      counter[k] = 0;
      ++k;
    }
    if (k == K) break;
  }
  return out;
}

Multipliers to_multipliers(const TinyMultipliers& g) {
  Multipliers m;
  m.gamma_p = g.gamma_p;
  m.gamma_c = g.gamma_c;
  m.bound = std::numeric_limits<double>::infinity();
  return m;
}

}  // namespace

int TinyInstance::n_joint_actions() const {
  int n = 1;
  for (const auto& a : actions) n *= static_cast<int>(a.size());
  return n;
}

std::vector<int> TinyInstance::joint_action(int index) const {
  std::vector<int> out(n_users);
  for (int k = 0; k < n_users; ++k) {
    int nk = static_cast<int>(actions[k].size());
    out[k] = index % nk;
    index /= nk;
  }
  return out;
}

double TinyInstance::goodput(int k, int h, int a) const {
  const TinyAction& act = actions[k][a];
  double u = 0.0;
  if (act.rate_c <= cap_c[k](h, a)) u += act.rate_c;
  if (act.rate_p <= cap_p[k](h, a)) u += act.rate_p;
  return u;
}

double TinyInstance::tx_power(int bs, const std::vector<int>& joint) const {
  double p = actions[bs][joint[bs]].p_private;
  for (int k = 0; k < n_users; ++k) p += actions[k][joint[k]].p_common_share[bs];
  return p;
}

double TinyInstance::bs_power(int bs, const std::vector<int>& joint) const {
  double tx = tx_power(bs, joint);
  return tx + (tx > 0.0 ? p_cct : 0.0);
}

Eigen::MatrixXd TinyInstance::posterior() const {
  const int n = n_h();
  Eigen::MatrixXd post(n, n);
  for (int j = 0; j < n; ++j) {
    double z = 0.0;
    for (int i = 0; i < n; ++i) z += csit_kernel(i, j) * h_prob[i];
    for (int i = 0; i < n; ++i)
      post(i, j) = z > 0.0 ? csit_kernel(i, j) * h_prob[i] / z : (i == j ? 1.0 : 0.0);
  }
  return post;
}

std::vector<double> TinyInstance::csit_prob() const {
  std::vector<double> p(n_h(), 0.0);
  for (int j = 0; j < n_h(); ++j)
    for (int i = 0; i < n_h(); ++i) p[j] += csit_kernel(i, j) * h_prob[i];
  return p;
}

void TinyInstance::validate() const {
  if (n_users < 1) throw std::invalid_argument("tiny instance: need users");
  if (levels() < 2 || grid[0] != 0.0)
    throw std::invalid_argument("tiny instance: grid must start at 0 with >= 2 levels");
  for (int i = 1; i < levels(); ++i)
    if (std::abs(grid[i] - i * spacing()) > 1e-12)
      throw std::invalid_argument("tiny instance: grid must be uniform");
  double hp = 0.0;
  for (double p : h_prob) hp += p;
  if (std::abs(hp - 1.0) > 1e-12) throw std::invalid_argument("tiny instance: h probs");
  for (int i = 0; i < n_h(); ++i) {
    double s = csit_kernel.row(i).sum();
    if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("tiny instance: kernel rows");
  }
  if (static_cast<int>(actions.size()) != n_users)
    throw std::invalid_argument("tiny instance: per-user action sets required");
  for (int k = 0; k < n_users; ++k) {
    const auto& a0 = actions[k][0];
    double all = a0.p_private + a0.rate_c + a0.rate_p;
    for (double s : a0.p_common_share) all += s;
    if (all != 0.0)
      throw std::invalid_argument("tiny instance: first action of each user must be all-zero");
    for (const auto& act : actions[k]) {
      if (static_cast<int>(act.p_common_share.size()) != n_users)
        throw std::invalid_argument("tiny instance: common share must list every BS");
      grid_index(*this, act.rate_c);  // rates must stay on the grid
      grid_index(*this, act.rate_p);
    }
    if (cap_c[k].rows() != n_h() || cap_c[k].cols() != static_cast<int>(actions[k].size()) ||
        cap_p[k].rows() != n_h() || cap_p[k].cols() != static_cast<int>(actions[k].size()))
      throw std::invalid_argument("tiny instance: capacity table shape mismatch");
    for (const auto& [bits, prob] : arrivals[k]) grid_index(*this, bits);
  }
  if (static_cast<long>(std::pow(levels(), n_users)) * n_joint_actions() > 100000)
    throw std::invalid_argument("tiny instance: state x action space too large to enumerate");
  for (double b : p_budget)
    if (b < 0.0) throw std::invalid_argument("tiny instance: negative power budget");
  for (double b : r_budget)
    if (b < 0.0) throw std::invalid_argument("tiny instance: negative backhaul budget");
}

namespace {

// precomputed tables shared by the joint-state solvers
struct JointTables {
  int L, K, S, nA, nH;
  std::vector<JointArrival> arr;
  Eigen::MatrixXd post;          // Pr{h | csit}
  std::vector<double> csit_p;
  std::vector<std::vector<int>> joint_acts;
  std::vector<double> g_const;                  // per joint action: price part of g
  std::vector<std::vector<std::vector<int>>> next_k;  // [h][a_joint] -> per-user steps served
  std::vector<double> delay_cost_q;             // per joint pre-decision state: sum beta_k f(Q_k)

  explicit JointTables(const TinyInstance& inst, const TinyMultipliers& gamma) {
    L = inst.levels();
    K = inst.n_users;
    S = 1;
    for (int k = 0; k < K; ++k) S *= L;
    nA = inst.n_joint_actions();
    nH = inst.n_h();
    arr = joint_arrivals(inst);
    post = inst.posterior();
    csit_p = inst.csit_prob();
    joint_acts.resize(nA);
    g_const.resize(nA);
    for (int a = 0; a < nA; ++a) {
      joint_acts[a] = inst.joint_action(a);
      double g = 0.0;
      for (int bs = 0; bs < K; ++bs)
        g += gamma.gamma_p[bs] * (inst.bs_power(bs, joint_acts[a]) - inst.p_budget[bs]);
      for (int k = 0; k < K; ++k)
        g += gamma.gamma_c[k] *
             (inst.actions[k][joint_acts[a][k]].rate_c - inst.r_budget[k]);
      g_const[a] = g;
    }
    next_k.assign(nH, std::vector<std::vector<int>>(nA, std::vector<int>(K)));
    for (int h = 0; h < nH; ++h)
      for (int a = 0; a < nA; ++a)
        for (int k = 0; k < K; ++k)
          next_k[h][a][k] =
              static_cast<int>(std::lround(inst.goodput(k, h, joint_acts[a][k]) / inst.spacing()));
    delay_cost_q.resize(S);
    for (int s = 0; s < S; ++s) {
      auto qs = split_index(s, L, K);
      double c = 0.0;
      for (int k = 0; k < K; ++k) c += inst.beta[k] * inst.grid[qs[k]];
      delay_cost_q[s] = c;
    }
  }

  int pre_state(int post_state, const JointArrival& ja) const {
    auto qs = split_index(post_state, L, K);
    for (int k = 0; k < K; ++k) qs[k] = std::min(qs[k] + ja.bits_idx[k], L - 1);
    return joint_index(qs, L);
  }

  int next_state(int pre, int h, int a) const {
    auto qs = split_index(pre, L, K);
    for (int k = 0; k < K; ++k) qs[k] = std::max(qs[k] - next_k[h][a][k], 0);
    return joint_index(qs, L);
  }
};

double bellman_apply(const JointTables& t, const Eigen::VectorXd& v, int s, Eigen::VectorXd* out_row) {
  double val = 0.0;
  for (const auto& ja : t.arr) {
    int pre = t.pre_state(s, ja);
    double delay = t.delay_cost_q[pre];
    for (int hh = 0; hh < t.nH; ++hh) {
      double best = std::numeric_limits<double>::infinity();
      for (int a = 0; a < t.nA; ++a) {
        double x = t.g_const[a];
        for (int h = 0; h < t.nH; ++h) {
          double p = t.post(h, hh);
          if (p > 0.0) x += p * v(t.next_state(pre, h, a));
        }
        if (x < best) best = x;
      }
      val += ja.prob * t.csit_p[hh] * (delay + best);
    }
  }
  if (out_row) (*out_row)(s) = val;
  return val;
}

}  // namespace

RviResult relative_value_iteration(const TinyInstance& inst, const TinyMultipliers& gamma,
                                   double tol, int max_sweeps, const Eigen::VectorXd* warm) {
  inst.validate();
  JointTables t(inst, gamma);
  RviResult res;
  Eigen::VectorXd v = warm && warm->size() == t.S ? *warm : Eigen::VectorXd::Zero(t.S);
  Eigen::VectorXd tv(t.S);
  for (res.sweeps = 0; res.sweeps < max_sweeps; ++res.sweeps) {
    for (int s = 0; s < t.S; ++s) bellman_apply(t, v, s, &tv);
    double ref = tv(0);
    double diff = 0.0;
    for (int s = 0; s < t.S; ++s) diff = std::max(diff, std::abs(tv(s) - ref - v(s)));
    v = tv.array() - ref;
    res.theta = ref;
    res.residual = diff;
    if (diff <= tol) {
      res.converged = true;
      break;
    }
  }
  res.v = v;
  return res;
}

bool unichain_under_constant_policies(const TinyInstance& inst) {
  TinyMultipliers gz{std::vector<double>(inst.n_users, 0.0), std::vector<double>(inst.n_users, 0.0)};
  JointTables t(inst, gz);
  for (int a = 0; a < t.nA; ++a) {
    // reachability closure of the one-action chain
    std::vector<std::vector<bool>> reach(t.S, std::vector<bool>(t.S, false));
    for (int s = 0; s < t.S; ++s) {
      for (const auto& ja : t.arr) {
        int pre = t.pre_state(s, ja);
        for (int h = 0; h < t.nH; ++h) reach[s][t.next_state(pre, h, a)] = true;
      }
    }
    for (int mid = 0; mid < t.S; ++mid)
      for (int i = 0; i < t.S; ++i)
        if (reach[i][mid])
          for (int j = 0; j < t.S; ++j)
            if (reach[mid][j]) reach[i][j] = true;
    // a state is recurrent iff it can return to itself from every reachable successor
    int terminal_classes = 0;
    std::vector<bool> seen(t.S, false);
    for (int s = 0; s < t.S; ++s) {
      if (seen[s]) continue;
      bool recurrent = true;
      for (int j = 0; j < t.S; ++j)
        if (reach[s][j] && !reach[j][s]) recurrent = false;
      if (recurrent) {
        ++terminal_classes;
        for (int j = 0; j < t.S; ++j)
          if (reach[s][j] && reach[j][s]) seen[j] = true;
        seen[s] = true;
      }
    }
    if (terminal_classes != 1) return false;
  }
  return true;
}

Eigen::VectorXd per_flow_operator(const TinyInstance& inst, int k, const TinyMultipliers& gamma,
                                  const Eigen::VectorXd& v) {
  const int L = inst.levels();
  const int nH = inst.n_h();
  const int nAk = static_cast<int>(inst.actions[k].size());
  Eigen::MatrixXd post = inst.posterior();
  std::vector<double> csit_p = inst.csit_prob();
  Multipliers gm = to_multipliers(gamma);

  std::vector<double> gk_const(nAk);
  for (int a = 0; a < nAk; ++a) {
    const TinyAction& act = inst.actions[k][a];
    gk_const[a] = per_flow_cost(gm, k, inst.beta[k], 0.0, act.p_private, act.p_common_share,
                                act.rate_c, inst.p_budget, inst.r_budget, inst.p_cct);
  }
  // goodput in grid steps
  std::vector<std::vector<int>> served(nH, std::vector<int>(nAk));
  for (int h = 0; h < nH; ++h)
    for (int a = 0; a < nAk; ++a)
      served[h][a] = static_cast<int>(std::lround(inst.goodput(k, h, a) / inst.spacing()));

  Eigen::VectorXd out(L);
  for (int qt = 0; qt < L; ++qt) {
    double val = 0.0;
    for (const auto& [bits, prob] : inst.arrivals[k]) {
      int pre = std::min(qt + static_cast<int>(std::lround(bits / inst.spacing())), L - 1);
      double delay = inst.beta[k] * inst.grid[pre];
      for (int hh = 0; hh < nH; ++hh) {
        double best = std::numeric_limits<double>::infinity();
        for (int a = 0; a < nAk; ++a) {
          double x = gk_const[a];
          for (int h = 0; h < nH; ++h) {
            double p = post(h, hh);
            if (p > 0.0) x += p * v(std::max(pre - served[h][a], 0));
          }
          best = std::min(best, x);
        }
        val += prob * csit_p[hh] * (delay + best);
      }
    }
    out(qt) = val;
  }
  return out;
}

PerFlowResult per_flow_fixed_point(const TinyInstance& inst, int k, const TinyMultipliers& gamma,
                                   int ref_index, double damping, double tol, int max_iter) {
  inst.validate();
  const int L = inst.levels();
  PerFlowResult res;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(L);
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    Eigen::VectorXd tv = per_flow_operator(inst, k, gamma, v);
    Eigen::VectorXd v_new = (1.0 - damping) * v + damping * (tv.array() - v(ref_index)).matrix();
    res.residual = (v.array() + v(ref_index) - tv.array()).abs().maxCoeff();
    v = v_new;
    if (res.residual <= tol) {
      res.converged = true;
      break;
    }
  }
  res.v = v;
  res.theta_k = v(ref_index);
  return res;
}

namespace {

// stationary distribution of a small chain (rows sum to 1)
Eigen::VectorXd stationary(const Eigen::MatrixXd& p) {
  const int n = static_cast<int>(p.rows());
  Eigen::MatrixXd a = p.transpose() - Eigen::MatrixXd::Identity(n, n);
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  Eigen::VectorXd pi = a.fullPivLu().solve(b);
  double err = (a * pi - b).norm();
  if (err > 1e-8) throw std::runtime_error("stationary: chain is not unichain enough to solve");
  for (int i = 0; i < n; ++i) pi(i) = std::max(pi(i), 0.0);
  pi /= pi.sum();
  return pi;
}

}  // namespace

PolicyStats greedy_policy_stats(const TinyInstance& inst, const TinyMultipliers& gamma,
                                const Eigen::VectorXd& v) {
  JointTables t(inst, gamma);
  // greedy action per observed (pre-decision state, csit)
  std::vector<int> pick(t.S * t.nH, 0);
  for (int pre = 0; pre < t.S; ++pre) {
    for (int hh = 0; hh < t.nH; ++hh) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int a = 0; a < t.nA; ++a) {
        double x = t.g_const[a];
        for (int h = 0; h < t.nH; ++h) {
          double p = t.post(h, hh);
          if (p > 0.0) x += p * v(t.next_state(pre, h, a));
        }
        if (x < best - 1e-15) {
          best = x;
          arg = a;
        }
      }
      pick[pre * t.nH + hh] = arg;
    }
  }
  std::vector<int> policy(pick);
  return evaluate_policy(inst, policy);
}

PolicyStats evaluate_policy(const TinyInstance& inst, const std::vector<int>& policy) {
  TinyMultipliers gz{std::vector<double>(inst.n_users, 0.0), std::vector<double>(inst.n_users, 0.0)};
  JointTables t(inst, gz);
  if (static_cast<int>(policy.size()) != t.S * t.nH)
    throw std::invalid_argument("evaluate_policy: policy must map (pre state, csit) pairs");

  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(t.S, t.S);
  for (int s = 0; s < t.S; ++s)
    for (const auto& ja : t.arr) {
      int pre = t.pre_state(s, ja);
      for (int hh = 0; hh < t.nH; ++hh) {
        int a = policy[pre * t.nH + hh];
        for (int h = 0; h < t.nH; ++h) {
          double w = ja.prob * t.csit_p[hh] * t.post(h, hh);
          if (w > 0.0) p(s, t.next_state(pre, h, a)) += w;
        }
      }
    }
  Eigen::VectorXd pi = stationary(p);

  PolicyStats st;
  st.power.assign(inst.n_users, 0.0);
  st.backhaul.assign(inst.n_users, 0.0);
  for (int s = 0; s < t.S; ++s) {
    if (pi(s) <= 0.0) continue;
    for (const auto& ja : t.arr) {
      int pre = t.pre_state(s, ja);
      double w0 = pi(s) * ja.prob;
      st.cost += w0 * t.delay_cost_q[pre];
      for (int hh = 0; hh < t.nH; ++hh) {
        int a = policy[pre * t.nH + hh];
        double w = w0 * t.csit_p[hh];
        for (int bs = 0; bs < inst.n_users; ++bs)
          st.power[bs] += w * inst.bs_power(bs, t.joint_acts[a]);
        for (int k = 0; k < inst.n_users; ++k)
          st.backhaul[k] += w * inst.actions[k][t.joint_acts[a][k]].rate_c;
      }
    }
  }
  return st;
}

DualResult dual_solve(const TinyInstance& inst, int max_iter, double move_tol) {
  inst.validate();
  const int K = inst.n_users;
  DualResult res;
  res.gamma.gamma_p.assign(K, 0.0);
  res.gamma.gamma_c.assign(K, 0.0);

  Eigen::VectorXd warm;
  std::vector<double> step(2 * K, 0.0), last_grad(2 * K, 0.0);
  bool have_step = false;

  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    RviResult rvi = relative_value_iteration(inst, res.gamma, 1e-10, 100000,
                                             warm.size() ? &warm : nullptr);
    warm = rvi.v;
    res.theta = rvi.theta;
    PolicyStats st = greedy_policy_stats(inst, res.gamma, rvi.v);

    std::vector<double> grad(2 * K);
    for (int k = 0; k < K; ++k) {
      grad[k] = st.power[k] - inst.p_budget[k];
      grad[K + k] = st.backhaul[k] - inst.r_budget[k];
    }
    if (!have_step) {
      for (int i = 0; i < 2 * K; ++i) step[i] = 0.2 / std::max(std::abs(grad[i]), 1e-3);
      have_step = true;
    }
    double move = 0.0;
    for (int i = 0; i < 2 * K; ++i) {
      if (grad[i] * last_grad[i] < 0.0) step[i] *= 0.5;
      last_grad[i] = grad[i];
      double* g = i < K ? &res.gamma.gamma_p[i] : &res.gamma.gamma_c[i - K];
      double next = std::max(*g + step[i] * grad[i], 0.0);
      move = std::max(move, std::abs(next - *g));
      *g = next;
    }
    if (move <= move_tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

EnumerationResult enumerate_deterministic_policies(const TinyInstance& inst, double budget_slack) {
  inst.validate();
  TinyMultipliers gz{std::vector<double>(inst.n_users, 0.0), std::vector<double>(inst.n_users, 0.0)};
  JointTables t(inst, gz);
  const long n_obs = static_cast<long>(t.S) * t.nH;
  double n_pol = std::pow(static_cast<double>(t.nA), static_cast<double>(n_obs));
  if (n_pol > 2e6)
    throw std::invalid_argument("enumerate_deterministic_policies: policy space too large");

  EnumerationResult res;
  res.best_cost = std::numeric_limits<double>::infinity();
  std::vector<int> policy(n_obs, 0);
  while (true) {
    PolicyStats st = evaluate_policy(inst, policy);
    ++res.policies_checked;
    bool feasible = true;
    for (int k = 0; k < inst.n_users; ++k)
      if (st.power[k] > inst.p_budget[k] + budget_slack ||
          st.backhaul[k] > inst.r_budget[k] + budget_slack)
        feasible = false;
    if (feasible && st.cost < res.best_cost) {
      res.best_cost = st.cost;
      res.best_policy = policy;
      res.power = st.power;
      res.backhaul = st.backhaul;
      res.feasible_found = true;
    }
    long i = 0;
    while (i < n_obs) {
      if (++policy[i] < t.nA) break;
      policy[i] = 0;
      ++i;
    }
    if (i == n_obs) break;
  }
  return res;
}

}  // namespace pcomimo
