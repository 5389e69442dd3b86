#include "pcomimo/baselines.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

namespace pcomimo {

BaselineKind baseline_kind_from_string(const std::string& s) {
  if (s == "coordinative") return BaselineKind::Coordinative;
  if (s == "uco") return BaselineKind::Uco;
  if (s == "fullcoop") return BaselineKind::FullCoop;
  if (s == "channel_aware_pco") return BaselineKind::ChannelAwarePco;
  throw std::invalid_argument("unknown baseline kind '" + s + "'");
}

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::Coordinative: return "coordinative";
    case BaselineKind::Uco: return "uco";
    case BaselineKind::FullCoop: return "fullcoop";
    case BaselineKind::ChannelAwarePco: return "channel_aware_pco";
  }
  return "?";
}

Eigen::VectorXd waterfill(const Eigen::VectorXd& gains, double budget, double tol) {
  const int n = static_cast<int>(gains.size());
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
  if (n == 0 || budget <= 0.0) return p;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  bool any = false;
  for (int j = 0; j < n; ++j)
    if (gains(j) > 0.0) {
      lo = std::min(lo, 1.0 / gains(j));
      hi = std::max(hi, 1.0 / gains(j));
      any = true;
    }
  if (!any) return p;
  hi += budget;
  auto used = [&](double mu) {
    double s = 0.0;
    for (int j = 0; j < n; ++j)
      if (gains(j) > 0.0) s += std::max(mu - 1.0 / gains(j), 0.0);
    return s;
  };
  for (int it = 0; it < 200 && hi - lo > tol * (1.0 + hi); ++it) {
    double mid = 0.5 * (lo + hi);
    (used(mid) > budget ? hi : lo) = mid;
  }
  double mu = 0.5 * (lo + hi);
  for (int j = 0; j < n; ++j)
    if (gains(j) > 0.0) p(j) = std::max(mu - 1.0 / gains(j), 0.0);
  // exact budget: rescale the positive part onto the constraint
  double tot = p.sum();
  if (tot > 0.0) p *= budget / tot;
  return p;
}

Eigen::VectorXd waterfill_shared(const Eigen::VectorXd& gains, const Eigen::MatrixXd& charge,
                                 const Eigen::VectorXd& budgets, int sweeps, double tol) {
  const int n = static_cast<int>(gains.size());
  const int K = static_cast<int>(budgets.size());
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
  if (n == 0) return p;
  constexpr double kLn2 = 0.69314718055994530942;
  constexpr double kHuge = 1e12;

  Eigen::VectorXd nu = Eigen::VectorXd::Constant(K, 1.0);
  auto powers = [&](const Eigen::VectorXd& duals) {
    Eigen::VectorXd out(n);
    for (int j = 0; j < n; ++j) {
      if (gains(j) <= 0.0) {
        out(j) = 0.0;
        continue;
      }
      double w = charge.col(j).dot(duals) * kLn2;
      double level = w > 1.0 / kHuge ? 1.0 / w : kHuge;
      out(j) = std::min(std::max(level - 1.0 / gains(j), 0.0), kHuge);
    }
    return out;
  };
  auto draw = [&](int k, const Eigen::VectorXd& duals) {
    return charge.row(k).dot(powers(duals));
  };

  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (int k = 0; k < K; ++k) {
      Eigen::VectorXd duals = nu;
      duals(k) = 0.0;
      if (draw(k, duals) <= budgets(k) + tol) {
        nu(k) = 0.0;
        continue;
      }
      double lo = 0.0, hi = 1.0;
      duals(k) = hi;
      while (draw(k, duals) > budgets(k) && hi < 1e9) {
        hi *= 2.0;
        duals(k) = hi;
      }
      for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        duals(k) = mid;
        (draw(k, duals) > budgets(k) ? lo : hi) = mid;
      }
      nu(k) = 0.5 * (lo + hi);
    }
  }
  p = powers(nu);
  // snap onto the binding budgets to remove bisection slack
  for (int k = 0; k < K; ++k) {
    double used = charge.row(k).dot(p);
    if (used > budgets(k) && used > 0.0) {
      double scale = budgets(k) / used;
      for (int j = 0; j < n; ++j)
        if (charge(k, j) > 0.0) p(j) *= scale;
    }
  }
  return p;
}

StreamAllocation coordinative_allocation(int K, int M, int N) {
  int d_kmn = std::max(M - (K - 1) * N, 0);
  std::vector<int> d_c(K, 0), d_p(K, d_kmn);
  d_p[0] = N;
  return validate_streams(K, M, N, d_c, d_p);
}

StreamAllocation fullcoop_allocation(int K, int M, int N) {
  std::vector<int> d_c(K, N), d_p(K, 0);
  return validate_streams(K, M, N, d_c, d_p);
}

StreamAllocation uco_allocation(int K, int M, int N, int common_user) {
  if (K != 2) throw std::invalid_argument("uco_allocation: Uco applies to K=2 only");
  int d_kmn = std::max(M - (K - 1) * N, 0);
  std::vector<int> d_c(K, 0), d_p(K, d_kmn);
  d_c[common_user] = N - d_kmn;
  return validate_streams(K, M, N, d_c, d_p);
}

BaselineController::BaselineController(BaselineKind kind, int K, int M, int N,
                                       const StreamAllocation& pco_template,
                                       std::vector<double> p_budget, std::vector<double> r_budget,
                                       double w_tau)
    : kind_(kind),
      K_(K),
      M_(M),
      N_(N),
      p_budget_(std::move(p_budget)),
      r_budget_(std::move(r_budget)),
      credit_(K, 0.0),
      w_tau_(w_tau),
      alloc_(pco_template) {
  switch (kind) {
    case BaselineKind::Coordinative:
      alloc_ = coordinative_allocation(K, M, N);
      locked_ = true;
      break;
    case BaselineKind::FullCoop:
      alloc_ = fullcoop_allocation(K, M, N);
      locked_ = true;
      break;
    case BaselineKind::Uco:
      alloc_ = uco_allocation(K, M, N, 0);
      uco_alt_ = uco_allocation(K, M, N, 1);
      break;
    case BaselineKind::ChannelAwarePco:
      locked_ = true;
      break;
  }
}

const StreamAllocation& BaselineController::allocation() const { return alloc_; }

BaselineDecision BaselineController::decide(const GlobalChannelState& chan) {
  if (!locked_) {
    // static uni-directional sharing toward the stronger estimated own link
    double best = -1.0;
    int user = 0;
    for (int k = 0; k < K_; ++k) {
      Eigen::JacobiSVD<MatC> svd(chan.hhat(k, k));
      double top = svd.singularValues()(0);
      if (top > best) {
        best = top;
        user = k;
      }
    }
    if (user == 1 && uco_alt_) alloc_ = *uco_alt_;
    locked_ = true;
  }

  BaselineDecision d;
  d.alloc = &alloc_;
  d.precoders = design_precoders(alloc_, chan.csit);

  // BS-side world model: decorrelators and capacities as if the CSIT were true
  PrecoderSet est = d.precoders;
  design_decorrelators(alloc_, chan.csit, est);
  CapacityModel cm = build_capacity_model(alloc_, est, chan.csit, w_tau_);

  // stream list for the shared waterfill
  int n_streams = alloc_.total_streams();
  Eigen::VectorXd gains(n_streams);
  Eigen::MatrixXd charge = Eigen::MatrixXd::Zero(K_, n_streams);
  int j = 0;
  for (int n = 0; n < K_; ++n) {
    for (int i = 0; i < alloc_.d_c[n]; ++i, ++j) {
      gains(j) = cm.sigma_c[n](i);
      charge.col(j) = d.precoders.alpha[n].col(i);
    }
    for (int i = 0; i < alloc_.d_p[n]; ++i, ++j) {
      gains(j) = cm.sigma_p[n](i);
      charge(n, j) = 1.0;
    }
  }
  Eigen::VectorXd bud(K_);
  for (int k = 0; k < K_; ++k) bud(k) = p_budget_[k];
  Eigen::VectorXd p = waterfill_shared(gains, charge, bud);

  d.action = ControlAction::zeros(alloc_);
  j = 0;
  for (int n = 0; n < K_; ++n) {
    for (int i = 0; i < alloc_.d_c[n]; ++i, ++j) d.action.P_c[n](i) = p(j);
    for (int i = 0; i < alloc_.d_p[n]; ++i, ++j) d.action.P_p[n](i) = p(j);
  }

  UserCapacities est_caps = cm.caps(d.action);
  for (int n = 0; n < K_; ++n) {
    d.action.R_p[n] = est_caps.C_p[n];
    double avail = credit_[n] + r_budget_[n];
    d.action.R_c[n] = std::min(est_caps.C_c[n], avail);
    credit_[n] = avail - d.action.R_c[n];
  }
  return d;
}

}  // namespace pcomimo
