#include "pcomimo/phy.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>

namespace pcomimo {

namespace {

constexpr double kRankTol = 1e-10;

// Orthonormal basis of {u : u^H A = 0}, the complement of col(A).
MatC left_null_basis(const MatC& a) {
  if (a.cols() == 0) return MatC::Identity(a.rows(), a.rows());
  Eigen::ColPivHouseholderQR<MatC> qr(a);
  qr.setThreshold(kRankTol);
  int r = static_cast<int>(qr.rank());
  MatC q = qr.householderQ();
  return q.rightCols(a.rows() - r);
}

// Orthonormal basis of the right null space {x : A x = 0}.
MatC null_basis(const MatC& a) { return left_null_basis(a.adjoint()); }

// Right singular vectors of g on the dominant modes, via the small Gram
// matrix g g^H; deficient directions are completed orthonormally so the
// requested count always comes back.
MatC top_right_singular_vectors(const MatC& g, int count) {
  const int m = static_cast<int>(g.rows());
  const int n = static_cast<int>(g.cols());
  Eigen::SelfAdjointEigenSolver<MatC> eig(g * g.adjoint());
  MatC v(n, count);
  int filled = 0;
  double scale = std::max(eig.eigenvalues().maxCoeff(), 0.0);
  for (int i = m - 1; i >= 0 && filled < count; --i) {  // eigenvalues ascend
    double lam = eig.eigenvalues()(i);
    if (lam <= std::max(scale, 1.0) * 1e-24) break;
    v.col(filled++) = g.adjoint() * eig.eigenvectors().col(i) / std::sqrt(lam);
  }
  for (int basis = 0; filled < count && basis < n; ++basis) {
    Eigen::VectorXcd cand = Eigen::VectorXcd::Zero(n);
    cand(basis) = 1.0;
    for (int j = 0; j < filled; ++j) cand -= v.col(j).dot(cand) * v.col(j);
    double norm = cand.norm();
    if (norm > 1e-8) v.col(filled++) = cand / norm;
  }
  return v;
}

// Deterministic phase: rotate so the largest-magnitude entry is real positive.
void phase_fix(MatC& m) {
  for (int c = 0; c < m.cols(); ++c) {
    int imax = 0;
    double best = 0.0;
    for (int r = 0; r < m.rows(); ++r) {
      double mag = std::abs(m(r, c));
      if (mag > best) {
        best = mag;
        imax = r;
      }
    }
    if (best > 0.0) m.col(c) *= std::conj(m(imax, c)) / best;
  }
}

// Global channel row H_k = [H_k1 ... H_kK], N x KM.
MatC stacked_row(const std::vector<MatC>& chan, int K, int k) {
  const int N = static_cast<int>(chan[k * K].rows());
  const int M = static_cast<int>(chan[k * K].cols());
  MatC row(N, K * M);
  for (int n = 0; n < K; ++n) row.middleCols(n * M, M) = chan[k * K + n];
  return row;
}

}  // namespace

int StreamAllocation::total_streams() const {
  int t = 0;
  for (int k = 0; k < K; ++k) t += d_c[k] + d_p[k];
  return t;
}

StreamAllocation validate_streams(int K, int M, int N, const std::vector<int>& d_c,
                                  const std::vector<int>& d_p) {
  if (K < 2) throw std::invalid_argument("validate_streams: K must be >= 2");
  if (!(N <= M && K * N > M))
    throw std::invalid_argument("validate_streams: require M/K < N <= M");
  if (static_cast<int>(d_c.size()) != K || static_cast<int>(d_p.size()) != K)
    throw std::invalid_argument("validate_streams: d_c/d_p must have K entries");
  StreamAllocation a;
  a.K = K;
  a.M = M;
  a.N = N;
  a.d_c = d_c;
  a.d_p = d_p;
  a.d_kmn = std::max(M - (K - 1) * N, 0);
  for (int k = 0; k < K; ++k) {
    if (d_c[k] < 0 || d_p[k] < 0)
      throw InfeasibleAllocation("stream counts must be nonnegative (user " + std::to_string(k) + ")");
  }
  for (int k = 0; k < K; ++k) {
    int load = a.d_c[k] + a.d_p[k];
    for (int n = 0; n < K; ++n)
      if (n != k) load += a.svd_count(n);
    if (load > N)
      throw InfeasibleAllocation(
          "decode constraint violated for user " + std::to_string(k) + ": d_c[k] + d_p[k] + sum_{n!=k} (d_p[n] - d_kmn)^+ = " +
          std::to_string(load) + " > N = " + std::to_string(N));
  }
  return a;
}

DofResult dof(const StreamAllocation& a) {
  DofResult r;
  r.dof = a.total_streams();
  int min_other = 0;
  bool first = true;
  for (int k = 0; k < a.K; ++k) {
    int other = 0;
    for (int n = 0; n < a.K; ++n)
      if (n != k) other += a.d_c[n];
    if (first || other < min_other) {
      min_other = other;
      first = false;
    }
  }
  r.dof_max = a.N + (a.K - 1) * a.d_kmn + min_other;
  r.achieves_kn = (r.dof == a.K * a.N);
  return r;
}

MatC PrecoderSet::private_all(int n) const {
  MatC b(private_zf[n].rows() > 0 ? private_zf[n].rows() : private_svd[n].rows(),
         private_zf[n].cols() + private_svd[n].cols());
  b.leftCols(private_zf[n].cols()) = private_zf[n];
  b.rightCols(private_svd[n].cols()) = private_svd[n];
  return b;
}

PrecoderSet design_precoders(const StreamAllocation& a, const std::vector<MatC>& csit) {
  const int K = a.K, M = a.M, N = a.N;
  PrecoderSet p;
  p.common.resize(K);
  p.private_zf.resize(K);
  p.private_svd.resize(K);
  p.alpha.resize(K);
  p.decor_common.assign(K, MatC());
  p.decor_private.assign(K, MatC());

  for (int n = 0; n < K; ++n) {
    // common streams: joint precoder in the null of all other users' rows
    if (a.d_c[n] > 0) {
      MatC cross((K - 1) * N, K * M);
      int r = 0;
      for (int k = 0; k < K; ++k) {
        if (k == n) continue;
        cross.middleRows(r * N, N) = stacked_row(csit, K, k);
        ++r;
      }
      MatC bt = null_basis(cross);
      if (bt.cols() < a.d_c[n])
        throw std::runtime_error("design_precoders: common null space smaller than d_c");
      MatC g = stacked_row(csit, K, n) * bt;
      p.common[n] = bt * top_right_singular_vectors(g, a.d_c[n]);
      phase_fix(p.common[n]);
    } else {
      p.common[n] = MatC(K * M, 0);
    }
    Eigen::MatrixXd al(K, a.d_c[n]);
    for (int i = 0; i < a.d_c[n]; ++i)
      for (int k = 0; k < K; ++k)
        al(k, i) = p.common[n].col(i).segment(k * M, M).squaredNorm();
    p.alpha[n] = al;

    // zero-forced private branch: null of the stacked cross links to user n
    int z = a.zf_count(n);
    if (z > 0) {
      MatC cross((K - 1) * N, M);
      int r = 0;
      for (int k = 0; k < K; ++k) {
        if (k == n) continue;
        cross.middleRows(r * N, N) = csit[k * K + n];
        ++r;
      }
      MatC bt = null_basis(cross);
      if (bt.cols() < z)
        throw std::runtime_error("design_precoders: private null space smaller than requested");
      MatC g = csit[n * K + n] * bt;
      p.private_zf[n] = bt * top_right_singular_vectors(g, z);
      phase_fix(p.private_zf[n]);
    } else {
      p.private_zf[n] = MatC(M, 0);
    }

    // remaining private streams on the dominant eigenmodes of the own link
    int s = a.svd_count(n);
    if (s > 0) {
      p.private_svd[n] = top_right_singular_vectors(csit[n * K + n], s);
      phase_fix(p.private_svd[n]);
    } else {
      p.private_svd[n] = MatC(M, 0);
    }
  }
  return p;
}

void design_decorrelators(const StreamAllocation& a, const std::vector<MatC>& channel,
                          PrecoderSet& p) {
  const int K = a.K, N = a.N;
  for (int k = 0; k < K; ++k) {
    MatC hrow = stacked_row(channel, K, k);
    MatC eff_common = hrow * p.common[k];                       // N x d_c[k]
    MatC eff_zf = channel[k * K + k] * p.private_zf[k];         // N x zf_count(k)
    std::vector<MatC> eff_svd(K);
    for (int n = 0; n < K; ++n) eff_svd[n] = channel[k * K + n] * p.private_svd[n];
    MatC eff_priv = channel[k * K + k] * p.private_all(k);      // N x d_p[k]

    p.decor_common[k] = MatC(N, a.d_c[k]);
    for (int i = 0; i < a.d_c[k]; ++i) {
      int cols = (a.d_c[k] - 1) + static_cast<int>(eff_zf.cols());
      for (int n = 0; n < K; ++n) cols += static_cast<int>(eff_svd[n].cols());
      MatC ht(N, cols);
      int c = 0;
      for (int j = 0; j < a.d_c[k]; ++j)
        if (j != i) ht.col(c++) = eff_common.col(j);
      for (int j = 0; j < eff_zf.cols(); ++j) ht.col(c++) = eff_zf.col(j);
      for (int n = 0; n < K; ++n)
        for (int j = 0; j < eff_svd[n].cols(); ++j) ht.col(c++) = eff_svd[n].col(j);

      MatC u0 = left_null_basis(ht);
      if (u0.cols() == 0)
        throw std::runtime_error("design_decorrelators: empty interference-free subspace (common)");
      Eigen::VectorXcd v = u0 * (u0.adjoint() * eff_common.col(i));
      double psi = v.norm();
      // discrete alphabets can fade the desired direction to zero; keep a
      // valid decorrelator (the stream just sees zero gain this frame)
      p.decor_common[k].col(i) = psi < 1e-12 ? Eigen::VectorXcd(u0.col(0)) : v / psi;
    }
    phase_fix(p.decor_common[k]);

    p.decor_private[k] = MatC(N, a.d_p[k]);
    for (int i = 0; i < a.d_p[k]; ++i) {
      int cols = a.d_c[k] + (a.d_p[k] - 1);
      for (int n = 0; n < K; ++n)
        if (n != k) cols += static_cast<int>(eff_svd[n].cols());
      MatC ht(N, cols);
      int c = 0;
      for (int j = 0; j < a.d_c[k]; ++j) ht.col(c++) = eff_common.col(j);
      for (int j = 0; j < a.d_p[k]; ++j)
        if (j != i) ht.col(c++) = eff_priv.col(j);
      for (int n = 0; n < K; ++n) {
        if (n == k) continue;
        for (int j = 0; j < eff_svd[n].cols(); ++j) ht.col(c++) = eff_svd[n].col(j);
      }

      MatC u0 = left_null_basis(ht);
      if (u0.cols() == 0)
        throw std::runtime_error("design_decorrelators: empty interference-free subspace (private)");
      Eigen::VectorXcd v = u0 * (u0.adjoint() * eff_priv.col(i));
      double psi = v.norm();
      p.decor_private[k].col(i) = psi < 1e-12 ? Eigen::VectorXcd(u0.col(0)) : v / psi;
    }
    phase_fix(p.decor_private[k]);
  }
}

PrecoderSet design_precoder_set(const StreamAllocation& a, const GlobalChannelState& chan) {
  PrecoderSet p = design_precoders(a, chan.csit);
  design_decorrelators(a, chan.true_csi, p);
  return p;
}

ControlAction ControlAction::zeros(const StreamAllocation& a) {
  ControlAction act;
  act.P_c.resize(a.K);
  act.P_p.resize(a.K);
  act.R_c.assign(a.K, 0.0);
  act.R_p.assign(a.K, 0.0);
  for (int k = 0; k < a.K; ++k) {
    act.P_c[k] = Eigen::VectorXd::Zero(a.d_c[k]);
    act.P_p[k] = Eigen::VectorXd::Zero(a.d_p[k]);
  }
  return act;
}

void ControlAction::clamp_nonnegative() {
  for (auto& v : P_c) v = v.cwiseMax(0.0);
  for (auto& v : P_p) v = v.cwiseMax(0.0);
  for (auto& r : R_c) r = std::max(r, 0.0);
  for (auto& r : R_p) r = std::max(r, 0.0);
}

LinkQuality link_quality(const StreamAllocation& a, const PrecoderSet& p,
                         const std::vector<MatC>& channel, const ControlAction& action) {
  CapacityModel cm = build_capacity_model(a, p, channel, 1.0);
  return cm.link(action);
}

UserCapacities mutual_information(const StreamAllocation& a, const LinkQuality& lq,
                                  const ControlAction& action, double w_tau) {
  UserCapacities c;
  c.C_c.assign(a.K, 0.0);
  c.C_p.assign(a.K, 0.0);
  for (int k = 0; k < a.K; ++k) {
    for (int i = 0; i < a.d_c[k]; ++i)
      c.C_c[k] += w_tau * std::log2(1.0 + lq.sigma_c[k](i) * action.P_c[k](i) / (1.0 + lq.i_c[k](i)));
    for (int i = 0; i < a.d_p[k]; ++i)
      c.C_p[k] += w_tau * std::log2(1.0 + lq.sigma_p[k](i) * action.P_p[k](i) / (1.0 + lq.i_p[k](i)));
  }
  return c;
}

std::vector<double> goodput(const StreamAllocation& a, const ControlAction& action,
                            const UserCapacities& caps) {
  std::vector<double> u(a.K, 0.0);
  for (int k = 0; k < a.K; ++k) {
    if (action.R_c[k] <= caps.C_c[k]) u[k] += action.R_c[k];
    if (action.R_p[k] <= caps.C_p[k]) u[k] += action.R_p[k];
  }
  return u;
}

PowerBreakdown power_consumption(const StreamAllocation& a, const ControlAction& action,
                                 const PrecoderSet& p, double p_cct) {
  PowerBreakdown out;
  out.tx.assign(a.K, 0.0);
  out.total.assign(a.K, 0.0);
  for (int k = 0; k < a.K; ++k) {
    double tx = action.P_p[k].sum();
    for (int n = 0; n < a.K; ++n)
      for (int i = 0; i < a.d_c[n]; ++i) tx += action.P_c[n](i) * p.alpha[n](k, i);
    out.tx[k] = tx;
    out.total[k] = tx + (tx > 0.0 ? p_cct : 0.0);
  }
  return out;
}

int CapacityModel::power_offset_c(int k) const {
  int off = 0;
  for (int n = 0; n < k; ++n) off += alloc->d_c[n] + alloc->d_p[n];
  return off;
}

int CapacityModel::power_offset_p(int k) const { return power_offset_c(k) + alloc->d_c[k]; }

Eigen::VectorXd CapacityModel::stack_powers(const ControlAction& a) const {
  Eigen::VectorXd v(n_power);
  for (int k = 0; k < alloc->K; ++k) {
    v.segment(power_offset_c(k), alloc->d_c[k]) = a.P_c[k];
    v.segment(power_offset_p(k), alloc->d_p[k]) = a.P_p[k];
  }
  return v;
}

LinkQuality CapacityModel::link(const ControlAction& a) const {
  LinkQuality lq;
  const int K = alloc->K;
  lq.sigma_c = sigma_c;
  lq.sigma_p = sigma_p;
  lq.i_c.resize(K);
  lq.i_p.resize(K);
  Eigen::VectorXd pw = stack_powers(a);
  for (int k = 0; k < K; ++k) {
    lq.i_c[k] = gain_c[k] * pw;
    lq.i_p[k] = gain_p[k] * pw;
  }
  return lq;
}

UserCapacities CapacityModel::caps(const ControlAction& a) const {
  LinkQuality lq = link(a);
  return mutual_information(*alloc, lq, a, w_tau);
}

std::vector<StreamAllocation> enumerate_feasible_allocations(int K, int M, int N) {
  std::vector<StreamAllocation> out;
  std::vector<int> d_c(K, 0), d_p(K, 0);
  // odometer over all per-user counts bounded by N
  std::vector<int> counter(2 * K, 0);
  while (true) {
    for (int k = 0; k < K; ++k) {
      d_c[k] = counter[k];
      d_p[k] = counter[K + k];
    }
    try {
      out.push_back(validate_streams(K, M, N, d_c, d_p));
    } catch (const InfeasibleAllocation&) {
    }
    int i = 0;
    while (i < 2 * K) {
      if (++counter[i] <= N) break;
      counter[i] = 0;
      ++i;
    }
    if (i == 2 * K) break;
  }
  return out;
}

int count_interference_free_streams(const StreamAllocation& a, const std::vector<MatC>& channel,
                                    double sig_tol, double leak_tol) {
  PrecoderSet p = design_precoders(a, channel);
  design_decorrelators(a, channel, p);
  const int K = a.K;

  struct Stream {
    int user;
    bool common;
    int index;
  };
  std::vector<Stream> streams;
  for (int n = 0; n < K; ++n) {
    for (int i = 0; i < a.d_c[n]; ++i) streams.push_back({n, true, i});
    for (int i = 0; i < a.d_p[n]; ++i) streams.push_back({n, false, i});
  }
  // effective channel of stream t as seen at MS k
  auto eff_at = [&](int k, const Stream& t) -> Eigen::VectorXcd {
    if (t.common) return stacked_row(channel, K, k) * p.common[t.user].col(t.index);
    return channel[k * K + t.user] * p.private_all(t.user).col(t.index);
  };

  int count = 0;
  for (const Stream& s : streams) {
    Eigen::VectorXcd u =
        s.common ? p.decor_common[s.user].col(s.index) : p.decor_private[s.user].col(s.index);
    double sig = std::norm(u.dot(eff_at(s.user, s)));
    if (sig <= sig_tol) continue;
    double leak = 0.0;
    for (const Stream& t : streams) {
      if (t.user == s.user && t.common == s.common && t.index == s.index) continue;
      leak = std::max(leak, std::norm(u.dot(eff_at(s.user, t))));
    }
    if (leak <= leak_tol) ++count;
  }
  return count;
}

CapacityModel build_capacity_model(const StreamAllocation& a, const PrecoderSet& p,
                                   const std::vector<MatC>& channel, double w_tau) {
  const int K = a.K;
  CapacityModel cm;
  cm.alloc = &a;
  cm.w_tau = w_tau;
  cm.n_power = 0;
  for (int k = 0; k < K; ++k) cm.n_power += a.d_c[k] + a.d_p[k];
  cm.sigma_c.resize(K);
  cm.sigma_p.resize(K);
  cm.gain_c.resize(K);
  cm.gain_p.resize(K);

  for (int k = 0; k < K; ++k) {
    MatC hrow = stacked_row(channel, K, k);
    MatC eff_common_own = hrow * p.common[k];
    MatC eff_priv_own = channel[k * K + k] * p.private_all(k);

    cm.sigma_c[k] = Eigen::VectorXd(a.d_c[k]);
    cm.sigma_p[k] = Eigen::VectorXd(a.d_p[k]);
    cm.gain_c[k] = Eigen::MatrixXd::Zero(a.d_c[k], cm.n_power);
    cm.gain_p[k] = Eigen::MatrixXd::Zero(a.d_p[k], cm.n_power);

    auto fill_interference = [&](const Eigen::VectorXcd& u, Eigen::MatrixXd& gain, int row) {
      // other users' common streams and their zero-forced private streams
      for (int n = 0; n < K; ++n) {
        if (n == k) continue;
        for (int j = 0; j < a.d_c[n]; ++j) {
          Cplx x = u.dot(hrow * p.common[n].col(j));
          gain(row, cm.power_offset_c(n) + j) = std::norm(x);
        }
        for (int j = 0; j < a.zf_count(n); ++j) {
          Cplx x = u.dot(channel[k * K + n] * p.private_zf[n].col(j));
          gain(row, cm.power_offset_p(n) + j) = std::norm(x);
        }
      }
    };

    for (int i = 0; i < a.d_c[k]; ++i) {
      Eigen::VectorXcd u = p.decor_common[k].col(i);
      cm.sigma_c[k](i) = std::norm(u.dot(eff_common_own.col(i)));
      fill_interference(u, cm.gain_c[k], i);
    }
    for (int i = 0; i < a.d_p[k]; ++i) {
      Eigen::VectorXcd u = p.decor_private[k].col(i);
      cm.sigma_p[k](i) = std::norm(u.dot(eff_priv_own.col(i)));
      fill_interference(u, cm.gain_p[k], i);
    }
  }
  return cm;
}

}  // namespace pcomimo
