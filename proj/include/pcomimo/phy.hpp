#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcomimo/channel.hpp"

namespace pcomimo {

struct InfeasibleAllocation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Per-user common/private stream counts. The first min(d_p, d_kmn) private
/// streams ride the cross-null (zero-forced) branch, the rest the SVD branch.
struct StreamAllocation {
  int K = 0, M = 0, N = 0;
  std::vector<int> d_c, d_p;
  int d_kmn = 0;  // [M - (K-1)N]^+

  int zf_count(int k) const { return std::min(d_p[k], d_kmn); }
  int svd_count(int k) const { return d_p[k] - zf_count(k); }
  int total_streams() const;
  int action_size(int k) const { return d_c[k] + d_p[k] + 2; }  // powers + R_c + R_p
};

/// Checks the per-user decode feasibility
///   d_c[k] + d_p[k] + sum_{n != k} svd_count(n) <= N
/// which reduces to d_c[k] + sum_n d_p[n] <= N + (K-1) d_kmn whenever every
/// d_p[n] >= d_kmn, and also admits the degenerate cooperative cases
/// (d_p = 0) that drop the zero-forced branch entirely.
StreamAllocation validate_streams(int K, int M, int N, const std::vector<int>& d_c,
                                  const std::vector<int>& d_p);

struct DofResult {
  int dof = 0;       // sum_k (d_c[k] + d_p[k])
  int dof_max = 0;   // N + (K-1) d_kmn + min_k sum_{n != k} d_c[n]
  bool achieves_kn = false;
};

DofResult dof(const StreamAllocation& alloc);

/// BS-side precoders plus MS-side decorrelators and the per-BS power split of
/// every common stream.
struct PrecoderSet {
  // per user n
  std::vector<MatC> common;        // KM x d_c[n], unit columns
  std::vector<MatC> private_zf;    // M x zf_count(n)
  std::vector<MatC> private_svd;   // M x svd_count(n)
  std::vector<Eigen::MatrixXd> alpha;  // K x d_c[n]; alpha[n](k,i) = BS k share of stream i
  // per user k, decorrelators as unit columns
  std::vector<MatC> decor_common;   // N x d_c[k]
  std::vector<MatC> decor_private;  // N x d_p[k]

  MatC private_all(int n) const;  // [private_zf | private_svd], M x d_p[n]
};

/// BS-side design from CSIT (Null-space + SVD construction). Decorrelator
/// columns are left empty; fill them with design_decorrelators.
PrecoderSet design_precoders(const StreamAllocation& alloc, const std::vector<MatC>& csit);

/// MS-side decorrelators for given precoders against `channel` (the true CSI
/// under perfect CSIR; baselines pass the CSIT to model the BS-side estimate).
void design_decorrelators(const StreamAllocation& alloc, const std::vector<MatC>& channel,
                          PrecoderSet& pre);

/// Convenience: precoders from chan.csit, decorrelators from chan.true_csi.
PrecoderSet design_precoder_set(const StreamAllocation& alloc, const GlobalChannelState& chan);

/// Per-user per-stream powers (watts) and rates (bits/frame).
struct ControlAction {
  std::vector<Eigen::VectorXd> P_c, P_p;
  std::vector<double> R_c, R_p;

  static ControlAction zeros(const StreamAllocation& alloc);
  void clamp_nonnegative();
};

struct LinkQuality {
  std::vector<Eigen::VectorXd> sigma_c, sigma_p;  // effective channel gains
  std::vector<Eigen::VectorXd> i_c, i_p;          // residual interference powers
};

/// sigma and residual-interference terms of every stream against `channel`.
LinkQuality link_quality(const StreamAllocation& alloc, const PrecoderSet& pre,
                         const std::vector<MatC>& channel, const ControlAction& action);

struct UserCapacities {
  std::vector<double> C_c, C_p;  // bits/frame per user, streams summed
};

/// Shannon rates log2(1 + sigma P / (1 + I)) summed per user and scaled by
/// w_tau (bandwidth x frame duration) into bits/frame.
UserCapacities mutual_information(const StreamAllocation& alloc, const LinkQuality& lq,
                                  const ControlAction& action, double w_tau);

/// Bits delivered: each rate counts in full iff it does not exceed the
/// corresponding mutual information.
std::vector<double> goodput(const StreamAllocation& alloc, const ControlAction& action,
                            const UserCapacities& caps);

struct PowerBreakdown {
  std::vector<double> tx, total;  // per BS
};

PowerBreakdown power_consumption(const StreamAllocation& alloc, const ControlAction& action,
                                 const PrecoderSet& pre, double p_cct);

/// Fixed-geometry capacity evaluator: sigma plus linear interference
/// coefficients, so capacities can be recomputed cheaply while powers vary.
/// Power components are stacked [P_c(0), P_p(0), P_c(1), P_p(1), ...].
struct CapacityModel {
  const StreamAllocation* alloc = nullptr;
  double w_tau = 1.0;
  std::vector<Eigen::VectorXd> sigma_c, sigma_p;
  std::vector<Eigen::MatrixXd> gain_c, gain_p;  // per user: streams x n_power

  int n_power = 0;
  int power_offset_c(int k) const;
  int power_offset_p(int k) const;
  Eigen::VectorXd stack_powers(const ControlAction& a) const;
  LinkQuality link(const ControlAction& a) const;
  UserCapacities caps(const ControlAction& a) const;
};

CapacityModel build_capacity_model(const StreamAllocation& alloc, const PrecoderSet& pre,
                                   const std::vector<MatC>& channel, double w_tau);

/// All (d_c, d_p) combinations that pass validate_streams for this geometry.
std::vector<StreamAllocation> enumerate_feasible_allocations(int K, int M, int N);

/// Independent DoF probe: design under perfect CSIT for the given channel and
/// count streams whose desired gain survives while every cross-stream leakage
/// is numerically nulled.
int count_interference_free_streams(const StreamAllocation& alloc,
                                    const std::vector<MatC>& channel, double sig_tol = 1e-6,
                                    double leak_tol = 1e-9);

}  // namespace pcomimo
