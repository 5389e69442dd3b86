#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

#include "pcomimo/rng.hpp"

namespace pcomimo {

using Cplx = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using MatI = Eigen::MatrixXi;

/// Finite discrete fading-gain alphabet for scalar channel entries.
struct CsiAlphabet {
  std::vector<Cplx> values;
  std::vector<double> probabilities;

  int size() const { return static_cast<int>(values.size()); }
  void validate() const;  // throws std::invalid_argument on a broken alphabet
};

/// `size` complex gains frozen from a seeded unit-variance complex Gaussian,
/// uniform probabilities.
CsiAlphabet build_alphabet(int size, std::uint64_t seed);

/// Row-stochastic map from a true alphabet index to CSIT index probabilities.
/// epsilon is the largest off-diagonal row mass.
struct CsitErrorKernel {
  Eigen::MatrixXd conditional;  // (true index) x (csit index)
  double epsilon = 0.0;

  int size() const { return static_cast<int>(conditional.rows()); }
  bool is_identity() const;
  double recompute_epsilon() const;
  void validate() const;
  /// Pr{true=i | csit=j} for alphabet priors `prior`.
  Eigen::MatrixXd posterior(const std::vector<double>& prior) const;
};

/// Noise-then-quantize kernel: true value + CN(0, sigma_e), snapped to the
/// nearest alphabet member; rows estimated by Monte-Carlo (fixed seed).
CsitErrorKernel build_error_kernel(const CsiAlphabet& alphabet, double sigma_e,
                                   int mc_samples = 100000,
                                   std::uint64_t mc_seed = 0x6b65726e656cULL);

/// One frame of true CSI and CSIT for all K^2 links. h(k,n) is the N x M
/// channel from BS n to MS k; index matrices hold the alphabet index of every
/// entry (scalar mode) or the matrix-state index (whole-matrix mode, where the
/// index matrices are 1x1).
struct GlobalChannelState {
  int K = 0, M = 0, N = 0;
  long frame_index = 0;
  std::vector<MatC> true_csi, csit;    // K*K entries, row-major (k, n)
  std::vector<MatI> true_idx, csit_idx;

  const MatC& h(int k, int n) const { return true_csi[k * K + n]; }
  const MatC& hhat(int k, int n) const { return csit[k * K + n]; }
  std::uint64_t csit_hash() const;
};

GlobalChannelState sample_frame(const CsiAlphabet& alphabet, const CsitErrorKernel& kernel,
                                int K, int M, int N, Rng& rng);

/// Whole-matrix state space: each link's channel is one of `states`
/// (full-rank N x M matrices); the CSIT kernel acts on state indices.
struct MatrixStateSpace {
  int M = 0, N = 0;
  std::vector<MatC> states;
  std::vector<double> probabilities;
  Eigen::MatrixXd kernel;  // Pr{csit state | true state}
  double epsilon = 0.0;

  int size() const { return static_cast<int>(states.size()); }
  void validate() const;
};

MatrixStateSpace build_matrix_states(int count, int M, int N, std::uint64_t seed,
                                     double sigma_e, int mc_samples = 100000,
                                     std::uint64_t mc_seed = 0x6d6174726978ULL);

GlobalChannelState sample_frame(const MatrixStateSpace& space, int K, Rng& rng);

bool full_rank(const MatC& m, double tol = 1e-9);

/// K*K continuous random channel draws (unit-variance complex Gaussian
/// entries), handy for geometry checks that do not need an alphabet.
std::vector<MatC> random_channel(int K, int M, int N, Rng& rng);

}  // namespace pcomimo
