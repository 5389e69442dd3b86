#include "pcomimo/channel.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <stdexcept>

namespace pcomimo {

void CsiAlphabet::validate() const {
  if (values.empty()) throw std::invalid_argument("alphabet: empty value list");
  if (values.size() != probabilities.size())
    throw std::invalid_argument("alphabet: values/probabilities size mismatch");
  double sum = 0.0;
  for (double p : probabilities) {
    if (p < 0.0) throw std::invalid_argument("alphabet: negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("alphabet: probabilities do not sum to 1");
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = i + 1; j < values.size(); ++j)
      if (values[i] == values[j]) throw std::invalid_argument("alphabet: duplicate value");
}

CsiAlphabet build_alphabet(int size, std::uint64_t seed) {
  if (size < 2) throw std::invalid_argument("build_alphabet: size must be >= 2");
  CsiAlphabet a;
  Rng rng(derive_seed(seed, 0x616c7068ULL));
  a.values.reserve(size);
  while (static_cast<int>(a.values.size()) < size) {
    Cplx v = rng.complex_normal(1.0);
    if (std::find(a.values.begin(), a.values.end(), v) == a.values.end())
      a.values.push_back(v);
  }
  a.probabilities.assign(size, 1.0 / size);
  a.validate();
  return a;
}

bool CsitErrorKernel::is_identity() const {
  for (int i = 0; i < conditional.rows(); ++i)
    for (int j = 0; j < conditional.cols(); ++j)
      if (conditional(i, j) != (i == j ? 1.0 : 0.0)) return false;
  return true;
}

double CsitErrorKernel::recompute_epsilon() const {
  double eps = 0.0;
  for (int i = 0; i < conditional.rows(); ++i)
    eps = std::max(eps, 1.0 - conditional(i, i));
  return eps;
}

void CsitErrorKernel::validate() const {
  if (conditional.rows() == 0 || conditional.rows() != conditional.cols())
    throw std::invalid_argument("kernel: must be square and nonempty");
  for (int i = 0; i < conditional.rows(); ++i) {
    double sum = 0.0;
    for (int j = 0; j < conditional.cols(); ++j) {
      if (conditional(i, j) < 0.0) throw std::invalid_argument("kernel: negative entry");
      sum += conditional(i, j);
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("kernel: row does not sum to 1");
  }
  if (std::abs(epsilon - recompute_epsilon()) > 1e-12)
    throw std::invalid_argument("kernel: stored epsilon does not match rows");
}

Eigen::MatrixXd CsitErrorKernel::posterior(const std::vector<double>& prior) const {
  const int n = size();
  if (static_cast<int>(prior.size()) != n)
    throw std::invalid_argument("kernel posterior: prior size mismatch");
  Eigen::MatrixXd post(n, n);  // (true index) x (csit index)
  for (int j = 0; j < n; ++j) {
    double z = 0.0;
    for (int i = 0; i < n; ++i) z += conditional(i, j) * prior[i];
    for (int i = 0; i < n; ++i)
      post(i, j) = z > 0.0 ? conditional(i, j) * prior[i] / z : (i == j ? 1.0 : 0.0);
  }
  return post;
}

namespace {

int nearest_index(const std::vector<Cplx>& values, Cplx v) {
  int best = 0;
  double bd = std::norm(v - values[0]);
  for (int j = 1; j < static_cast<int>(values.size()); ++j) {
    double d = std::norm(v - values[j]);
    if (d < bd) {
      bd = d;
      best = j;
    }
  }
  return best;
}

}  // namespace

CsitErrorKernel build_error_kernel(const CsiAlphabet& alphabet, double sigma_e, int mc_samples,
                                   std::uint64_t mc_seed) {
  alphabet.validate();
  if (sigma_e < 0.0) throw std::invalid_argument("build_error_kernel: negative variance");
  const int n = alphabet.size();
  CsitErrorKernel k;
  if (sigma_e == 0.0) {
    k.conditional = Eigen::MatrixXd::Identity(n, n);
    k.epsilon = 0.0;
    return k;
  }
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(mc_seed, static_cast<std::uint64_t>(i)));
    for (int s = 0; s < mc_samples; ++s) {
      Cplx noisy = alphabet.values[i] + rng.complex_normal(sigma_e);
      rows(i, nearest_index(alphabet.values, noisy)) += 1.0;
    }
    rows.row(i) /= static_cast<double>(mc_samples);
  }
  k.conditional = rows;
  k.epsilon = k.recompute_epsilon();
  k.validate();
  return k;
}

bool full_rank(const MatC& m, double tol) {
  if (m.rows() == 0 || m.cols() == 0) return false;
  // Gram determinant of the smaller side; cheap for the tiny matrices here
  MatC g = m.rows() <= m.cols() ? MatC(m * m.adjoint()) : MatC(m.adjoint() * m);
  double scale = g.diagonal().real().maxCoeff();
  if (scale <= 0.0) return false;
  int n = static_cast<int>(g.rows());
  return g.determinant().real() > tol * tol * std::pow(scale, n);
}

std::uint64_t GlobalChannelState::csit_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& idx : csit_idx)
    for (int c = 0; c < idx.cols(); ++c)
      for (int r = 0; r < idx.rows(); ++r) {
        h ^= static_cast<std::uint64_t>(idx(r, c)) + 0x9e3779b9ULL;
        h *= 0x100000001b3ULL;
      }
  return mix64(h);
}

GlobalChannelState sample_frame(const CsiAlphabet& alphabet, const CsitErrorKernel& kernel,
                                int K, int M, int N, Rng& rng) {
  if (K < 2) throw std::invalid_argument("sample_frame: K must be >= 2");
  if (!(N <= M && K * N > M))
    throw std::invalid_argument("sample_frame: require M/K < N <= M");
  if (kernel.size() != alphabet.size())
    throw std::invalid_argument("sample_frame: kernel/alphabet size mismatch");

  GlobalChannelState st;
  st.K = K;
  st.M = M;
  st.N = N;
  st.true_csi.resize(K * K);
  st.csit.resize(K * K);
  st.true_idx.resize(K * K);
  st.csit_idx.resize(K * K);

  const bool identity = kernel.is_identity();
  std::span<const double> prior(alphabet.probabilities);
  for (int l = 0; l < K * K; ++l) {
    MatI tidx(N, M), cidx(N, M);
    MatC tmat(N, M), cmat(N, M);
    auto draw = [&](MatI& idx, MatC& mat, auto&& entry) {
      for (int attempt = 0; attempt < 100; ++attempt) {
        for (int r = 0; r < N; ++r)
          for (int c = 0; c < M; ++c) {
            idx(r, c) = entry(r, c);
            mat(r, c) = alphabet.values[idx(r, c)];
          }
        if (full_rank(mat)) return;
      }
      throw std::runtime_error("sample_frame: degenerate alphabet, no full-rank draw in 100 attempts");
    };
    draw(tidx, tmat, [&](int, int) { return rng.categorical(prior); });
    if (identity) {
      cidx = tidx;
      cmat = tmat;
    } else {
      draw(cidx, cmat, [&](int r, int c) {
        const auto& row = kernel.conditional;
        double u = rng.uniform(), acc = 0.0;
        int last = kernel.size() - 1;
        for (int j = 0; j < kernel.size(); ++j) {
          acc += row(tidx(r, c), j);
          if (u <= acc) return j;
        }
        return last;
      });
    }
    st.true_idx[l] = tidx;
    st.true_csi[l] = tmat;
    st.csit_idx[l] = cidx;
    st.csit[l] = cmat;
  }
  return st;
}

void MatrixStateSpace::validate() const {
  if (states.empty()) throw std::invalid_argument("matrix states: empty");
  if (states.size() != probabilities.size())
    throw std::invalid_argument("matrix states: probability size mismatch");
  double sum = 0.0;
  for (double p : probabilities) sum += p;
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("matrix states: probabilities do not sum to 1");
}

MatrixStateSpace build_matrix_states(int count, int M, int N, std::uint64_t seed, double sigma_e,
                                     int mc_samples, std::uint64_t mc_seed) {
  if (count < 1) throw std::invalid_argument("build_matrix_states: count must be >= 1");
  if (sigma_e < 0.0) throw std::invalid_argument("build_matrix_states: negative variance");
  MatrixStateSpace sp;
  sp.M = M;
  sp.N = N;
  Rng rng(derive_seed(seed, 0x6d7374ULL));
  while (static_cast<int>(sp.states.size()) < count) {
    MatC m(N, M);
    for (int r = 0; r < N; ++r)
      for (int c = 0; c < M; ++c) m(r, c) = rng.complex_normal(1.0);
    if (full_rank(m)) sp.states.push_back(m);
  }
  sp.probabilities.assign(count, 1.0 / count);
  if (sigma_e == 0.0) {
    sp.kernel = Eigen::MatrixXd::Identity(count, count);
    sp.epsilon = 0.0;
  } else {
    // entrywise noise, snap to the nearest state in Frobenius distance
    Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(count, count);
    for (int i = 0; i < count; ++i) {
      Rng r2(derive_seed(mc_seed, static_cast<std::uint64_t>(i)));
      for (int s = 0; s < mc_samples; ++s) {
        MatC noisy = sp.states[i];
        for (int r = 0; r < N; ++r)
          for (int c = 0; c < M; ++c) noisy(r, c) += r2.complex_normal(sigma_e);
        int best = 0;
        double bd = (noisy - sp.states[0]).squaredNorm();
        for (int j = 1; j < count; ++j) {
          double d = (noisy - sp.states[j]).squaredNorm();
          if (d < bd) {
            bd = d;
            best = j;
          }
        }
        rows(i, best) += 1.0;
      }
      rows.row(i) /= static_cast<double>(mc_samples);
    }
    sp.kernel = rows;
    sp.epsilon = 0.0;
    for (int i = 0; i < count; ++i) sp.epsilon = std::max(sp.epsilon, 1.0 - rows(i, i));
  }
  sp.validate();
  return sp;
}

GlobalChannelState sample_frame(const MatrixStateSpace& space, int K, Rng& rng) {
  if (K < 2) throw std::invalid_argument("sample_frame: K must be >= 2");
  GlobalChannelState st;
  st.K = K;
  st.M = space.M;
  st.N = space.N;
  st.true_csi.resize(K * K);
  st.csit.resize(K * K);
  st.true_idx.resize(K * K);
  st.csit_idx.resize(K * K);
  std::span<const double> prior(space.probabilities);
  for (int l = 0; l < K * K; ++l) {
    int ti = rng.categorical(prior);
    int ci;
    double u = rng.uniform(), acc = 0.0;
    ci = space.size() - 1;
    for (int j = 0; j < space.size(); ++j) {
      acc += space.kernel(ti, j);
      if (u <= acc) {
        ci = j;
        break;
      }
    }
    st.true_idx[l] = MatI::Constant(1, 1, ti);
    st.csit_idx[l] = MatI::Constant(1, 1, ci);
    st.true_csi[l] = space.states[ti];
    st.csit[l] = space.states[ci];
  }
  return st;
}

std::vector<MatC> random_channel(int K, int M, int N, Rng& rng) {
  std::vector<MatC> out(K * K);
  for (auto& m : out) {
    do {
      m = MatC(N, M);
      for (int r = 0; r < N; ++r)
        for (int c = 0; c < M; ++c) m(r, c) = rng.complex_normal(1.0);
    } while (!full_rank(m));
  }
  return out;
}

}  // namespace pcomimo
