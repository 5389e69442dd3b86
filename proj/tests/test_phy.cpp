#include <doctest.h>

#include <cmath>

#include "pcomimo/phy.hpp"

using namespace pcomimo;

namespace {

MatC stack_row(const std::vector<MatC>& chan, int K, int k) {
  const int N = static_cast<int>(chan[k * K].rows());
  const int M = static_cast<int>(chan[k * K].cols());
  MatC row(N, K * M);
  for (int n = 0; n < K; ++n) row.middleCols(n * M, M) = chan[k * K + n];
  return row;
}

}  // namespace

TEST_CASE("stream feasibility") {
  StreamAllocation a = validate_streams(2, 3, 2, {1, 1}, {1, 1});
  CHECK(a.d_kmn == 1);
  CHECK_THROWS_AS(validate_streams(2, 3, 2, {2, 1}, {1, 1}), InfeasibleAllocation);
  CHECK_NOTHROW(validate_streams(2, 3, 2, {0, 0}, {1, 1}));   // coordinative special case
  CHECK_NOTHROW(validate_streams(2, 3, 2, {2, 2}, {0, 0}));   // full cooperation
  CHECK_NOTHROW(validate_streams(2, 3, 2, {0, 0}, {2, 1}));
  CHECK_THROWS_AS(validate_streams(2, 3, 2, {0, 0}, {2, 2}), InfeasibleAllocation);
  CHECK_THROWS_AS(validate_streams(1, 3, 2, {0}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(validate_streams(2, 4, 2, {0, 0}, {1, 1}), std::invalid_argument);
}

TEST_CASE("dof formula reproduces the scheme table") {
  // K = 2, M = 3, N = 2
  CHECK(dof(validate_streams(2, 3, 2, {0, 0}, {2, 1})).dof == 3);       // coordinative: M
  CHECK(dof(validate_streams(2, 3, 2, {0, 1}, {1, 1})).dof == 3);       // uco: M
  CHECK(dof(validate_streams(2, 3, 2, {2, 2}, {0, 0})).dof == 4);       // full cooperative: 2N
  auto pco = dof(validate_streams(2, 3, 2, {1, 1}, {1, 1}));
  CHECK(pco.dof == 4);
  CHECK(pco.achieves_kn);
  CHECK(dof(validate_streams(2, 3, 2, {0, 0}, {1, 2})).dof == 3);

  // K = 3, M = 3, N = 2: d_kmn = 0
  auto coord3 = dof(validate_streams(3, 3, 2, {0, 0, 0}, {1, 1, 0}));
  CHECK(coord3.dof == 2);  // N + (K-1) d_kmn
  auto coop3 = dof(validate_streams(3, 3, 2, {2, 2, 2}, {0, 0, 0}));
  CHECK(coop3.dof == 6);   // KN
  CHECK(coop3.achieves_kn);
}

TEST_CASE("zero-forcing residuals vanish under perfect csit") {
  StreamAllocation a = validate_streams(2, 3, 2, {1, 1}, {1, 1});
  Rng rng(2024);
  double worst_tx = 0.0, worst_rx = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto chan = random_channel(2, 3, 2, rng);
    PrecoderSet p = design_precoders(a, chan);
    design_decorrelators(a, chan, p);
    for (int n = 0; n < 2; ++n) {
      for (int k = 0; k < 2; ++k) {
        if (k == n) continue;
        worst_tx = std::max(worst_tx, (stack_row(chan, 2, k) * p.common[n]).cwiseAbs().maxCoeff());
        if (p.private_zf[n].cols())
          worst_tx =
              std::max(worst_tx, (chan[k * 2 + n] * p.private_zf[n]).cwiseAbs().maxCoeff());
      }
    }
    // decorrelators: every stream sees zero gain from every other stream
    CapacityModel cm = build_capacity_model(a, p, chan, 1.0);
    for (int k = 0; k < 2; ++k) {
      worst_rx = std::max(worst_rx, cm.gain_c[k].cwiseAbs().maxCoeff());
      worst_rx = std::max(worst_rx, cm.gain_p[k].cwiseAbs().maxCoeff());
    }
  }
  CHECK(worst_tx <= 1e-10);
  CHECK(worst_rx <= 1e-10);
}

TEST_CASE("precoder columns are unit norm and alpha is a partition") {
  StreamAllocation a = validate_streams(2, 3, 2, {1, 1}, {1, 1});
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    auto chan = random_channel(2, 3, 2, rng);
    PrecoderSet p = design_precoders(a, chan);
    design_decorrelators(a, chan, p);
    for (int n = 0; n < 2; ++n) {
      for (int i = 0; i < a.d_c[n]; ++i) {
        CHECK(std::abs(p.common[n].col(i).norm() - 1.0) <= 1e-10);
        double sum = 0.0;
        for (int k = 0; k < 2; ++k) {
          CHECK(p.alpha[n](k, i) >= 0.0);
          CHECK(p.alpha[n](k, i) <= 1.0 + 1e-12);
          sum += p.alpha[n](k, i);
        }
        CHECK(std::abs(sum - 1.0) <= 1e-10);
      }
      for (int i = 0; i < p.private_zf[n].cols(); ++i)
        CHECK(std::abs(p.private_zf[n].col(i).norm() - 1.0) <= 1e-10);
      for (int i = 0; i < a.d_c[n]; ++i)
        CHECK(std::abs(p.decor_common[n].col(i).norm() - 1.0) <= 1e-10);
      for (int i = 0; i < a.d_p[n]; ++i)
        CHECK(std::abs(p.decor_private[n].col(i).norm() - 1.0) <= 1e-10);
    }
  }

  StreamAllocation nc = validate_streams(2, 3, 2, {0, 0}, {1, 1});
  auto chan = random_channel(2, 3, 2, rng);
  PrecoderSet p = design_precoders(nc, chan);
  CHECK(p.common[0].cols() == 0);
  CHECK(p.alpha[0].cols() == 0);
}

TEST_CASE("link quality: interference behavior") {
  StreamAllocation a = validate_streams(2, 3, 2, {1, 1}, {1, 1});
  Rng rng(99);
  ControlAction act = ControlAction::zeros(a);
  for (int k = 0; k < 2; ++k) {
    act.P_c[k].setConstant(2.0);
    act.P_p[k].setConstant(1.5);
  }

  // zero powers: no interference regardless of mismatch
  auto truth = random_channel(2, 3, 2, rng);
  auto csit = random_channel(2, 3, 2, rng);
  PrecoderSet mis = design_precoders(a, csit);
  design_decorrelators(a, truth, mis);
  LinkQuality lq0 = link_quality(a, mis, truth, ControlAction::zeros(a));
  for (int k = 0; k < 2; ++k) {
    CHECK(lq0.i_c[k].maxCoeff() == 0.0);
    CHECK(lq0.i_p[k].maxCoeff() == 0.0);
  }

  // imperfect csit: interference shows up in a positive fraction of draws
  int positive = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto h = random_channel(2, 3, 2, rng);
    auto hhat = random_channel(2, 3, 2, rng);
    PrecoderSet p = design_precoders(a, hhat);
    design_decorrelators(a, h, p);
    LinkQuality lq = link_quality(a, p, h, act);
    double maxi = 0.0;
    for (int k = 0; k < 2; ++k)
      maxi = std::max({maxi, lq.i_c[k].maxCoeff(), lq.i_p[k].maxCoeff()});
    if (maxi > 1e-6) ++positive;
  }
  CHECK(positive > 150);

  // perfect csit: interference numerically zero at any power
  PrecoderSet p = design_precoders(a, truth);
  design_decorrelators(a, truth, p);
  LinkQuality lq = link_quality(a, p, truth, act);
  for (int k = 0; k < 2; ++k) {
    CHECK(lq.i_c[k].maxCoeff() <= 1e-9);
    CHECK(lq.i_p[k].maxCoeff() <= 1e-9);
  }
}

TEST_CASE("mutual information closed forms") {
  StreamAllocation a = validate_streams(2, 3, 2, {1, 1}, {1, 1});
  LinkQuality lq;
  lq.sigma_c = {Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 1.0)};
  lq.sigma_p = {Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 1.0)};
  lq.i_c = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 1.0)};
  lq.i_p = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
  ControlAction act = ControlAction::zeros(a);
  act.P_c[0](0) = 3.0;
  act.P_c[1](0) = 3.0;
  UserCapacities c = mutual_information(a, lq, act, 1.0);
  CHECK(c.C_c[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(c.C_c[1] == doctest::Approx(std::log2(2.5)).epsilon(1e-12));
  CHECK(c.C_p[0] == 0.0);  // zero power
}

TEST_CASE("goodput boundary semantics") {
  StreamAllocation a = validate_streams(2, 3, 2, {1, 1}, {1, 1});
  ControlAction act = ControlAction::zeros(a);
  UserCapacities c;
  c.C_c = {3.0, 3.0};
  c.C_p = {3.0, 3.0};
  act.R_c[0] = 2.0;
  CHECK(goodput(a, act, c)[0] == 2.0);
  act.R_c[0] = 4.0;
  act.R_p[0] = 4.0;
  CHECK(goodput(a, act, c)[0] == 0.0);
  act.R_c[0] = 3.0;  // boundary inclusive
  act.R_p[0] = 0.0;
  CHECK(goodput(a, act, c)[0] == 3.0);
}

TEST_CASE("power accounting") {
  StreamAllocation a = validate_streams(2, 3, 2, {1, 1}, {1, 1});
  PrecoderSet p;
  p.alpha.assign(2, Eigen::MatrixXd::Zero(2, 1));
  p.alpha[0](0, 0) = 0.3;
  p.alpha[0](1, 0) = 0.7;
  p.alpha[1](0, 0) = 0.5;
  p.alpha[1](1, 0) = 0.5;

  ControlAction zero = ControlAction::zeros(a);
  PowerBreakdown pb = power_consumption(a, zero, p, 0.1);
  CHECK(pb.tx[0] == 0.0);
  CHECK(pb.total[0] == 0.0);  // idle BS burns no circuit power

  ControlAction act = ControlAction::zeros(a);
  act.P_p[0](0) = 2.0;
  pb = power_consumption(a, act, p, 0.1);
  CHECK(pb.total[0] == doctest::Approx(2.1));
  CHECK(pb.total[1] == 0.0);

  ControlAction common = ControlAction::zeros(a);
  common.P_c[0](0) = 1.0;
  pb = power_consumption(a, common, p, 0.0);
  CHECK(pb.tx[0] == doctest::Approx(0.3));
  CHECK(pb.tx[1] == doctest::Approx(0.7));
}

TEST_CASE("brute-force interference-free stream count equals the dof formula") {
  Rng rng(31415);
  for (int K : {2, 3}) {
    for (int M = 2; M <= 4; ++M) {
      for (int N = 2; N <= 3; ++N) {
        if (!(N <= M && K * N > M)) continue;
        auto chan = random_channel(K, M, N, rng);
        for (const auto& alloc : enumerate_feasible_allocations(K, M, N)) {
          CAPTURE(K);
          CAPTURE(M);
          CAPTURE(N);
          CHECK(count_interference_free_streams(alloc, chan) == dof(alloc).dof);
        }
      }
    }
  }
}

TEST_CASE("mutual information monotonicity") {
  StreamAllocation a = validate_streams(2, 3, 2, {1, 1}, {1, 1});
  Rng rng(555);
  for (int trial = 0; trial < 50; ++trial) {
    auto h = random_channel(2, 3, 2, rng);
    auto hhat = random_channel(2, 3, 2, rng);
    PrecoderSet p = design_precoders(a, hhat);
    design_decorrelators(a, h, p);
    CapacityModel cm = build_capacity_model(a, p, h, 1.0);
    ControlAction act = ControlAction::zeros(a);
    for (int k = 0; k < 2; ++k) {
      act.P_c[k].setConstant(1.0 + rng.uniform());
      act.P_p[k].setConstant(1.0 + rng.uniform());
    }
    UserCapacities base = cm.caps(act);
    ControlAction up = act;
    up.P_c[0](0) += 0.5;  // own power up: own capacity up, others down or equal
    UserCapacities bumped = cm.caps(up);
    CHECK(bumped.C_c[0] >= base.C_c[0] - 1e-12);
    CHECK(bumped.C_c[1] <= base.C_c[1] + 1e-12);
    CHECK(bumped.C_p[1] <= base.C_p[1] + 1e-12);
  }
}
