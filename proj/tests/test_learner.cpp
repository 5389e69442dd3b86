#include <doctest.h>

#include <cmath>
#include <functional>

#include "pcomimo/learner.hpp"

using namespace pcomimo;

namespace {

// perfect-CSIT evaluation bed shared by the gradient tests
struct Bed {
  StreamAllocation alloc = validate_streams(2, 3, 2, {1, 1}, {1, 1});
  std::vector<MatC> chan;
  PrecoderSet pre;
  CapacityModel cm;
  PotentialTable table{2, 109, 54.0};
  Multipliers gm = Multipliers::init(2, 0.0, 1e3);
  PerStageEval eval;

  explicit Bed(Rng& rng, double w_tau = 0.05) {
    chan = random_channel(2, 3, 2, rng);
    pre = design_precoders(alloc, chan);
    design_decorrelators(alloc, chan, pre);
    cm = build_capacity_model(alloc, pre, chan, w_tau);
    for (int k = 0; k < 2; ++k) {
      for (int i = 0; i < table.levels(); ++i) {
        double q = table.level(i);
        table.values(k)(i) = (0.4 + 0.1 * k) * std::pow(q, 1.35) + 0.3 * std::sin(0.7 * q + k);
      }
      gm.gamma_p[k] = 0.02 + 0.01 * k;
      gm.gamma_c[k] = 0.015 + 0.005 * k;
    }
    eval.alloc = &alloc;
    eval.q = {18.2613, 24.7147};
    eval.table = &table;
    eval.gamma = &gm;
    eval.pre = &pre;
    eval.p_cct = 0.0;
    eval.eta = 50.0;
    eval.outcomes = {{1.0, &cm}};
  }

  GradientContext context(int k, const ControlAction& a) const {
    GradientContext g;
    g.alloc = &alloc;
    g.k = k;
    g.q_k = eval.q[k];
    g.table = &table;
    g.gamma = &gm;
    g.p_cct = eval.p_cct;
    g.eta = eval.eta;
    g.w_tau = cm.w_tau;
    g.alpha_k = &pre.alpha[k];
    LinkQuality lq = cm.link(a);
    UserCapacities caps = cm.caps(a);
    g.C_c = caps.C_c[k];
    g.C_p = caps.C_p[k];
    g.sigma_c = lq.sigma_c[k];
    g.i_c = lq.i_c[k];
    g.sigma_p = lq.sigma_p[k];
    g.i_p = lq.i_p[k];
    PowerBreakdown pb = power_consumption(alloc, a, pre, 0.0);
    g.p_tx = pb.tx;
    return g;
  }
};

bool near_grid_node(double x, double spacing, double margin) {
  double r = std::fmod(std::abs(x), spacing);
  return r < margin || spacing - r < margin;
}

}  // namespace

TEST_CASE("logistic surrogate basics") {
  CHECK(logistic_f(3.0, 3.0, 17.0) == doctest::Approx(0.5));
  CHECK(std::abs(logistic_f(2.0, 3.0, 50.0) - 1.0) <= 1e-20);
  CHECK(logistic_f(3.0, 2.0, 50.0) <= 1e-20);
  // J is the x-derivative of f
  double eta = 25.0, z = 0.03, h = 1e-7;
  double fd = (logistic_f(z + h, 0.0, eta) - logistic_f(z - h, 0.0, eta)) / (2 * h);
  CHECK(logistic_j(z, eta) == doctest::Approx(fd).epsilon(1e-6));
  CHECK(logistic_j(0.0, eta) == doctest::Approx(-eta / 4));
  CHECK(logistic_j_approx(1.9 / eta, eta) == -eta / 5);
  CHECK(logistic_j_approx(2.1 / eta, eta) == 0.0);
}

TEST_CASE("feedback vector") {
  StreamAllocation alloc = validate_streams(2, 3, 2, {1, 1}, {1, 1});
  ControlAction a = ControlAction::zeros(alloc);
  UserCapacities caps;
  caps.C_c = {3.0, 1.0};
  caps.C_p = {3.0, 1.0};
  a.R_c[0] = 2.0;
  a.R_p[1] = 5.0;
  FeedbackVector fb = build_feedback(a, caps, 50.0);
  CHECK(fb.z[0].ack_c);
  CHECK(!fb.z[0].near_c);
  CHECK(!fb.z[1].ack_p);
  CHECK(!fb.z[1].near_p);
  a.R_c[0] = 3.0;
  fb = build_feedback(a, caps, 50.0);
  CHECK(fb.z[0].ack_c);
  CHECK(fb.z[0].near_c);
  CHECK_THROWS_AS(build_feedback(a, caps, 0.0), std::invalid_argument);
}

TEST_CASE("potential table interpolation and updates") {
  PotentialTable t(1, 5, 4.0);  // levels at 0,1,2,3,4
  t.values(0) << 0, 1, 4, 9, 16;
  CHECK(t.eval(0, 2.0) == 4.0);
  CHECK(t.eval(0, 2.5) == doctest::Approx(6.5));
  CHECK(t.eval(0, -3.0) == 0.0);   // clamped
  CHECK(t.eval(0, 99.0) == 16.0);  // clamped
  CHECK(t.slope(0, 2.25) == doctest::Approx(5.0));
  CHECK(t.slope(0, -1.0) == 0.0);
  CHECK(t.slope(0, 4.5) == 0.0);

  PotentialTable u(1, 5, 4.0);
  u.td_update(0, 2.0, 2.5);  // on-grid: single cell
  CHECK(u.values(0)(2) == 2.5);
  CHECK(u.values(0).sum() == 2.5);
  u.values(0).setZero();
  u.td_update(0, 2.25, 1.0);  // split by interpolation weights
  CHECK(u.values(0)(2) == doctest::Approx(0.75));
  CHECK(u.values(0)(3) == doctest::Approx(0.25));
}

TEST_CASE("step schedules satisfy the two-timescale conditions") {
  StepSchedule kv{1.0, 500.0, 0.6};
  StepSchedule kg{0.5, 500.0, 1.0};
  CHECK(two_timescale_ok(kv, kg));
  CHECK(!two_timescale_ok(kg, kv));                         // ratio must vanish
  CHECK(!two_timescale_ok(StepSchedule{1, 500, 0.4}, kg));  // not square summable
  CHECK(!two_timescale_ok(StepSchedule{1, 500, 1.2}, kg));  // sum finite
  CHECK(kv(0) == doctest::Approx(1.0));
  CHECK(kv(500) == doctest::Approx(1.0 / std::pow(2.0, 0.6)));
}

TEST_CASE("per-stage objective closed forms") {
  Rng rng(404);
  Bed bed(rng);
  ControlAction zero = ControlAction::zeros(bed.alloc);
  PotentialTable flat(2, 109, 54.0);
  PerStageEval eval = bed.eval;
  eval.table = &flat;
  eval.p_cct = 0.5;
  CHECK(eval.objective(zero) == 0.0);  // all terms vanish, idle circuit off

  // rates below capacity: h = sum_k gamma_p P_tx + gamma_c R_c + V(q - R_c - R_p)
  ControlAction a = ControlAction::zeros(bed.alloc);
  for (int k = 0; k < 2; ++k) {
    a.P_c[k](0) = 2.0;
    a.P_p[k](0) = 1.0;
    a.R_c[k] = 0.01;
    a.R_p[k] = 0.01;
  }
  eval.table = &bed.table;
  eval.p_cct = 0.0;
  PowerBreakdown pb = power_consumption(bed.alloc, a, bed.pre, 0.0);
  double expected = 0.0;
  for (int k = 0; k < 2; ++k)
    expected += bed.gm.gamma_p[k] * pb.tx[k] + bed.gm.gamma_c[k] * a.R_c[k] +
                bed.table.eval(k, bed.eval.q[k] - a.R_c[k] - a.R_p[k]);
  CHECK(eval.objective(a) == doctest::Approx(expected).epsilon(1e-12));

  // posterior enumeration: outcomes weighted exactly
  Rng rng2(405);
  Bed other(rng2);
  PerStageEval two = bed.eval;
  two.outcomes = {{0.3, &bed.cm}, {0.7, &other.cm}};
  double manual = 0.0;
  for (const auto& [prob, model] : two.outcomes) {
    UserCapacities caps = model->caps(a);
    for (int k = 0; k < 2; ++k) {
      double q = two.q[k];
      bool okc = a.R_c[k] <= caps.C_c[k], okp = a.R_p[k] <= caps.C_p[k];
      double arg = q - (okc ? a.R_c[k] : 0.0) - (okp ? a.R_p[k] : 0.0);
      manual += prob * bed.table.eval(k, arg);
    }
  }
  for (int k = 0; k < 2; ++k)
    manual += bed.gm.gamma_p[k] * pb.tx[k] + bed.gm.gamma_c[k] * a.R_c[k];
  CHECK(two.objective(a) == doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("smoothed objective approaches the indicator objective") {
  Rng rng(777);
  Bed bed(rng, 1.0);
  PerStageEval eval = bed.eval;
  ControlAction a = ControlAction::zeros(bed.alloc);
  for (int k = 0; k < 2; ++k) {
    a.P_c[k](0) = 2.0;
    a.P_p[k](0) = 1.5;
  }
  UserCapacities caps = bed.cm.caps(a);
  for (int k = 0; k < 2; ++k) {
    a.R_c[k] = std::max(caps.C_c[k] - 0.3, 0.0);  // safely deliverable
    a.R_p[k] = caps.C_p[k] + 0.3;                 // safely failing
    CHECK(std::abs(a.R_c[k] - caps.C_c[k]) >= 0.05);
    CHECK(std::abs(a.R_p[k] - caps.C_p[k]) >= 0.05);
  }
  eval.eta = 1e3;
  double h999 = eval.smoothed(a);
  double h = eval.objective(a);
  CHECK(std::abs(h999 - h) <= 0.01 * (1.0 + std::abs(h)));
}

TEST_CASE("stochastic partial gradients match finite differences") {
  Rng rng(9001);
  int states = 0;
  double worst = 0.0;
  while (states < 100) {
    Bed bed(rng);
    ControlAction a = ControlAction::zeros(bed.alloc);
    for (int k = 0; k < 2; ++k) {
      a.P_c[k](0) = 0.5 + 3.0 * rng.uniform();
      a.P_p[k](0) = 0.5 + 3.0 * rng.uniform();
      a.R_c[k] = 0.02 + 0.3 * rng.uniform();
      a.R_p[k] = 0.02 + 0.3 * rng.uniform();
    }
    bed.eval.q = {5.0 + 40.0 * rng.uniform(), 5.0 + 40.0 * rng.uniform()};
    // keep every interpolation argument away from grid nodes so the central
    // difference stays inside one linear segment
    bool clean = true;
    for (int k = 0; k < 2; ++k)
      for (double arg : {bed.eval.q[k], bed.eval.q[k] - a.R_c[k], bed.eval.q[k] - a.R_p[k],
                         bed.eval.q[k] - a.R_c[k] - a.R_p[k]})
        if (near_grid_node(arg, bed.table.spacing(), 1e-4)) clean = false;
    if (!clean) continue;
    ++states;

    const double step = 1e-5;
    for (int k = 0; k < 2; ++k) {
      GradientContext g = bed.context(k, a);
      auto fd = [&](const std::function<void(ControlAction&, double)>& set) {
        ControlAction hi = a, lo = a;
        set(hi, +step);
        set(lo, -step);
        return (bed.eval.smoothed(hi) - bed.eval.smoothed(lo)) / (2 * step);
      };
      struct Case {
        ActionComponent comp;
        std::function<void(ControlAction&, double)> bump;
      };
      std::vector<Case> cases = {
          {ActionComponent::CommonPower, [k](ControlAction& x, double d) { x.P_c[k](0) += d; }},
          {ActionComponent::PrivatePower, [k](ControlAction& x, double d) { x.P_p[k](0) += d; }},
          {ActionComponent::CommonRate, [k](ControlAction& x, double d) { x.R_c[k] += d; }},
          {ActionComponent::PrivateRate, [k](ControlAction& x, double d) { x.R_p[k] += d; }}};
      for (const auto& c : cases) {
        double y = stochastic_partial_gradient(g, a, c.comp, 0);
        double ref = fd(c.bump);
        double err = std::abs(y - ref) / std::max(std::abs(ref), 1e-6);
        worst = std::max(worst, err);
        CHECK(err <= 1e-4);
      }
    }
  }
  MESSAGE("worst relative gradient error: ", worst);
}

TEST_CASE("algorithm 1 potential and multiplier updates") {
  PotentialTable t(1, 6, 5.0);
  Multipliers gm = Multipliers::init(1, 0.0, 10.0);
  std::vector<double> p_budget{0.0}, r_budget{0.0};

  // on-grid update with g = 5 and kappa_v = 0.5 writes 2.5 into one cell
  Algorithm1Observation obs;
  obs.q_tilde_prev = 3.0;
  obs.q_pre = 3.0;
  obs.goodput = 0.0;
  obs.cost_f = 5.0;
  obs.common_share = {0.0};
  StepSchedule kv{0.5, 1e18, 0.6}, kg{0.0, 500, 1.0};
  algorithm1_update(t, gm, 0, obs, 1.0, p_budget, r_budget, 0.0, 1, kv, kg);
  CHECK(t.values(0)(3) == doctest::Approx(2.5));
  CHECK(t.values(0).sum() == doctest::Approx(2.5));

  // multiplier ascent with projection
  Multipliers g2 = Multipliers::init(1, 1.0, 10.0);
  g2.gamma_c[0] = 0.05;
  Algorithm1Observation obs2;
  obs2.q_tilde_prev = 0.0;
  obs2.q_pre = 0.0;
  obs2.cost_f = 0.0;
  obs2.own_tx_power = 2.0;  // power - budget = 2
  obs2.backhaul = 0.0;
  obs2.common_share = {0.0};
  std::vector<double> pb{0.0}, rb{1.0};  // backhaul - budget = -1
  PotentialTable t2(1, 6, 5.0);
  StepSchedule kg2{0.1, 1e18, 1.0};
  algorithm1_update(t2, g2, 0, obs2, 1.0, pb, rb, 0.0, 1, kv, kg2);
  CHECK(g2.gamma_p[0] == doctest::Approx(1.2));
  CHECK(g2.gamma_c[0] == 0.0);  // projected at the lower edge
}

TEST_CASE("algorithm 2 projection and stationarity") {
  StreamAllocation alloc = validate_streams(2, 3, 2, {1, 1}, {1, 1});
  StepCaps caps;
  Eigen::VectorXd entry(4);
  entry << 0, 0, 2.0, 0;  // layout: P_c, P_p, R_c, R_p
  Eigen::VectorXd y(4);
  y << 0, 0, 30.0, 0;
  algorithm2_update(entry, y, 0.1, alloc, 0, caps);
  CHECK(entry(2) == 0.0);  // clipped at zero

  entry << 1, 1, 1, 1;
  y.setZero();
  algorithm2_update(entry, y, 0.5, alloc, 0, caps);
  CHECK(entry == Eigen::VectorXd::Ones(4));  // stationary point

  StepCaps tight{0.1, 0.01};
  entry << 1, 1, 1, 1;
  y << 5, -5, 5, -5;
  algorithm2_update(entry, y, 1.0, alloc, 0, tight);
  CHECK(entry(0) == doctest::Approx(0.9));  // power step capped
  CHECK(entry(1) == doctest::Approx(1.1));
  CHECK(entry(2) == doctest::Approx(0.99));  // rate step capped
  CHECK(entry(3) == doctest::Approx(1.01));
}

TEST_CASE("approximate gradient uses only the feedback bits") {
  Rng rng(31337);
  Bed bed(rng);
  ControlAction a = ControlAction::zeros(bed.alloc);
  a.P_c[0](0) = 2.0;
  a.P_p[0](0) = 2.0;
  a.R_c[0] = 1.0;  // far above capacity: ack = 0, near = 0
  a.R_p[0] = 0.0;
  GradientContext g = bed.context(0, a);
  g.approx = true;
  UserCapacities caps = bed.cm.caps(a);
  FeedbackVector fb = build_feedback(a, caps, g.eta);
  g.feedback = fb.z[0];
  CHECK(!g.feedback.near_c);
  double y = stochastic_partial_gradient(g, a, ActionComponent::CommonRate, 0);
  CHECK(y == doctest::Approx(bed.gm.gamma_c[0]));  // J-term dead outside the band
}

TEST_CASE("inner-loop solver against a golden-section oracle") {
  Rng rng(2718);
  Bed bed(rng);
  PerStageEval eval = bed.eval;
  eval.eta = 30.0;
  Multipliers gm = bed.gm;
  gm.gamma_p = {0.05, 0.05};
  gm.gamma_c = {0.0, 0.0};
  eval.gamma = &gm;

  ControlAction base = ControlAction::zeros(bed.alloc);
  base.P_c[0](0) = 1.0;
  base.P_c[1](0) = 1.0;
  base.P_p[1](0) = 1.0;
  base.R_c[0] = 0.0;
  base.R_p[0] = 0.12;
  base.R_p[1] = 0.0;

  auto slice = [&](double p) {
    ControlAction a = base;
    a.P_p[0](0) = p;
    return eval.smoothed(a);
  };
  // golden-section on [0, 60]
  double lo = 0.0, hi = 60.0;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = slice(x1), f2 = slice(x2);
  for (int it = 0; it < 200; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = slice(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = slice(x2);
    }
  }
  double p_gold = 0.5 * (lo + hi);

  std::vector<Eigen::VectorXi> frozen(2);
  frozen[0] = Eigen::VectorXi::Ones(4);
  frozen[0](1) = 0;  // free: user-0 private power
  frozen[1] = Eigen::VectorXi::Ones(4);
  InnerLoopResult res = solve_per_stage_inner(eval, base, 2e-3, 2000000, 1e-8, &frozen);
  CHECK(res.converged);
  CHECK(std::abs(res.action.P_p[0](0) - p_gold) <= 1e-4);

  // huge multipliers drive every power to zero
  Multipliers heavy = Multipliers::init(2, 0.0, 1e3);
  heavy.gamma_p = {1e3, 1e3};
  heavy.gamma_c = {1e3, 1e3};
  PerStageEval pricey = bed.eval;
  pricey.gamma = &heavy;
  ControlAction start = base;
  start.P_p[0](0) = 3.0;
  InnerLoopResult zeroed = solve_per_stage_inner(pricey, start, 1e-3, 200000, 1e-6);
  CHECK(zeroed.action.P_p[0](0) == 0.0);
  CHECK(zeroed.action.P_c[0](0) == 0.0);

  // flat potential: no queue benefit, rates settle at zero
  PotentialTable flat(2, 109, 54.0);
  PerStageEval nogain = bed.eval;
  nogain.table = &flat;
  InnerLoopResult rates =
      solve_per_stage_inner(nogain, ControlAction::zeros(bed.alloc), 1e-3, 100000, 1e-6);
  CHECK(rates.action.R_c[0] == 0.0);
  CHECK(rates.action.R_c[1] == 0.0);
  CHECK(rates.action.R_p[0] == 0.0);
}
