#include <doctest.h>

#include <cmath>

#include "pcomimo/queueing.hpp"

using namespace pcomimo;

TEST_CASE("arrival sampling moments match the compound poisson forms") {
  ArrivalModel m;
  m.lambda = 6.0;
  m.mean_size = 5.0;  // Mbit
  m.tau = 5e-3;
  m.validate();
  CHECK(m.mean_per_frame() == doctest::Approx(0.15));

  Rng rng(1234);
  const long n = 4000000;
  double mean = 0.0, m2 = 0.0;
  for (long i = 0; i < n; ++i) {
    double a = sample_arrivals(m, rng);
    double d = a - mean;
    mean += d / (i + 1);
    m2 += d * (a - mean);
  }
  double var = m2 / (n - 1);
  CHECK(std::abs(mean - m.mean_per_frame()) <= 0.01 * m.mean_per_frame());
  CHECK(std::abs(var - m.variance_per_frame()) <= 0.02 * m.variance_per_frame());

  ArrivalModel idle = m;
  idle.lambda = 0.0;
  for (int i = 0; i < 100; ++i) CHECK(sample_arrivals(idle, rng) == 0.0);
}

TEST_CASE("queue recursion") {
  QueueStep s = step_queue(10, 4, 2, 54);
  CHECK(s.post_decision == 6.0);
  CHECK(s.next == 8.0);

  s = step_queue(3, 5, 60, 54);
  CHECK(s.post_decision == 0.0);
  CHECK(s.next == 54.0);

  s = step_queue(0, 0, 0, 54);
  CHECK(s.next == 0.0);

  CHECK_THROWS_AS(step_queue(-1, 0, 0, 54), std::invalid_argument);
}

TEST_CASE("queue recursion monotonicity and bounds") {
  Rng rng(23);
  for (int i = 0; i < 2000; ++i) {
    double q = 54 * rng.uniform(), u = 10 * rng.uniform(), a = 10 * rng.uniform();
    QueueStep s = step_queue(q, u, a, 54);
    CHECK(s.next >= 0.0);
    CHECK(s.next <= 54.0);
    CHECK(std::min(s.post_decision + a, 54.0) == doctest::Approx(s.next));
    QueueStep s_more_q = step_queue(std::min(q + 1, 54.0), u, a, 54);
    CHECK(s_more_q.next >= s.next - 1e-12);
    QueueStep s_more_a = step_queue(q, u, a + 1, 54);
    CHECK(s_more_a.next >= s.next - 1e-12);
    QueueStep s_more_u = step_queue(q, u + 1, a, 54);
    CHECK(s_more_u.next <= s.next + 1e-12);
  }
}

TEST_CASE("delay cost kinds") {
  DelayCostParams p;
  CHECK(delay_cost(7, DelayCostKind::Linear, p) == 7.0);
  p.q0 = 5;
  CHECK(delay_cost(4, DelayCostKind::Threshold, p) == 0.0);
  CHECK(delay_cost(5, DelayCostKind::Threshold, p) == 1.0);
  p.lambda = 3;
  CHECK(delay_cost(6, DelayCostKind::LinearOverLambda, p) == 2.0);
  CHECK_THROWS_AS(delay_cost_kind_from_string("nope"), std::invalid_argument);
}
