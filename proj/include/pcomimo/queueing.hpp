#pragma once

#include <string>
#include <vector>

#include "pcomimo/rng.hpp"

namespace pcomimo {

/// Compound-Poisson bursty source: Poisson(lambda*tau) packets per frame,
/// i.i.d. exponential packet sizes.
struct ArrivalModel {
  double lambda = 0.0;     // packets per second
  double mean_size = 0.0;  // bits per packet
  double tau = 0.0;        // frame duration, seconds

  double mean_per_frame() const { return lambda * tau * mean_size; }
  double variance_per_frame() const { return lambda * tau * 2.0 * mean_size * mean_size; }
  void validate() const;
};

double sample_arrivals(const ArrivalModel& model, Rng& rng);

struct QueueStep {
  double post_decision = 0.0;  // (q - goodput)^+
  double next = 0.0;           // [post_decision + arrivals] clamped to N_Q
};

QueueStep step_queue(double q, double goodput, double arrivals, double n_q);

enum class DelayCostKind { LinearOverLambda, Linear, Threshold };

DelayCostKind delay_cost_kind_from_string(const std::string& s);

struct DelayCostParams {
  double lambda = 1.0;  // for LinearOverLambda
  double q0 = 0.0;      // for Threshold
};

double delay_cost(double q, DelayCostKind kind, const DelayCostParams& params);

}  // namespace pcomimo
