#include "pcomimo/queueing.hpp"

#include <algorithm>
#include <stdexcept>

namespace pcomimo {

void ArrivalModel::validate() const {
  if (lambda < 0.0 || mean_size <= 0.0 || tau <= 0.0)
    throw std::invalid_argument("arrival model: lambda >= 0, mean_size > 0, tau > 0 required");
}

double sample_arrivals(const ArrivalModel& model, Rng& rng) {
  long n = rng.poisson(model.lambda * model.tau);
  double bits = 0.0;
  for (long i = 0; i < n; ++i) bits += rng.exponential(model.mean_size);
  return bits;
}

QueueStep step_queue(double q, double goodput, double arrivals, double n_q) {
  if (q < 0.0 || goodput < 0.0 || arrivals < 0.0 || n_q < 0.0)
    throw std::invalid_argument("step_queue: negative input");
  QueueStep s;
  s.post_decision = std::max(q - goodput, 0.0);
  s.next = std::min(s.post_decision + arrivals, n_q);
  return s;
}

DelayCostKind delay_cost_kind_from_string(const std::string& s) {
  if (s == "linear_over_lambda") return DelayCostKind::LinearOverLambda;
  if (s == "linear") return DelayCostKind::Linear;
  if (s == "threshold") return DelayCostKind::Threshold;
  throw std::invalid_argument("delay_cost: unknown kind '" + s + "'");
}

double delay_cost(double q, DelayCostKind kind, const DelayCostParams& params) {
  if (q < 0.0) throw std::invalid_argument("delay_cost: q must be nonnegative");
  switch (kind) {
    case DelayCostKind::LinearOverLambda:
      return q / params.lambda;
    case DelayCostKind::Linear:
      return q;
    case DelayCostKind::Threshold:
      return q >= params.q0 ? 1.0 : 0.0;
  }
  throw std::invalid_argument("delay_cost: unknown kind");
}

}  // namespace pcomimo
