#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "pcomimo/baselines.hpp"
#include "pcomimo/config.hpp"

namespace pcomimo {

struct UserAverages {
  long n = 0;
  double cost = 0.0, queue = 0.0, power = 0.0, backhaul = 0.0;  // running means

  void add(double c, double q, double p, double b) {
    ++n;
    cost += (c - cost) / n;
    queue += (q - queue) / n;
    power += (p - power) / n;
    backhaul += (b - backhaul) / n;
  }
};

struct MetricsRow {
  long t = 0;
  int user = 0;
  double queue_mbit = 0.0;       // instantaneous
  double cost_mean = 0.0;        // running means below
  double power_mean = 0.0;
  double backhaul_mean = 0.0;
  double gamma_p = 0.0, gamma_c = 0.0;
};

struct RunResult {
  std::vector<UserAverages> full, post_burn;  // per user
  double t_beta_full = 0.0, t_beta_post = 0.0;
  std::vector<double> gamma_p, gamma_c;  // final multipliers (proposed scheme)
  std::vector<MetricsRow> rows;
  long frames = 0, burn_in = 0;
  std::shared_ptr<PotentialTable> table;  // learner state, proposed scheme only

  /// Little's-law delay in seconds for the linear cost, averaged over users.
  double mean_delay_s(const RunConfig& cfg, bool post) const;
};

struct RunOptions {
  std::ostream* trajectory = nullptr;  // convergence CSV sink
};

RunResult run(const RunConfig& cfg, const RunOptions& opts = {});

void write_metrics_csv(const RunResult& res, const RunConfig& cfg, const std::string& path);
void write_snapshot(const RunResult& res, const std::string& path);

struct ComparisonRow {
  std::string scheme;
  int seeds = 0;
  double delay_s = 0.0, delay_se = 0.0;
  double cost = 0.0, cost_se = 0.0;
  double power = 0.0, power_se = 0.0;
  double backhaul = 0.0, backhaul_se = 0.0;
};

/// Fans (scheme x replica) runs across workers; per-run streams derive from
/// (seed, scheme, replica) and the merge is deterministic.
std::vector<ComparisonRow> compare(const RunConfig& base, const std::vector<std::string>& schemes,
                                   int seeds, int workers = 0);

std::string comparison_table(const std::vector<ComparisonRow>& rows);

}  // namespace pcomimo
