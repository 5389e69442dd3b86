#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcomimo/learner.hpp"
#include "pcomimo/queueing.hpp"

namespace pcomimo {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Everything one run needs; parsed from flat `a.b = value` text. Internal
/// rate/queue unit is the megabit so the default eta and grid spacing are
/// sane at the 10 MHz x 5 ms frame scale.
struct RunConfig {
  // sim
  std::string scheme = "proposed";  // proposed | coordinative | uco | fullcoop | channel_aware_pco
  long frames = 100000;
  std::uint64_t seed = 1;
  long log_interval = 100;
  long burn_in = -1;  // < 0: frames / 5
  std::string out_dir = ".";

  // phy
  int K = 2, M = 3, N = 2;
  std::vector<int> d_c{1, 1}, d_p{1, 1};
  double bandwidth_hz = 10e6;
  double tau_s = 5e-3;

  // channel
  int alphabet_size = 20;
  std::uint64_t alphabet_seed = 7;
  double sigma_e = 0.15;
  bool whole_matrix_states = false;

  // queue / traffic
  double n_q_mbit = 54.0;
  double lambda_pps = 6.0;
  double mean_packet_mbit = 5.0;
  std::string cost_kind = "linear";
  double cost_q0_mbit = 27.0;
  std::vector<double> beta{1.0, 1.0};

  // budgets
  double p0_db = 8.0;          // per-BS average power budget (transmit SNR, dB)
  double r0_factor = 1.1;      // R0 = factor * W*tau * log2(1 + P0)
  double r0_mbit = -1.0;       // direct override when >= 0 (Mbit/frame)
  double p_cct = 0.1;          // circuit power in the same normalized unit

  // learner
  double eta = 50.0;
  int grid_levels = 109;
  int csit_buckets = 64;
  double gamma_init = 0.01;
  double gamma_bound = 1e3;
  StepSchedule kv{1.0, 500.0, 0.6};
  StepSchedule kg{0.5, 500.0, 1.0};
  StepSchedule ka{0.5, 500.0, 1.0};
  bool gradient_exact = false;  // default: ACK/NAK feedback mode
  double step_cap_power = 1.0;
  double step_cap_rate = 0.05;

  double w_tau_mbit() const { return bandwidth_hz * tau_s / 1e6; }
  double p0_linear() const { return std::pow(10.0, p0_db / 10.0); }
  double r0() const;
  ArrivalModel arrivals() const;  // in Mbit
  DelayCostKind cost() const { return delay_cost_kind_from_string(cost_kind); }
  void validate() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

}  // namespace pcomimo
