#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pcomimo/phy.hpp"

namespace pcomimo {

enum class BaselineKind { Coordinative, Uco, FullCoop, ChannelAwarePco };

BaselineKind baseline_kind_from_string(const std::string& s);
std::string to_string(BaselineKind kind);

/// Single-constraint waterfilling: maximize sum log2(1 + g_j P_j) subject to
/// sum P_j <= budget. Returns the per-stream powers.
Eigen::VectorXd waterfill(const Eigen::VectorXd& gains, double budget, double tol = 1e-12);

/// Multi-constraint variant: columns of `charge` give each stream's power draw
/// per BS; per-BS budgets are met with equality where binding (dual
/// Gauss-Seidel on the per-BS water levels).
Eigen::VectorXd waterfill_shared(const Eigen::VectorXd& gains, const Eigen::MatrixXd& charge,
                                 const Eigen::VectorXd& budgets, int sweeps = 60,
                                 double tol = 1e-12);

struct BaselineDecision {
  const StreamAllocation* alloc = nullptr;
  ControlAction action;
  PrecoderSet precoders;  // BS-side design from the CSIT (decorrelators unset)
};

/// Throughput-maximizing CSIT-only controller under the run's budgets: treats
/// the CSIT as perfect, waterfills the per-frame power budget and schedules
/// rates at the estimated mutual information; common rates are additionally
/// limited by a running backhaul credit so the long-run average meets R0.
class BaselineController {
 public:
  BaselineController(BaselineKind kind, int K, int M, int N,
                     const StreamAllocation& pco_template, std::vector<double> p_budget,
                     std::vector<double> r_budget, double w_tau);

  BaselineDecision decide(const GlobalChannelState& chan);
  BaselineKind kind() const { return kind_; }
  const StreamAllocation& allocation() const;

 private:
  BaselineKind kind_;
  int K_, M_, N_;
  std::vector<double> p_budget_, r_budget_, credit_;
  double w_tau_;
  StreamAllocation alloc_;           // fixed for all kinds except Uco before lock-in
  std::optional<StreamAllocation> uco_alt_;  // the mirrored Uco direction
  bool locked_ = false;
};

/// Allocation templates for the comparison schemes at a given (K, M, N);
/// Uco takes the direction (which user receives the common stream).
StreamAllocation coordinative_allocation(int K, int M, int N);
StreamAllocation fullcoop_allocation(int K, int M, int N);
StreamAllocation uco_allocation(int K, int M, int N, int common_user);

}  // namespace pcomimo
