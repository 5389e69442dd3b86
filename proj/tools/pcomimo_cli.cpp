#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "pcomimo/sim.hpp"
#include "pcomimo/tiny_instances.hpp"

namespace fs = std::filesystem;
using namespace pcomimo;

namespace {

int check_dof() {
  Rng rng(20240311);
  for (int K : {2, 3}) {
    for (int M = 2; M <= 4; ++M) {
      for (int N = 2; N <= 3; ++N) {
        if (!(N <= M && K * N > M)) continue;
        auto channel = random_channel(K, M, N, rng);
        for (const auto& alloc : enumerate_feasible_allocations(K, M, N)) {
          int counted = count_interference_free_streams(alloc, channel);
          int formula = dof(alloc).dof;
          if (counted != formula) {
            std::cerr << "dof mismatch at K=" << K << " M=" << M << " N=" << N
                      << ": counted " << counted << ", formula " << formula << "\n";
            return 1;
          }
        }
      }
    }
  }
  std::cout << "dof: brute-force stream count matches the formula on all feasible allocations\n";
  return 0;
}

int check_lemma2() {
  TinyInstance inst = make_lemma2_instance();
  TinyMultipliers gamma{{0.3, 0.25}, {0.15, 0.1}};
  RviResult joint = relative_value_iteration(inst, gamma);
  if (!joint.converged) {
    std::cerr << "lemma2: joint value iteration did not converge\n";
    return 1;
  }
  PerFlowResult f0 = per_flow_fixed_point(inst, 0, gamma);
  PerFlowResult f1 = per_flow_fixed_point(inst, 1, gamma);
  const int L = inst.levels();
  double sup = 0.0;
  for (int s = 0; s < L * L; ++s) {
    int q0 = s % L, q1 = s / L;
    double sum = (f0.v(q0) - f0.v(0)) + (f1.v(q1) - f1.v(0));
    sup = std::max(sup, std::abs(joint.v(s) - sum));
  }
  std::cout << "lemma2: sup |V - sum V_k| = " << sup << "\n";
  return sup <= 1e-6 ? 0 : 1;
}

int check_duality() {
  TinyInstance inst = make_duality_instance();
  DualResult dual = dual_solve(inst);
  EnumerationResult enumd = enumerate_deterministic_policies(inst);
  if (!enumd.feasible_found) {
    std::cerr << "duality: no feasible deterministic policy found\n";
    return 1;
  }
  double gap = std::abs(dual.theta - enumd.best_cost);
  RviResult rvi = relative_value_iteration(inst, dual.gamma);
  PolicyStats st = greedy_policy_stats(inst, dual.gamma, rvi.v);
  double slack = 0.0;
  for (int k = 0; k < inst.n_users; ++k) {
    slack = std::max(slack, std::abs(dual.gamma.gamma_p[k] * (st.power[k] - inst.p_budget[k])));
    slack = std::max(slack, std::abs(dual.gamma.gamma_c[k] * (st.backhaul[k] - inst.r_budget[k])));
  }
  std::cout << "duality: |theta - enumerated optimum| = " << gap
            << ", complementary slackness = " << slack << "\n";
  return (gap <= 1e-4 && slack <= 1e-6) ? 0 : 1;
}

int check_fixedpoint() {
  TinyInstance inst = make_fixedpoint_instance();
  TinyMultipliers gamma{{0.4, 0.3}, {0.2, 0.2}};
  PerFlowResult f = per_flow_fixed_point(inst, 0, gamma);
  if (!f.converged) {
    std::cerr << "fixedpoint: iteration did not converge, residual " << f.residual << "\n";
    return 1;
  }
  Eigen::VectorXd tv = per_flow_operator(inst, 0, gamma, f.v);
  double res = (f.v.array() + f.v(0) - tv.array()).abs().maxCoeff();
  std::cout << "fixedpoint: residual at the returned table = " << res << "\n";
  return res <= 1e-9 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delay-aware partial cooperative MIMO simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", schemes_csv, oracle_case = "all";
  long frames_override = -1, seed_override = -1;
  int seeds = 20;

  auto add_common = [&](CLI::App* cmd, bool need_config) {
    auto* opt = cmd->add_option("--config", config_path, "run configuration file");
    if (need_config) opt->required();
    cmd->add_option("--seed", seed_override, "override sim.seed");
    cmd->add_option("--frames", frames_override, "override sim.frames");
    cmd->add_option("--out", out_dir, "output directory");
  };

  CLI::App* cmd_run = app.add_subcommand("run", "simulate one scheme and write metrics");
  add_common(cmd_run, true);
  CLI::App* cmd_compare = app.add_subcommand("compare", "multi-seed scheme comparison");
  add_common(cmd_compare, true);
  cmd_compare->add_option("--schemes", schemes_csv, "comma list of schemes")->required();
  cmd_compare->add_option("--seeds", seeds, "replicas per scheme");
  CLI::App* cmd_oracle = app.add_subcommand("oracle-check", "desk-scale ground-truth checks");
  cmd_oracle->add_option("--case", oracle_case, "lemma2|duality|fixedpoint|dof|all");
  CLI::App* cmd_conv = app.add_subcommand("convergence", "emit V/gamma trajectory CSV");
  add_common(cmd_conv, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_oracle->parsed()) {
      int rc = 0;
      if (oracle_case == "dof" || oracle_case == "all") rc |= check_dof();
      if (oracle_case == "lemma2" || oracle_case == "all") rc |= check_lemma2();
      if (oracle_case == "duality" || oracle_case == "all") rc |= check_duality();
      if (oracle_case == "fixedpoint" || oracle_case == "all") rc |= check_fixedpoint();
      if (oracle_case != "dof" && oracle_case != "lemma2" && oracle_case != "duality" &&
          oracle_case != "fixedpoint" && oracle_case != "all") {
        std::cerr << "unknown oracle case '" << oracle_case << "'\n";
        return 2;
      }
      return rc ? 3 : 0;
    }

    RunConfig cfg = load_config_file(config_path);
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    if (frames_override >= 0) cfg.frames = frames_override;
    fs::create_directories(out_dir);

    if (cmd_run->parsed()) {
      RunResult res = run(cfg);
      write_metrics_csv(res, cfg, (fs::path(out_dir) / "metrics.csv").string());
      write_snapshot(res, (fs::path(out_dir) / "snapshot.txt").string());
      std::ofstream cfg_out(fs::path(out_dir) / "config.resolved");
      cfg_out << serialize_config(cfg);
      std::cout << "scheme " << cfg.scheme << ", frames " << cfg.frames << "\n";
      for (std::size_t k = 0; k < res.full.size(); ++k)
        std::cout << "user " << k << ": mean cost " << res.full[k].cost << ", mean power "
                  << res.full[k].power << ", mean backhaul " << res.full[k].backhaul
                  << " Mbit/frame\n";
      return 0;
    }
    if (cmd_compare->parsed()) {
      std::vector<std::string> schemes;
      std::string cur;
      for (char c : schemes_csv) {
        if (c == ',') {
          schemes.push_back(cur);
          cur.clear();
        } else
          cur += c;
      }
      schemes.push_back(cur);
      auto rows = compare(cfg, schemes, seeds);
      std::string tbl = comparison_table(rows);
      std::cout << tbl;
      std::ofstream out(fs::path(out_dir) / "comparison.csv");
      out << tbl;
      return 0;
    }
    if (cmd_conv->parsed()) {
      std::ofstream traj(fs::path(out_dir) / "trajectory.csv");
      if (!traj) throw std::runtime_error("cannot write trajectory CSV");
      RunOptions opts;
      opts.trajectory = &traj;
      run(cfg, opts);
      std::cout << "trajectory written to " << (fs::path(out_dir) / "trajectory.csv").string()
                << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
