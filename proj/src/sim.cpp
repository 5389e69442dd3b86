#include "pcomimo/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace pcomimo {

namespace {

constexpr std::uint64_t kChannelTag = 0x6368616eULL;
constexpr std::uint64_t kArrivalTag = 0x61727256ULL;

std::uint64_t scheme_tag(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct FrameEngine {
  const RunConfig& cfg;
  CsiAlphabet alphabet;
  CsitErrorKernel kernel;
  MatrixStateSpace matrix_space;

  explicit FrameEngine(const RunConfig& c) : cfg(c) {
    if (cfg.whole_matrix_states) {
      matrix_space = build_matrix_states(cfg.alphabet_size, cfg.M, cfg.N, cfg.alphabet_seed,
                                         cfg.sigma_e);
    } else {
      alphabet = build_alphabet(cfg.alphabet_size, cfg.alphabet_seed);
      kernel = build_error_kernel(alphabet, cfg.sigma_e);
    }
  }

  GlobalChannelState frame(long t) const {
    Rng rng(derive_seed(cfg.seed, kChannelTag, static_cast<std::uint64_t>(t)));
    GlobalChannelState st = cfg.whole_matrix_states
                                ? sample_frame(matrix_space, cfg.K, rng)
                                : sample_frame(alphabet, kernel, cfg.K, cfg.M, cfg.N, rng);
    st.frame_index = t;
    return st;
  }
};

}  // namespace

double RunResult::mean_delay_s(const RunConfig& cfg, bool post) const {
  const auto& avg = post ? post_burn : full;
  double bits_per_s = cfg.lambda_pps * cfg.mean_packet_mbit;
  double d = 0.0;
  for (const auto& u : avg) d += bits_per_s > 0.0 ? u.queue / bits_per_s : 0.0;
  return d / avg.size();
}

RunResult run(const RunConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const int K = cfg.K;
  const double w_tau = cfg.w_tau_mbit();
  const double n_q = cfg.n_q_mbit;
  const double p0 = cfg.p0_linear();
  const double r0 = cfg.r0();
  const std::vector<double> p_budget(K, p0), r_budget(K, r0);
  const DelayCostKind cost_kind = cfg.cost();
  DelayCostParams cost_params;
  cost_params.lambda = cfg.lambda_pps * cfg.mean_packet_mbit;  // Mbit/s for q/lambda
  cost_params.q0 = cfg.cost_q0_mbit;
  const ArrivalModel arrivals = cfg.arrivals();
  arrivals.validate();

  const bool proposed = cfg.scheme == "proposed";
  StreamAllocation alloc = validate_streams(cfg.K, cfg.M, cfg.N, cfg.d_c, cfg.d_p);
  std::unique_ptr<BaselineController> baseline;
  if (!proposed)
    baseline = std::make_unique<BaselineController>(baseline_kind_from_string(cfg.scheme), cfg.K,
                                                    cfg.M, cfg.N, alloc, p_budget, r_budget, w_tau);

  FrameEngine engine(cfg);

  RunResult res;
  res.frames = cfg.frames;
  res.burn_in = cfg.burn_in >= 0 ? cfg.burn_in : cfg.frames / 5;
  res.full.assign(K, {});
  res.post_burn.assign(K, {});

  auto table = std::make_shared<PotentialTable>(K, cfg.grid_levels, n_q);
  Multipliers gm = Multipliers::init(K, cfg.gamma_init, cfg.gamma_bound);
  std::vector<OnlineActionTable> actions;
  if (proposed)
    for (int k = 0; k < K; ++k)
      actions.emplace_back(alloc, k, cfg.grid_levels, cfg.csit_buckets, n_q);
  StepCaps caps_cfg{cfg.step_cap_power, cfg.step_cap_rate};

  std::vector<double> q(K, 0.0), q_tilde_prev(K, 0.0);
  double t_beta_full = 0.0, t_beta_post = 0.0;
  long n_full = 0, n_post = 0;

  if (opts.trajectory) {
    (*opts.trajectory) << "t";
    for (int k = 0; k < K; ++k)
      (*opts.trajectory) << ",v" << k << "_lo,v" << k << "_mid,v" << k << "_hi,gamma_p" << k
                         << ",gamma_c" << k << ",p_c" << k << ",p_p" << k << ",r_c" << k << ",r_p"
                         << k;
    (*opts.trajectory) << "\n";
  }

  for (long t = 1; t <= cfg.frames; ++t) {
    GlobalChannelState chan = engine.frame(t);

    // act on the observed state (queues + CSIT) only
    ControlAction action = ControlAction::zeros(alloc);
    const StreamAllocation* frame_alloc = &alloc;
    PrecoderSet pre;
    if (proposed) {
      std::uint64_t hash = chan.csit_hash();
      for (int k = 0; k < K; ++k) {
        ControlAction mine = actions[k].unpack(actions[k].entry(q[k], hash));
        action.P_c[k] = mine.P_c[k];
        action.P_p[k] = mine.P_p[k];
        action.R_c[k] = mine.R_c[k];
        action.R_p[k] = mine.R_p[k];
      }
      pre = design_precoders(alloc, chan.csit);
    } else {
      BaselineDecision dec = baseline->decide(chan);
      frame_alloc = dec.alloc;
      action = dec.action;
      pre = std::move(dec.precoders);
    }

    // realize the channel: capacities, goodput, consumption
    design_decorrelators(*frame_alloc, chan.true_csi, pre);
    CapacityModel cm = build_capacity_model(*frame_alloc, pre, chan.true_csi, w_tau);
    LinkQuality lq = cm.link(action);
    UserCapacities caps = mutual_information(*frame_alloc, lq, action, w_tau);
    std::vector<double> u = goodput(*frame_alloc, action, caps);
    PowerBreakdown pb = power_consumption(*frame_alloc, action, pre, cfg.p_cct);
    FeedbackVector fb = build_feedback(action, caps, cfg.eta);

    // arrivals land after service
    Rng arr_rng(derive_seed(cfg.seed, kArrivalTag, static_cast<std::uint64_t>(t)));
    std::vector<double> q_tilde(K), q_next(K), cost(K);
    double beta_cost = 0.0;
    for (int k = 0; k < K; ++k) {
      double a_k = sample_arrivals(arrivals, arr_rng);
      QueueStep st = step_queue(q[k], u[k], a_k, n_q);
      q_tilde[k] = st.post_decision;
      q_next[k] = st.next;
      cost[k] = delay_cost(q[k], cost_kind, cost_params);
      beta_cost += cfg.beta[k] * cost[k];
    }

    // metrics sampled at the pre-decision state
    for (int k = 0; k < K; ++k) {
      res.full[k].add(cost[k], q[k], pb.total[k], action.R_c[k]);
      if (t > res.burn_in) res.post_burn[k].add(cost[k], q[k], pb.total[k], action.R_c[k]);
    }
    ++n_full;
    t_beta_full += (beta_cost - t_beta_full) / n_full;
    if (t > res.burn_in) {
      ++n_post;
      t_beta_post += (beta_cost - t_beta_post) / n_post;
    }

    if (proposed) {
      std::uint64_t hash = chan.csit_hash();
      for (int k = 0; k < K; ++k) {
        Algorithm1Observation obs;
        obs.q_tilde_prev = q_tilde_prev[k];
        obs.q_pre = q[k];
        obs.goodput = u[k];
        obs.cost_f = cost[k];
        obs.own_private_power = action.P_p[k].sum();
        obs.own_tx_power = pb.tx[k];
        obs.backhaul = action.R_c[k];
        obs.common_share.assign(K, 0.0);
        for (int n = 0; n < K; ++n)
          for (int i = 0; i < alloc.d_c[k]; ++i)
            obs.common_share[n] += action.P_c[k](i) * pre.alpha[k](n, i);
        algorithm1_update(*table, gm, k, obs, cfg.beta[k], p_budget, r_budget, cfg.p_cct, t,
                          cfg.kv, cfg.kg);

        GradientContext g;
        g.alloc = &alloc;
        g.k = k;
        g.q_k = q[k];
        g.table = table.get();
        g.gamma = &gm;
        g.p_cct = cfg.p_cct;
        g.eta = cfg.eta;
        g.w_tau = w_tau;
        g.alpha_k = &pre.alpha[k];
        g.C_c = caps.C_c[k];
        g.C_p = caps.C_p[k];
        g.sigma_c = lq.sigma_c[k];
        g.i_c = lq.i_c[k];
        g.sigma_p = lq.sigma_p[k];
        g.i_p = lq.i_p[k];
        g.p_tx = pb.tx;
        g.approx = !cfg.gradient_exact;
        g.feedback = fb.z[k];
        Eigen::VectorXd y = gradient_vector(g, action);
        algorithm2_update(actions[k].entry(q[k], hash), y, cfg.ka(t), alloc, k, caps_cfg);
      }
    }

    if (t % cfg.log_interval == 0) {
      for (int k = 0; k < K; ++k) {
        MetricsRow row;
        row.t = t;
        row.user = k;
        row.queue_mbit = q[k];
        row.cost_mean = res.full[k].cost;
        row.power_mean = res.full[k].power;
        row.backhaul_mean = res.full[k].backhaul;
        row.gamma_p = gm.gamma_p[k];
        row.gamma_c = gm.gamma_c[k];
        res.rows.push_back(row);
      }
      if (opts.trajectory) {
        (*opts.trajectory) << t;
        for (int k = 0; k < K; ++k) {
          (*opts.trajectory) << "," << table->eval(k, 0.25 * n_q) << ","
                             << table->eval(k, 0.5 * n_q) << "," << table->eval(k, 0.75 * n_q)
                             << "," << gm.gamma_p[k] << "," << gm.gamma_c[k] << ","
                             << (alloc.d_c[k] ? action.P_c[k](0) : 0.0) << ","
                             << (alloc.d_p[k] ? action.P_p[k](0) : 0.0) << "," << action.R_c[k]
                             << "," << action.R_p[k];
        }
        (*opts.trajectory) << "\n";
      }
    }

    q = q_next;
    q_tilde_prev = q_tilde;
  }

  res.t_beta_full = t_beta_full;
  res.t_beta_post = t_beta_post;
  res.gamma_p = gm.gamma_p;
  res.gamma_c = gm.gamma_c;
  if (proposed) res.table = table;
  return res;
}

void write_metrics_csv(const RunResult& res, const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics CSV: " + path);
  out.precision(12);
  out << "t,user,queue_bits,cost,power_w,backhaul_bpf,gamma_p,gamma_c\n";
  for (const auto& r : res.rows)
    out << r.t << "," << r.user << "," << r.queue_mbit * 1e6 << "," << r.cost_mean << ","
        << r.power_mean << "," << r.backhaul_mean * 1e6 << "," << r.gamma_p << "," << r.gamma_c
        << "\n";
  for (std::size_t k = 0; k < res.full.size(); ++k)
    out << "# footer full_horizon user=" << k << " mean_cost=" << res.full[k].cost
        << " mean_queue_bits=" << res.full[k].queue * 1e6 << " mean_power_w=" << res.full[k].power
        << " mean_backhaul_bpf=" << res.full[k].backhaul * 1e6 << "\n";
  for (std::size_t k = 0; k < res.post_burn.size(); ++k)
    out << "# footer post_burn_in burn=" << res.burn_in << " user=" << k
        << " mean_cost=" << res.post_burn[k].cost
        << " mean_queue_bits=" << res.post_burn[k].queue * 1e6
        << " mean_power_w=" << res.post_burn[k].power
        << " mean_backhaul_bpf=" << res.post_burn[k].backhaul * 1e6 << "\n";
  if (!out) throw std::runtime_error("failed while writing metrics CSV: " + path);
}

void write_snapshot(const RunResult& res, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write snapshot: " + path);
  out.precision(17);
  out << "pcomimo-snapshot 1\n";
  out << "users " << res.gamma_p.size() << "\n";
  out << "gamma_p";
  for (double g : res.gamma_p) out << " " << g;
  out << "\ngamma_c";
  for (double g : res.gamma_c) out << " " << g;
  out << "\n";
  if (res.table) {
    out << "grid " << res.table->levels() << " " << res.table->n_q() << "\n";
    for (int k = 0; k < res.table->users(); ++k) {
      out << "v" << k;
      for (int i = 0; i < res.table->levels(); ++i) out << " " << res.table->values(k)(i);
      out << "\n";
    }
  }
  if (!out) throw std::runtime_error("failed while writing snapshot: " + path);
}

std::vector<ComparisonRow> compare(const RunConfig& base, const std::vector<std::string>& schemes,
                                   int seeds, int workers) {
  if (schemes.empty() || seeds < 1) throw ConfigError("compare: need schemes and seeds >= 1");
  struct Task {
    int scheme_idx;
    int replica;
  };
  std::vector<Task> tasks;
  for (int s = 0; s < static_cast<int>(schemes.size()); ++s)
    for (int r = 0; r < seeds; ++r) tasks.push_back({s, r});

  struct Sample {
    double delay, cost, power, backhaul;
  };
  std::vector<std::vector<Sample>> samples(schemes.size(), std::vector<Sample>(seeds));

  std::mutex m;
  std::size_t next = 0;
  auto worker = [&]() {
    while (true) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(m);
        if (next >= tasks.size()) return;
        i = next++;
      }
      const Task& task = tasks[i];
      RunConfig cfg = base;
      cfg.scheme = schemes[task.scheme_idx];
      cfg.seed = derive_seed(base.seed, scheme_tag(cfg.scheme),
                             static_cast<std::uint64_t>(task.replica));
      RunResult res = run(cfg);
      Sample smp{};
      smp.delay = res.mean_delay_s(cfg, false);
      for (const auto& u : res.full) {
        smp.cost += u.cost / res.full.size();
        smp.power += u.power / res.full.size();
        smp.backhaul += u.backhaul / res.full.size();
      }
      std::lock_guard<std::mutex> lock(m);
      samples[task.scheme_idx][task.replica] = smp;
    }
  };
  int n_workers = workers > 0 ? workers
                              : std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  std::vector<ComparisonRow> rows;
  for (std::size_t s = 0; s < schemes.size(); ++s) {
    ComparisonRow row;
    row.scheme = schemes[s];
    row.seeds = seeds;
    auto stats = [&](auto field, double& mean, double& se) {
      mean = 0.0;
      for (const auto& smp : samples[s]) mean += field(smp);
      mean /= seeds;
      double var = 0.0;
      for (const auto& smp : samples[s]) var += (field(smp) - mean) * (field(smp) - mean);
      se = seeds > 1 ? std::sqrt(var / (seeds - 1) / seeds) : 0.0;
    };
    stats([](const Sample& x) { return x.delay; }, row.delay_s, row.delay_se);
    stats([](const Sample& x) { return x.cost; }, row.cost, row.cost_se);
    stats([](const Sample& x) { return x.power; }, row.power, row.power_se);
    stats([](const Sample& x) { return x.backhaul; }, row.backhaul, row.backhaul_se);
    rows.push_back(row);
  }
  return rows;
}

std::string comparison_table(const std::vector<ComparisonRow>& rows) {
  std::ostringstream o;
  o.precision(6);
  o << "scheme,seeds,delay_s,delay_se,cost,cost_se,power_w,power_se,backhaul_mbpf,backhaul_se\n";
  for (const auto& r : rows)
    o << r.scheme << "," << r.seeds << "," << r.delay_s << "," << r.delay_se << "," << r.cost
      << "," << r.cost_se << "," << r.power << "," << r.power_se << "," << r.backhaul << ","
      << r.backhaul_se << "\n";
  return o.str();
}

}  // namespace pcomimo
