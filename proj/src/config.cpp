#include "pcomimo/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace pcomimo {

double RunConfig::r0() const {
  if (r0_mbit >= 0.0) return r0_mbit;
  return r0_factor * w_tau_mbit() * std::log2(1.0 + p0_linear());
}

ArrivalModel RunConfig::arrivals() const {
  ArrivalModel m;
  m.lambda = lambda_pps;
  m.mean_size = mean_packet_mbit;
  m.tau = tau_s;
  return m;
}

void RunConfig::validate() const {
  if (frames < 0) throw ConfigError("sim.frames must be >= 0");
  if (K < 2) throw ConfigError("phy.K must be >= 2");
  if (!(N <= M && K * N > M)) throw ConfigError("phy: require M/K < N <= M");
  if (static_cast<int>(d_c.size()) != K || static_cast<int>(d_p.size()) != K)
    throw ConfigError("phy.d_c / phy.d_p must list K entries");
  if (static_cast<int>(beta.size()) != K) throw ConfigError("cost.beta must list K entries");
  if (bandwidth_hz <= 0 || tau_s <= 0 || n_q_mbit <= 0 || mean_packet_mbit <= 0)
    throw ConfigError("physical quantities must be positive");
  if (lambda_pps < 0) throw ConfigError("queue.lambda_pps must be >= 0");
  if (alphabet_size < 2) throw ConfigError("channel.alphabet_size must be >= 2");
  if (sigma_e < 0) throw ConfigError("channel.sigma_e must be >= 0");
  if (p_cct < 0) throw ConfigError("budget.p_cct must be >= 0");
  if (eta <= 0) throw ConfigError("learner.eta must be > 0");
  if (grid_levels < 2) throw ConfigError("learner.grid_levels must be >= 2");
  if (csit_buckets < 1) throw ConfigError("learner.csit_buckets must be >= 1");
  if (log_interval < 1) throw ConfigError("sim.log_interval must be >= 1");
  delay_cost_kind_from_string(cost_kind);
  if (scheme != "proposed" && scheme != "coordinative" && scheme != "uco" &&
      scheme != "fullcoop" && scheme != "channel_aware_pco")
    throw ConfigError("sim.scheme must be proposed|coordinative|uco|fullcoop|channel_aware_pco");
  if (scheme == "uco" && K != 2) throw ConfigError("uco scheme applies to K = 2 only");
  if (!two_timescale_ok(kv, kg))
    throw ConfigError("learner step schedules violate the two-timescale conditions");
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

struct Setter {
  RunConfig& cfg;
  const std::string& key;
  const std::string& value;

  double num() const {
    try {
      std::size_t pos = 0;
      double v = std::stod(value, &pos);
      if (trim(value.substr(pos)).size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config: bad numeric value for '" + key + "': " + value);
    }
  }
  long integer() const {
    double v = num();
    if (v != std::floor(v)) throw ConfigError("config: '" + key + "' must be an integer");
    return static_cast<long>(v);
  }
  bool boolean() const {
    if (value == "1" || value == "true" || value == "on") return true;
    if (value == "0" || value == "false" || value == "off") return false;
    throw ConfigError("config: '" + key + "' must be a boolean");
  }
  std::vector<double> numbers() const {
    std::vector<double> out;
    for (const auto& tok : split_list(value)) {
      try {
        out.push_back(std::stod(trim(tok)));
      } catch (const std::exception&) {
        throw ConfigError("config: bad list value for '" + key + "'");
      }
    }
    return out;
  }
  std::vector<int> integers() const {
    std::vector<int> out;
    for (double v : numbers()) {
      if (v != std::floor(v)) throw ConfigError("config: '" + key + "' must list integers");
      out.push_back(static_cast<int>(v));
    }
    return out;
  }
};

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    Setter s{cfg, key, value};

    if (key == "sim.scheme") cfg.scheme = value;
    else if (key == "sim.frames") cfg.frames = s.integer();
    else if (key == "sim.seed") cfg.seed = static_cast<std::uint64_t>(s.integer());
    else if (key == "sim.log_interval") cfg.log_interval = s.integer();
    else if (key == "sim.burn_in") cfg.burn_in = s.integer();
    else if (key == "sim.out_dir") cfg.out_dir = value;
    else if (key == "phy.K") cfg.K = static_cast<int>(s.integer());
    else if (key == "phy.M") cfg.M = static_cast<int>(s.integer());
    else if (key == "phy.N") cfg.N = static_cast<int>(s.integer());
    else if (key == "phy.d_c") cfg.d_c = s.integers();
    else if (key == "phy.d_p") cfg.d_p = s.integers();
    else if (key == "phy.bandwidth_hz") cfg.bandwidth_hz = s.num();
    else if (key == "phy.tau_s") cfg.tau_s = s.num();
    else if (key == "channel.alphabet_size") cfg.alphabet_size = static_cast<int>(s.integer());
    else if (key == "channel.alphabet_seed") cfg.alphabet_seed = static_cast<std::uint64_t>(s.integer());
    else if (key == "channel.sigma_e") cfg.sigma_e = s.num();
    else if (key == "channel.whole_matrix_states") cfg.whole_matrix_states = s.boolean();
    else if (key == "queue.n_q_mbit") cfg.n_q_mbit = s.num();
    else if (key == "queue.lambda_pps") cfg.lambda_pps = s.num();
    else if (key == "queue.mean_packet_mbit") cfg.mean_packet_mbit = s.num();
    else if (key == "cost.kind") cfg.cost_kind = value;
    else if (key == "cost.q0_mbit") cfg.cost_q0_mbit = s.num();
    else if (key == "cost.beta") cfg.beta = s.numbers();
    else if (key == "budget.p0_db") cfg.p0_db = s.num();
    else if (key == "budget.r0_factor") cfg.r0_factor = s.num();
    else if (key == "budget.r0_mbit") cfg.r0_mbit = s.num();
    else if (key == "budget.p_cct") cfg.p_cct = s.num();
    else if (key == "learner.eta") cfg.eta = s.num();
    else if (key == "learner.grid_levels") cfg.grid_levels = static_cast<int>(s.integer());
    else if (key == "learner.csit_buckets") cfg.csit_buckets = static_cast<int>(s.integer());
    else if (key == "learner.gamma_init") cfg.gamma_init = s.num();
    else if (key == "learner.gamma_bound") cfg.gamma_bound = s.num();
    else if (key == "learner.kv_c") cfg.kv.c = s.num();
    else if (key == "learner.kv_t0") cfg.kv.t0 = s.num();
    else if (key == "learner.kv_p") cfg.kv.p = s.num();
    else if (key == "learner.kg_c") cfg.kg.c = s.num();
    else if (key == "learner.kg_t0") cfg.kg.t0 = s.num();
    else if (key == "learner.kg_p") cfg.kg.p = s.num();
    else if (key == "learner.ka_c") cfg.ka.c = s.num();
    else if (key == "learner.ka_t0") cfg.ka.t0 = s.num();
    else if (key == "learner.ka_p") cfg.ka.p = s.num();
    else if (key == "learner.gradient_exact") cfg.gradient_exact = s.boolean();
    else if (key == "learner.step_cap_power") cfg.step_cap_power = s.num();
    else if (key == "learner.step_cap_rate") cfg.step_cap_rate = s.num();
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream o;
  o.precision(17);
  auto list_i = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  auto list_d = [&o](const std::vector<double>& v) {
    std::ostringstream s;
    s.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
    return s.str();
  };
  o << "sim.scheme = " << c.scheme << "\n";
  o << "sim.frames = " << c.frames << "\n";
  o << "sim.seed = " << c.seed << "\n";
  o << "sim.log_interval = " << c.log_interval << "\n";
  o << "sim.burn_in = " << c.burn_in << "\n";
  o << "sim.out_dir = " << c.out_dir << "\n";
  o << "phy.K = " << c.K << "\n";
  o << "phy.M = " << c.M << "\n";
  o << "phy.N = " << c.N << "\n";
  o << "phy.d_c = " << list_i(c.d_c) << "\n";
  o << "phy.d_p = " << list_i(c.d_p) << "\n";
  o << "phy.bandwidth_hz = " << c.bandwidth_hz << "\n";
  o << "phy.tau_s = " << c.tau_s << "\n";
  o << "channel.alphabet_size = " << c.alphabet_size << "\n";
  o << "channel.alphabet_seed = " << c.alphabet_seed << "\n";
  o << "channel.sigma_e = " << c.sigma_e << "\n";
  o << "channel.whole_matrix_states = " << (c.whole_matrix_states ? 1 : 0) << "\n";
  o << "queue.n_q_mbit = " << c.n_q_mbit << "\n";
  o << "queue.lambda_pps = " << c.lambda_pps << "\n";
  o << "queue.mean_packet_mbit = " << c.mean_packet_mbit << "\n";
  o << "cost.kind = " << c.cost_kind << "\n";
  o << "cost.q0_mbit = " << c.cost_q0_mbit << "\n";
  o << "cost.beta = " << list_d(c.beta) << "\n";
  o << "budget.p0_db = " << c.p0_db << "\n";
  o << "budget.r0_factor = " << c.r0_factor << "\n";
  o << "budget.r0_mbit = " << c.r0_mbit << "\n";
  o << "budget.p_cct = " << c.p_cct << "\n";
  o << "learner.eta = " << c.eta << "\n";
  o << "learner.grid_levels = " << c.grid_levels << "\n";
  o << "learner.csit_buckets = " << c.csit_buckets << "\n";
  o << "learner.gamma_init = " << c.gamma_init << "\n";
  o << "learner.gamma_bound = " << c.gamma_bound << "\n";
  o << "learner.kv_c = " << c.kv.c << "\n";
  o << "learner.kv_t0 = " << c.kv.t0 << "\n";
  o << "learner.kv_p = " << c.kv.p << "\n";
  o << "learner.kg_c = " << c.kg.c << "\n";
  o << "learner.kg_t0 = " << c.kg.t0 << "\n";
  o << "learner.kg_p = " << c.kg.p << "\n";
  o << "learner.ka_c = " << c.ka.c << "\n";
  o << "learner.ka_t0 = " << c.ka.t0 << "\n";
  o << "learner.ka_p = " << c.ka.p << "\n";
  o << "learner.gradient_exact = " << (c.gradient_exact ? 1 : 0) << "\n";
  o << "learner.step_cap_power = " << c.step_cap_power << "\n";
  o << "learner.step_cap_rate = " << c.step_cap_rate << "\n";
  return o.str();
}

}  // namespace pcomimo
