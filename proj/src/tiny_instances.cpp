#include "pcomimo/tiny_instances.hpp"

namespace pcomimo {

namespace {

TinyAction zero_action(int users) {
  TinyAction a;
  a.p_common_share.assign(users, 0.0);
  return a;
}

TinyAction private_action(int users, double power, double rate) {
  TinyAction a;
  a.p_common_share.assign(users, 0.0);
  a.p_private = power;
  a.rate_p = rate;
  return a;
}

TinyAction common_action(std::vector<double> shares, double rate) {
  TinyAction a;
  a.p_common_share = std::move(shares);
  a.rate_c = rate;
  return a;
}

}  // namespace

TinyInstance make_lemma2_instance() { return make_lemma2_instance_pcct(0.0); }

TinyInstance make_lemma2_instance_pcct(double p_cct) {
  TinyInstance t;
  t.n_users = 2;
  t.grid = {0, 1, 2, 3, 4};
  t.h_prob = {0.4, 0.6};
  t.csit_kernel = Eigen::MatrixXd::Identity(2, 2);
  t.p_cct = p_cct;
  t.p_budget = {0.8, 0.8};
  t.r_budget = {0.9, 0.9};
  t.beta = {1.0, 1.3};

  t.actions.resize(2);
  t.cap_c.resize(2);
  t.cap_p.resize(2);
  for (int k = 0; k < 2; ++k) {
    t.actions[k].push_back(zero_action(2));
    t.actions[k].push_back(private_action(2, 1.2, 1.0));
    t.actions[k].push_back(common_action(k == 0 ? std::vector<double>{0.5, 0.7}
                                                : std::vector<double>{0.6, 0.4},
                                         2.0));
    t.cap_c[k] = Eigen::MatrixXd::Zero(2, 3);
    t.cap_p[k] = Eigen::MatrixXd::Zero(2, 3);
    // bad state h0 fails both rates, good state h1 carries them
    t.cap_p[k](0, 1) = 0.5;
    t.cap_p[k](1, 1) = k == 0 ? 2.0 : 2.2;
    t.cap_c[k](0, 2) = 1.0;
    t.cap_c[k](1, 2) = 2.5;
  }
  t.arrivals = {{{0.0, 0.3}, {1.0, 0.4}, {2.0, 0.3}},
                {{0.0, 0.35}, {1.0, 0.35}, {2.0, 0.3}}};
  t.validate();
  return t;
}

TinyInstance make_duality_instance() {
  TinyInstance t;
  t.n_users = 2;
  t.grid = {0, 1};
  t.h_prob = {0.35, 0.65};
  t.csit_kernel = Eigen::MatrixXd::Identity(2, 2);
  t.p_cct = 0.0;
  // power budgets sit exactly on deterministic-policy consumption levels:
  // user 0 on its cheap-send vertex (the strong action must price out),
  // user 1 on its only active vertex; backhaul is unconstrained here
  t.p_budget = {0.3939393939393939, 0.3939393939393939};
  t.r_budget = {1e3, 1e3};
  t.beta = {1.0, 1.0};

  t.actions.resize(2);
  t.cap_c.resize(2);
  t.cap_p.resize(2);
  for (int k = 0; k < 2; ++k) {
    t.actions[k].push_back(zero_action(2));
    t.actions[k].push_back(private_action(2, 1.0, 1.0));
    int n = k == 0 ? 3 : 2;
    if (k == 0) t.actions[k].push_back(private_action(2, 2.6, 1.0));
    t.cap_c[k] = Eigen::MatrixXd::Zero(2, n);
    t.cap_p[k] = Eigen::MatrixXd::Zero(2, n);
    t.cap_p[k](0, 1) = 0.4;  // bad state: the cheap send fails
    t.cap_p[k](1, 1) = 1.7;
    if (k == 0) {
      t.cap_p[k](0, 2) = 1.3;  // the strong send carries the bad state too
      t.cap_p[k](1, 2) = 2.4;
    }
  }
  t.arrivals = {{{0.0, 0.5}, {1.0, 0.5}}, {{0.0, 0.5}, {1.0, 0.5}}};
  t.validate();
  return t;
}

TinyInstance make_fixedpoint_instance() {
  TinyInstance t;
  t.n_users = 2;
  t.grid = {0, 1, 2, 3, 4};
  t.h_prob = {0.5, 0.5};
  t.csit_kernel = Eigen::MatrixXd(2, 2);
  t.csit_kernel << 0.85, 0.15, 0.2, 0.8;
  t.p_cct = 0.05;
  t.p_budget = {0.7, 0.7};
  t.r_budget = {0.8, 0.8};
  t.beta = {1.0, 1.0};

  t.actions.resize(2);
  t.cap_c.resize(2);
  t.cap_p.resize(2);
  for (int k = 0; k < 2; ++k) {
    t.actions[k].push_back(zero_action(2));
    t.actions[k].push_back(private_action(2, 1.0, 1.0));
    t.actions[k].push_back(private_action(2, 2.5, 2.0));
    t.cap_c[k] = Eigen::MatrixXd::Zero(2, 3);
    t.cap_p[k] = Eigen::MatrixXd::Zero(2, 3);
    t.cap_p[k](0, 1) = 0.3;
    t.cap_p[k](1, 1) = 1.5;
    t.cap_p[k](0, 2) = 0.4;
    t.cap_p[k](1, 2) = 2.3;
  }
  t.arrivals = {{{0.0, 0.4}, {1.0, 0.35}, {2.0, 0.25}},
                {{0.0, 0.4}, {1.0, 0.35}, {2.0, 0.25}}};
  t.validate();
  return t;
}

}  // namespace pcomimo
