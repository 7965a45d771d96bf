#include "drift/report.hpp"

namespace drift {

namespace {

Json terms_json(const std::vector<FourierTerm>& f) {
  Json a = Json::array();
  for (const FourierTerm& t : f) a.push_back({t.k, t.cos_amp, t.sin_amp});
  return a;
}

Json terms_json(const std::vector<std::vector<FourierTerm>>& f) {
  Json a = Json::array();
  for (const auto& v : f) a.push_back(terms_json(v));
  return a;
}

Json state_json(const FullState& x) {
  return {{"t", x.t}, {"p", x.p}, {"q", x.q}, {"I", x.I}, {"phi", x.phi}, {"A", x.A}, {"J", x.J}};
}

}  // namespace

Json to_json(const Mode& m) {
  return {{"k", m.k}, {"l", m.l}, {"m", m.m}, {"amplitude", m.amplitude}, {"phase", m.phase}};
}

Json to_json(const std::vector<Mode>& modes) {
  Json a = Json::array();
  for (const Mode& m : modes) a.push_back(to_json(m));
  return a;
}

Json to_json(const CriticalPoint& cp) {
  return {{"tau_star", cp.tau_star},   {"grad_norm", cp.grad_norm},
          {"hess_det", cp.hess_det},   {"nondegeneracy", cp.nondegeneracy},
          {"hess", cp.hess},           {"hess_eigs", cp.hess_eigs},
          {"value", cp.value},         {"iterations", cp.iterations},
          {"I", cp.I},                 {"phi", cp.phi},
          {"s", cp.s}};
}

Json to_json(const H3aReport& r) {
  return {{"pass", r.pass},
          {"min_abs_det", r.min_abs_det},
          {"min_nondegeneracy", r.min_nondegeneracy},
          {"max_grad_norm", r.max_grad_norm},
          {"nodes", r.nodes},
          {"failed_nodes", r.failed_nodes},
          {"message", r.message}};
}

Json to_json(const H3bReport& r) {
  return {{"pass", r.pass},
          {"tol", r.tol},
          {"max_grad_theta", r.max_grad_theta},
          {"I0", r.I0},
          {"theta_at", r.theta_at},
          {"grad_theta_at", r.grad_theta_at},
          {"value_at", r.value_at},
          {"evaluated", r.evaluated},
          {"outside", r.outside},
          {"message", r.message}};
}

Json to_json(const Box& b) {
  return {{"I_lo", b.I_lo},     {"I_hi", b.I_hi}, {"phi_lo", b.phi_lo},
          {"phi_hi", b.phi_hi}, {"s_lo", b.s_lo}, {"s_hi", b.s_hi}};
}

Json to_json(const HomoclinicOrbit& o) {
  const auto [rf, rb] = o.fitted_decay_rates();
  return {{"lambda", o.lambda()},
          {"branch", o.branch()},
          {"sign", o.sign()},
          {"t_span", o.t_span()},
          {"grid_step", o.step()},
          {"tail_coeff_forward", o.tail_coeff_forward()},
          {"tail_coeff_backward", o.tail_coeff_backward()},
          {"fitted_decay_forward", rf},
          {"fitted_decay_backward", rb},
          {"max_energy_error", o.max_energy_error()}};
}

Json to_json(const ShadowReport& r) {
  return {{"epsilons", r.epsilons},   {"max_dev", r.max_dev}, {"steps", r.steps},
          {"fitted_K", r.fitted_K},   {"slope", r.slope},     {"r2", r.r2},
          {"degenerate", r.degenerate}, {"curve_drift", r.curve_drift}};
}

Json to_json(const JumpResult& r) {
  return {{"delta_I", r.delta_I},     {"delta_I_raw", r.delta_I_raw}, {"predicted", r.predicted},
          {"tau", r.tau},             {"eta", r.eta},                 {"t_before", r.t_before},
          {"t_after", r.t_after},     {"dist_before", r.dist_before}, {"dist_after", r.dist_after},
          {"integrations", r.integrations}};
}

Json to_json(const TrajectoryRecord& r) {
  Json j = {{"complete", r.complete},
            {"stopped", r.stopped},
            {"exit_message", r.exit_message},
            {"steps", r.steps},
            {"samples", r.samples.size()},
            {"action_drift", r.action_drift},
            {"max_action_change", r.max_action_change},
            {"pendulum_energy_drift", r.pendulum_energy_drift},
            {"energy_drift", r.energy_drift}};
  if (!r.samples.empty()) {
    j["initial"] = state_json(r.samples.front());
    j["final"] = state_json(r.samples.back());
  }
  Json sec = Json::array();
  for (const FullState& x : r.section) sec.push_back({{"t", x.t}, {"I", x.I}});
  j["section_actions"] = sec;
  return j;
}

Json to_json(const RepairCertificate& c) {
  Json j;
  j["noop"] = c.noop;
  j["budget"] = c.budget;
  j["target"] = {{"I", c.target.I}, {"phi", c.target.phi}, {"s", c.target.s}};
  j["theta_hat"] = c.theta_hat;
  if (c.stage1) {
    const Stage1Data& s = *c.stage1;
    j["stage1"] = {{"f", terms_json(s.f)},       {"A1", s.A1},
                   {"A2", s.A2},                 {"alpha", s.alpha},
                   {"b", s.b},                   {"delta2", s.delta2},
                   {"tau_star", s.tau_star},     {"grad_before", s.grad_before},
                   {"grad_after", s.grad_after}, {"modes", to_json(s.modes)}};
  } else {
    j["stage1"] = nullptr;
  }
  if (c.stage2) {
    const Stage2Data& s = *c.stage2;
    j["stage2"] = {{"g", terms_json(s.g)},
                   {"B1", s.B1},
                   {"B2", s.B2},
                   {"beta", s.beta},
                   {"c", s.c},
                   {"lambda", s.lambda},
                   {"cos_identity", s.cos_identity},
                   {"delta3", s.delta3},
                   {"v", s.v},
                   {"v_coeffs", s.v_coeffs},
                   {"prod_lambda", s.prod_lambda},
                   {"hess_before", s.hess_before},
                   {"hess_after", s.hess_after},
                   {"tau_star", s.tau_star},
                   {"modes", to_json(s.modes)}};
  } else {
    j["stage2"] = nullptr;
  }
  if (c.h3b_stage) {
    const H3bStageData& s = *c.h3b_stage;
    j["h3b_stage"] = {{"F", terms_json(s.F)},
                      {"A", s.A},
                      {"B", s.B},
                      {"C", s.C},
                      {"alpha", s.alpha},
                      {"c", s.c},
                      {"delta", s.delta},
                      {"grad_theta_before", s.grad_theta_before},
                      {"grad_theta_after", s.grad_theta_after},
                      {"tau_star", s.tau_star},
                      {"modes", to_json(s.modes)}};
  } else {
    j["h3b_stage"] = nullptr;
  }
  j["added_amplitude"] = c.added_amplitude;
  j["pre_verification"] = {{"h3a", to_json(c.before.h3a)}, {"h3b", to_json(c.before.h3b)}};
  j["post_verification"] = {{"h3a", to_json(c.after.h3a)}, {"h3b", to_json(c.after.h3b)}};
  return j;
}

}  // namespace drift
