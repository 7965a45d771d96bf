// One line per acceptance criterion; exit status 0 iff all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <random>
#include <sstream>
#include <string>

#include "../common/systems.hpp"
#include "drift/cli.hpp"
#include "drift/dynamics.hpp"
#include "drift/effective.hpp"

using namespace drift;
using namespace drift::testing;

namespace {

// mpmath, tests/oracles/closed_forms.py: 2 pi / sinh(pi / 2).
constexpr double kAmp1 = 2.73027780132343108615825337143;

// Pinned tolerances.
constexpr double kSeparatrixTol = 1e-8;
constexpr double kSeparatrixSeconds = 1.0;
constexpr double kMelnikovTol = 1e-8;
constexpr double kMelnikovSeconds = 10.0;
constexpr double kEnvelopeTol = 1e-5;
constexpr double kEnvelopeStep = 1e-5;
constexpr double kBranchMinDet = 1.0;
constexpr double kBranchMaxGrad = 1e-10;
constexpr double kSlopeTol = 0.2;
constexpr double kMinR2 = 0.95;
constexpr double kShadowSeconds = 60.0;
constexpr double kJumpSeconds = 300.0;
constexpr double kRepairBudget = 0.1;
constexpr double kCosIdentityTol = 1e-10;
constexpr double kLeadingCoeffTol = 1e-8;
constexpr double kIntegratorTol = 1e-10;
constexpr double kConservationFactor = 100.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::shared_ptr<const CriticalBranch> branch_around(const SystemSpec& spec, double I0,
                                                    double phi0, double half_I,
                                                    double half_angle, int steps) {
  auto mel = std::make_shared<const Melnikov>(spec, compute_separatrices(spec));
  const double I[1] = {I0}, phi[1] = {phi0};
  const CriticalPoint start = find_critical_points(*mel, I, phi, 0.0).nondegenerate.front();
  return std::make_shared<const CriticalBranch>(
      continue_branch(mel, start, Box::around(I, phi, 0.0, half_I, half_angle), steps));
}

std::string model_path(const char* name) {
  return std::string(DRIFT_SOURCE_DIR) + "/models/" + name + ".toml";
}

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  return run_cli(args, out, err);
}

Outcome separatrix_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const HomoclinicOrbit orbit = compute_separatrix(cos_pendulum());
  double err = 0.0;
  for (int k = -1000; k <= 1000; ++k) {
    const double t = 0.01 * k;
    const auto [q, p] = orbit_value(orbit, t);
    err = std::max({err, std::abs(q - 4.0 * std::atan(std::exp(t))),
                    std::abs(p - 2.0 / std::cosh(t))});
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {err < kSeparatrixTol && secs < kSeparatrixSeconds,
          fmt("max error %.2e (< %.0e), %.3f s (< %.0f s)", err, kSeparatrixTol, secs,
              kSeparatrixSeconds)};
}

Outcome melnikov_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const SystemSpec spec = single_harmonic_system();
  const Melnikov mel(spec, compute_separatrices(spec));
  const Vec I = {1.0}, phi = {0.0};
  double err = 0.0;
  for (int a = 0; a < 10; ++a) {
    for (int b = 0; b < 10; ++b) {
      const double tau = -kPi + kTwoPi * a / 10.0, s = kTwoPi * b / 10.0;
      const double L = mel.eval(Vec{tau}, I, phi, s, 1e-12, kMelnikovValue).value;
      err = std::max(err, std::abs(L - kAmp1 * std::cos(s - tau)));
    }
  }
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double shift = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Vec tau = {5.0 * u(rng)}, ph = {kPi * u(rng)}, act = {1.0 + 0.5 * u(rng)};
    shift = std::max(shift, check_shift_identity(mel, tau, act, ph, kPi * u(rng), 3.0 * u(rng),
                                                 1e-12));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {err < kMelnikovTol && shift < kMelnikovTol && secs < kMelnikovSeconds,
          fmt("grid error %.2e, shift identity %.2e (< %.0e), %.2f s (< %.0f s)", err, shift,
              kMelnikovTol, secs, kMelnikovSeconds)};
}

Outcome envelope() {
  const ReducedMap map(branch_around(two_harmonic_system(), 1.0, kPi / 2, 0.2, 0.5, 5));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dI(0.85, 1.15), dth(kPi / 2 - 0.35, kPi / 2 + 0.35);
  const double h = kEnvelopeStep;
  double err = 0.0;
  int evaluated = 0;
  for (int k = 0; k < 100; ++k) {
    const Vec I = {dI(rng)}, th = {dth(rng)};
    const ReducedEval r = map.eval(I, th);
    const double fd_I = (map.eval(Vec{I[0] + h}, th, &r.tau_star).value -
                         map.eval(Vec{I[0] - h}, th, &r.tau_star).value) / (2 * h);
    const double fd_th = (map.eval(I, Vec{th[0] + h}, &r.tau_star).value -
                          map.eval(I, Vec{th[0] - h}, &r.tau_star).value) / (2 * h);
    err = std::max({err, std::abs(fd_I - r.grad_I[0]), std::abs(fd_th - r.grad_theta[0])});
    ++evaluated;
  }
  return {evaluated == 100 && err < kEnvelopeTol,
          fmt("%d points, max |identity - FD| %.2e (< %.0e)", evaluated, err, kEnvelopeTol)};
}

Outcome h3a_pipeline() {
  const auto br = branch_around(two_harmonic_system(), 1.0, kPi / 2, 0.2, 0.5, 5);
  const H3aReport rep = h3a_report(*br);
  const std::string dir = (std::filesystem::temp_directory_path() / "drift_acceptance_h3a").string();
  const int code = cli({"verify", model_path("unperturbed"), "--out", dir});
  return {rep.pass && rep.min_abs_det > kBranchMinDet && rep.max_grad_norm < kBranchMaxGrad &&
              code == kExitHypothesisFail,
          fmt("%zu nodes, min|det| %.3f (> %.0f), max grad %.2e (< %.0e); H1 = 0 exit %d (1)",
              rep.nodes, rep.min_abs_det, kBranchMinDet, rep.max_grad_norm, kBranchMaxGrad, code)};
}

Outcome shadowing() {
  const auto t0 = std::chrono::steady_clock::now();
  // Elliptic island around the maximum of L* at (0, 0).
  const ReducedMap map(branch_around(two_harmonic_system(), 0.0, 0.0, 0.4, 0.6, 7));
  const ShadowReport rep = shadow_scaling(map, {{0.25}, {0.0}}, {1e-2, 5e-3, 2.5e-3});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {!rep.degenerate && std::abs(rep.slope - 1.0) <= kSlopeTol && rep.r2 > kMinR2 &&
              secs < kShadowSeconds,
          fmt("dev %.3e %.3e %.3e, slope %.3f (1 +- %.1f), R^2 %.5f (> %.2f), K %.3f, %.1f s",
              rep.max_dev[0], rep.max_dev[1], rep.max_dev[2], rep.slope, kSlopeTol, rep.r2, kMinR2,
              rep.fitted_K, secs)};
}

Outcome homoclinic_jump() {
  const auto t0 = std::chrono::steady_clock::now();
  const SystemSpec spec = two_harmonic_system();
  const auto br = branch_around(spec, 1.0, kPi / 2, 0.2, 0.5, 5);
  const Vec I = {1.0}, theta = {kPi / 2};
  const double eps[3] = {1e-2, 5e-3, 2.5e-3};
  double resid[3], pred = 0.0;
  for (int k = 0; k < 3; ++k) {
    const JumpResult r = measure_homoclinic_jump(spec, eps[k], *br, I, theta);
    pred = r.predicted[0] / eps[k];
    resid[k] = std::abs(r.delta_I[0] / eps[k] - pred);
  }
  const double slope = std::log(resid[0] / resid[2]) / std::log(eps[0] / eps[2]);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::abs(slope - 1.0) <= kSlopeTol && secs < kJumpSeconds,
          fmt("|dI/eps - dL*/dtheta| %.2e %.2e %.2e (dL*/dtheta %.4f), slope %.3f (1 +- %.1f), "
              "%.1f s",
              resid[0], resid[1], resid[2], pred, slope, kSlopeTol, secs)};
}

Outcome repair_end_to_end() {
  const auto dir = std::filesystem::temp_directory_path() / "drift_acceptance_repair";
  std::filesystem::remove_all(dir);
  const int code = cli({"repair", model_path("unperturbed"), "--budget",
                        std::to_string(kRepairBudget), "--out", dir.string()});
  if (code != kExitPass) return {false, fmt("repair exit %d", code)};
  std::ifstream f(dir / "certificate.json");
  const auto j = nlohmann::json::parse(f)["certificate"];
  const bool h3a = j["post_verification"]["h3a"]["pass"];
  const bool h3b = j["post_verification"]["h3b"]["pass"];
  const double added = j["added_amplitude"];
  if (j["stage2"].is_null()) return {false, "certificate has no Hessian repair stage"};
  double cos_err = 0.0;
  for (double c : j["stage2"]["cos_identity"]) cos_err = std::max(cos_err, std::abs(c - 1.0));
  const auto coeffs = j["stage2"]["v_coeffs"].get<std::vector<double>>();
  const std::size_t n = coeffs.size() - 1;
  const double expected = std::pow(-kAmp1, double(n));
  const double lead_err = std::abs(coeffs.back() - expected);
  // The repaired model must also pass on its own.
  const auto vdir = (dir / "verify").string();
  const int vcode = cli({"verify", (dir / "repaired_model.toml").string(), "--out", vdir});
  return {h3a && h3b && added < kRepairBudget && cos_err <= kCosIdentityTol &&
              lead_err <= kLeadingCoeffTol && vcode == kExitPass,
          fmt("H3a %s, H3b %s, added %.4f (< %.1f), |cos - 1| %.1e (<= %.0e), leading %.10f vs "
              "%.10f (err %.1e), re-verify exit %d",
              h3a ? "pass" : "fail", h3b ? "pass" : "fail", added, kRepairBudget, cos_err,
              kCosIdentityTol, coeffs.back(), expected, lead_err, vcode)};
}

Outcome conservation() {
  const SystemSpec spec = two_harmonic_system(0.0);
  IntegrationOptions opt;
  opt.tol = kIntegratorTol;
  opt.stride = 10;
  const double bound = kConservationFactor * kIntegratorTol;
  double action = 0.0, energy = 0.0;
  bool complete = true;
  for (double p0 : {0.7, 2.5}) {
    const TrajectoryRecord rec =
        integrate_full(spec, make_state(spec, {p0}, {0.4}, {0.9}, {1.0}), 100.0, opt);
    complete = complete && rec.complete;
    action = std::max(action, rec.max_action_change);
    energy = std::max(energy, rec.pendulum_energy_drift[0]);
  }
  const ReducedMap island(branch_around(two_harmonic_system(), 0.0, 0.0, 0.4, 0.6, 7));
  const EffectiveCurve c = integrate_effective(island, {{0.25}, {0.0}}, 1.0, kIntegratorTol);
  return {complete && c.complete && action <= bound && energy <= bound && c.max_drift <= bound,
          fmt("max |dI| %.1e, pendulum energy %.1e, L* drift %.1e (<= %.0e)", action, energy,
              c.max_drift, bound)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"separatrix oracle", separatrix_oracle},
      {"Melnikov oracle", melnikov_oracle},
      {"envelope identities", envelope},
      {"H3a pipeline", h3a_pipeline},
      {"shadowing scaling", shadowing},
      {"homoclinic jump vs scattering prediction", homoclinic_jump},
      {"repair end-to-end", repair_end_to_end},
      {"conservation suite", conservation},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %zu. %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
