#include "drift/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>

#include "drift/config.hpp"
#include "drift/error.hpp"
#include "drift/report.hpp"

namespace drift {

namespace {

constexpr const char* kSchemaVersion = "1";

struct RunConfig {
  std::string model;
  std::string out = ".";
  double quad_tol = 1e-12;
  double newton_tol = 1e-10;
  double nondegen_tol = 1e-6;
  double h3b_tol = 1e-4;
  double int_tol = 1e-10;
  Vec I, phi;
  double s = 0.0;
  double half_I = 0.2;
  double half_angle = 0.5;
  int grid = 5;
  int theta_points = 9;
  int workers = 0;
  std::uint64_t seed = 1;

  // repair
  double budget = 0.0;
  // scan
  int tau_points = 32;
  int s_points = 32;
  int shift_checks = 100;
  // shadow
  Vec eps = {1e-2, 5e-3, 2.5e-3};
  Vec start_I, start_theta;
  double t_end = 1.0;
  // diffuse
  double epsilon = 0.0;
  Vec p0, q0;
  double orbit_time = -8.0;
  int stride = 1;
  bool jump = false;
  bool yoshida = false;
  double step = 1e-2;
};

void add_common(CLI::App* sub, RunConfig& c) {
  sub->add_option("model", c.model, "model file")->required();
  sub->add_option("--out", c.out, "report directory");
  sub->add_option("--quad-tol", c.quad_tol, "Melnikov quadrature tolerance");
  sub->add_option("--newton-tol", c.newton_tol, "Newton tolerance on ||dL/dtau||_1");
  sub->add_option("--nondegen-tol", c.nondegen_tol, "Hessian nondegeneracy threshold");
  sub->add_option("--h3b-tol", c.h3b_tol, "threshold on |dL*/dtheta|");
  sub->add_option("--int-tol", c.int_tol, "ODE integrator tolerance");
  sub->add_option("--I", c.I, "base actions (default 1 per component)")->expected(1, -1);
  sub->add_option("--phi", c.phi, "base angles (default 0)")->expected(1, -1);
  sub->add_option("--s", c.s, "base time phase");
  sub->add_option("--half-I", c.half_I, "box half-width in I");
  sub->add_option("--half-angle", c.half_angle, "box half-width in phi and s");
  sub->add_option("--grid", c.grid, "continuation nodes per box axis");
  sub->add_option("--workers", c.workers, "threads, 0 = hardware");
  sub->add_option("--seed", c.seed, "seed for randomized checks");
}

void validate(RunConfig& c, const SystemSpec& spec) {
  for (double t : {c.quad_tol, c.newton_tol, c.nondegen_tol, c.h3b_tol, c.int_tol}) {
    if (!(t > 0.0) || !std::isfinite(t)) throw InputError("tolerances must be positive");
  }
  if (!(c.half_I > 0.0) || !(c.half_angle > 0.0)) throw InputError("box half-widths must be > 0");
  if (c.grid < 1) throw InputError("--grid must be >= 1");
  const std::size_t d = spec.d();
  if (c.I.empty()) c.I.assign(d, 1.0);
  if (c.phi.empty()) c.phi.assign(d, 0.0);
  if (c.I.size() != d || c.phi.size() != d) {
    throw InputError("--I and --phi need " + std::to_string(d) + " values");
  }
}

CriticalityOptions crit_options(const RunConfig& c) {
  CriticalityOptions o;
  o.newton_tol = c.newton_tol;
  o.nondegen_tol = c.nondegen_tol;
  o.quad_tol = c.quad_tol;
  o.workers = c.workers;
  return o;
}

Box box_of(const RunConfig& c) { return Box::around(c.I, c.phi, c.s, c.half_I, c.half_angle); }

std::filesystem::path out_dir(const RunConfig& c) {
  std::filesystem::path dir(c.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + c.out + "'");
  return dir;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write '" + path.string() + "'");
  return f;
}

void write_json(const std::filesystem::path& path, const std::string& kind, Json body) {
  Json j;
  j["schema"] = "drift." + kind + "/" + kSchemaVersion;
  for (auto it = body.begin(); it != body.end(); ++it) j[it.key()] = it.value();
  open_out(path) << j.dump(2) << '\n';
}

Json header(const RunConfig& c, const SystemSpec& spec) {
  return {{"model", c.model},
          {"epsilon", spec.epsilon()},
          {"n", spec.n()},
          {"d", spec.d()},
          {"target", {{"I", c.I}, {"phi", c.phi}, {"s", c.s}}}};
}

/// theta grid over the box's phi range, theta_points per component.
std::vector<Vec> theta_grid(const Box& box, int points) {
  const std::size_t d = box.d();
  std::size_t total = 1;
  for (std::size_t j = 0; j < d; ++j) total *= std::size_t(points);
  std::vector<Vec> grid;
  for (std::size_t idx = 0; idx < total; ++idx) {
    Vec th(d);
    std::size_t rem = idx;
    for (std::size_t j = 0; j < d; ++j) {
      const double f = points == 1 ? 0.5 : double(rem % std::size_t(points)) / (points - 1);
      th[j] = box.phi_lo[j] + f * (box.phi_hi[j] - box.phi_lo[j]);
      rem /= std::size_t(points);
    }
    grid.push_back(th);
  }
  return grid;
}

struct Pipeline {
  std::shared_ptr<const Melnikov> mel;
  CriticalSearch search;
  std::shared_ptr<const CriticalBranch> branch;
};

Pipeline build_branch(const RunConfig& c, const SystemSpec& spec) {
  Pipeline p;
  p.mel = std::make_shared<const Melnikov>(spec, compute_separatrices(spec));
  p.search = find_critical_points(*p.mel, c.I, c.phi, c.s, crit_options(c));
  if (!p.search.nondegenerate.empty()) {
    p.branch = std::make_shared<const CriticalBranch>(continue_branch(
        p.mel, p.search.nondegenerate.front(), box_of(c), c.grid, crit_options(c)));
  }
  return p;
}

int cmd_verify(RunConfig& c, std::ostream& out) {
  const SystemSpec spec = load_model(c.model);
  validate(c, spec);
  if (c.theta_points < 1) throw InputError("--theta-points must be >= 1");
  const auto dir = out_dir(c);
  const Pipeline p = build_branch(c, spec);

  Json j = header(c, spec);
  Json orbits = Json::array();
  for (const auto& o : p.mel->orbits()) orbits.push_back(to_json(o));
  j["separatrices"] = orbits;
  j["box"] = to_json(box_of(c));
  j["critical_points"] = {{"nondegenerate", p.search.nondegenerate.size()},
                          {"degenerate", p.search.degenerate.size()}};
  bool pass = false;
  if (!p.branch) {
    const std::string msg = "H3a: no nondegenerate critical points";
    j["h3a"] = {{"pass", false}, {"message", msg}};
    j["h3b"] = {{"pass", false}, {"message", "H3b: not evaluated without an H3a branch"}};
    out << msg << '\n';
  } else {
    j["start"] = to_json(p.search.nondegenerate.front());
    const H3aReport h3a = h3a_report(*p.branch);
    j["h3a"] = to_json(h3a);
    out << h3a.message << '\n';
    auto f = open_out(dir / "branch.csv");
    write_branch_csv(f, *p.branch);
    if (h3a.pass) {
      const ReducedMap map(p.branch, c.quad_tol);
      const H3bReport h3b = h3b_check(map, c.I, theta_grid(p.branch->box, c.theta_points), c.h3b_tol);
      j["h3b"] = to_json(h3b);
      out << h3b.message << '\n';
      pass = h3b.pass;
    } else {
      j["h3b"] = {{"pass", false}, {"message", "H3b: not evaluated, H3a failed"}};
    }
  }
  j["pass"] = pass;
  write_json(dir / "verify.json", "verify", j);
  return pass ? kExitPass : kExitHypothesisFail;
}

int cmd_repair(RunConfig& c, std::ostream& out) {
  const SystemSpec spec = load_model(c.model);
  validate(c, spec);
  if (!(c.budget > 0.0) || !std::isfinite(c.budget)) throw InputError("--budget must be > 0");
  const auto dir = out_dir(c);
  RepairOptions opt;
  opt.crit = crit_options(c);
  opt.h3b_tol = c.h3b_tol;
  opt.quad_tol = c.quad_tol;
  opt.grid_steps = c.grid;
  const RepairCertificate cert = repair(spec, {c.I, c.phi, c.s}, c.budget, opt);
  Json j = header(c, spec);
  j["certificate"] = to_json(cert);
  j["repaired_model"] = "repaired_model.toml";
  write_json(dir / "certificate.json", "repair", j);
  save_model((dir / "repaired_model.toml").string(), *cert.repaired);
  const bool pass = cert.after.h3a.pass && cert.after.h3b.pass;
  out << (cert.noop ? "no-op: model already passes at the target" : "repair applied") << '\n'
      << cert.after.h3a.message << '\n'
      << cert.after.h3b.message << '\n'
      << "added amplitude " << cert.added_amplitude << " of budget " << cert.budget << '\n';
  return pass ? kExitPass : kExitHypothesisFail;
}

int cmd_scan(RunConfig& c, std::ostream& out) {
  const SystemSpec spec = load_model(c.model);
  validate(c, spec);
  if (c.tau_points < 1 || c.s_points < 1) throw InputError("scan needs at least one grid point");
  if (c.shift_checks < 0) throw InputError("--shift-checks must be >= 0");
  const auto dir = out_dir(c);
  const Melnikov mel(spec, compute_separatrices(spec));
  const std::size_t n = spec.n();
  const Vec periods = tau_periods(mel, c.I);

  std::size_t total = std::size_t(c.s_points);
  for (std::size_t i = 0; i < n; ++i) total *= std::size_t(c.tau_points);
  std::vector<ScanPoint> pts;
  pts.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    ScanPoint sp;
    sp.I = c.I;
    sp.phi = c.phi;
    std::size_t rem = idx;
    sp.s = kTwoPi * double(rem % std::size_t(c.s_points)) / c.s_points;
    rem /= std::size_t(c.s_points);
    for (std::size_t i = 0; i < n; ++i) {
      sp.tau.push_back(periods[i] * (-0.5 + double(rem % std::size_t(c.tau_points)) / c.tau_points));
      rem /= std::size_t(c.tau_points);
    }
    pts.push_back(std::move(sp));
  }
  auto f = open_out(dir / "scan.csv");
  write_scan_csv(f, mel, pts, c.quad_tol);

  // Shift identity at random points.
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double shift_max = 0.0;
  for (int k = 0; k < c.shift_checks; ++k) {
    Vec tau(n), phi(spec.d());
    for (std::size_t i = 0; i < n; ++i) tau[i] = 5.0 * unit(rng);
    for (auto& v : phi) v = kPi * unit(rng);
    const double s = kPi * unit(rng);
    const double sigma = 3.0 * unit(rng);
    shift_max = std::max(shift_max, check_shift_identity(mel, tau, c.I, phi, s, sigma, c.quad_tol));
  }
  Json j = header(c, spec);
  j["tau_points"] = c.tau_points;
  j["s_points"] = c.s_points;
  j["tau_periods"] = periods;
  j["points"] = total;
  j["uniform_bound"] = mel.uniform_bound();
  j["uniform_gradient_bound"] = mel.uniform_gradient_bound();
  j["shift_identity"] = {{"checks", c.shift_checks}, {"seed", c.seed}, {"max_discrepancy", shift_max}};
  j["csv"] = "scan.csv";
  write_json(dir / "scan.json", "scan", j);
  out << "scanned " << total << " points; shift identity max discrepancy " << shift_max << '\n';
  return kExitPass;
}

int cmd_shadow(RunConfig& c, std::ostream& out) {
  const SystemSpec spec = load_model(c.model);
  validate(c, spec);
  if (c.eps.empty()) throw InputError("--eps needs at least one value");
  for (double e : c.eps) {
    if (!(e > 0.0)) throw InputError("shadowing epsilons must be > 0");
  }
  if (!(c.t_end > 0.0)) throw InputError("--t-end must be > 0");
  const auto dir = out_dir(c);
  const Pipeline p = build_branch(c, spec);
  if (!p.branch) {
    out << "H3a: no nondegenerate critical points\n";
    return kExitHypothesisFail;
  }
  const Vec omega = spec.rotor().frequency(c.I);
  ScatteringState x0{c.start_I.empty() ? c.I : c.start_I, c.start_theta};
  if (x0.theta.empty()) {
    for (std::size_t j = 0; j < spec.d(); ++j) x0.theta.push_back(c.phi[j] - omega[j] * c.s);
  }
  const ReducedMap map(p.branch, c.quad_tol);
  const ShadowReport rep = shadow_scaling(map, x0, c.eps, c.t_end, c.int_tol, c.workers);
  const EffectiveCurve curve = integrate_effective(map, x0, c.t_end, c.int_tol);
  auto f = open_out(dir / "effective_curve.csv");
  write_curve_csv(f, curve);

  Json j = header(c, spec);
  j["start"] = {{"I", x0.I}, {"theta", x0.theta}};
  j["t_end"] = c.t_end;
  j["box"] = to_json(p.branch->box);
  j["shadow"] = to_json(rep);
  j["curve"] = {{"complete", curve.complete},
                {"steps", curve.steps},
                {"max_drift", curve.max_drift},
                {"exit_message", curve.exit_message}};
  write_json(dir / "shadow.json", "shadow", j);
  out << "shadowing slope " << rep.slope << ", R^2 " << rep.r2 << ", K " << rep.fitted_K << '\n';
  return kExitPass;
}

int cmd_diffuse(RunConfig& c, std::ostream& out) {
  const SystemSpec base = load_model(c.model);
  validate(c, base);
  if (c.epsilon == 0.0 || !std::isfinite(c.epsilon)) throw InputError("--eps must be nonzero");
  if (!(c.t_end > 0.0)) throw InputError("--t-end must be > 0");
  if (c.stride < 1) throw InputError("--stride must be >= 1");
  const SystemSpec spec = base.with_epsilon(c.epsilon);
  const auto dir = out_dir(c);
  const std::size_t n = spec.n();

  // Default start: on each unperturbed separatrix at time orbit_time.
  Vec p0 = c.p0, q0 = c.q0;
  if (p0.empty() || q0.empty()) {
    const auto orbits = compute_separatrices(spec);
    p0.clear();
    q0.clear();
    for (const auto& o : orbits) {
      const auto [q, p] = orbit_value(o, c.orbit_time);
      q0.push_back(q);
      p0.push_back(p);
    }
  }
  if (p0.size() != n || q0.size() != n) {
    throw InputError("--p and --q need " + std::to_string(n) + " values");
  }
  IntegrationOptions io;
  io.tol = c.int_tol;
  io.stride = c.stride;
  io.step = c.step;
  io.method = c.yoshida ? Integrator::Yoshida4 : Integrator::Rkf78;
  const FullState x0 = make_state(spec, p0, q0, c.I, c.phi, 0.0);
  const TrajectoryRecord rec = integrate_full(spec, x0, c.t_end, io);
  auto f = open_out(dir / "trajectory.csv");
  write_trajectory_csv(f, rec);

  Json j = header(c, base);
  j["epsilon"] = c.epsilon;
  j["t_end"] = c.t_end;
  j["integrator"] = c.yoshida ? "yoshida4" : "rkf78";
  j["trajectory"] = to_json(rec);
  if (c.jump) {
    const Pipeline p = build_branch(c, spec);
    if (!p.branch) {
      j["jump"] = {{"message", "H3a: no nondegenerate critical points"}};
    } else {
      const Vec omega = spec.rotor().frequency(c.I);
      Vec theta(spec.d());
      for (std::size_t k = 0; k < theta.size(); ++k) theta[k] = c.phi[k] - omega[k] * c.s;
      JumpOptions jo;
      if (n > 1) jo.seeding = JumpSeeding::Heuristic;
      const JumpResult jr = measure_homoclinic_jump(spec, c.epsilon, *p.branch, c.I, theta, jo);
      j["jump"] = to_json(jr);
      out << "jump delta_I " << jr.delta_I[0] << ", predicted " << jr.predicted[0] << '\n';
    }
  }
  write_json(dir / "diffuse.json", "diffuse", j);
  out << "action drift " << rec.action_drift << " over t = " << c.t_end
      << (rec.complete ? "" : " (partial: " + rec.exit_message + ")") << '\n';
  return kExitPass;
}

int cmd_separatrix(RunConfig& c, std::ostream& out) {
  const SystemSpec spec = load_model(c.model);
  validate(c, spec);
  const auto dir = out_dir(c);
  const auto orbits = compute_separatrices(spec);
  Json arr = Json::array();
  for (std::size_t i = 0; i < orbits.size(); ++i) {
    const std::string name = "separatrix_" + std::to_string(i + 1) + ".csv";
    auto f = open_out(dir / name);
    write_orbit_csv(f, orbits[i]);
    Json o = to_json(orbits[i]);
    o["csv"] = name;
    arr.push_back(o);
    out << "pendulum " << i + 1 << ": lambda " << orbits[i].lambda() << '\n';
  }
  Json j = header(c, spec);
  j["separatrices"] = arr;
  write_json(dir / "separatrix.json", "separatrix", j);
  return kExitPass;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Arnold diffusion hypothesis checks for a priori unstable Hamiltonians", "drift"};
  app.require_subcommand(1);
  RunConfig c;

  auto* verify = app.add_subcommand("verify", "check H3a and H3b at the target");
  add_common(verify, c);
  verify->add_option("--theta-points", c.theta_points, "H3b witness grid per component");

  auto* rep = app.add_subcommand("repair", "add small perturbations restoring H3a and H3b");
  add_common(rep, c);
  rep->add_option("--budget", c.budget, "bound on the added amplitude sum")->required();

  auto* scan = app.add_subcommand("scan", "grid scan of the Melnikov potential");
  add_common(scan, c);
  scan->add_option("--tau-points", c.tau_points, "tau nodes per pendulum");
  scan->add_option("--s-points", c.s_points, "s nodes");
  scan->add_option("--shift-checks", c.shift_checks, "random points for the shift identity");

  auto* shadow = app.add_subcommand("shadow", "shadowing of scattering pseudo-orbits");
  add_common(shadow, c);
  shadow->add_option("--eps", c.eps, "epsilon values")->expected(1, -1);
  shadow->add_option("--start-I", c.start_I, "initial actions (default --I)")->expected(1, -1);
  shadow->add_option("--start-theta", c.start_theta, "initial angles (default phi - omega s)")
      ->expected(1, -1);
  shadow->add_option("--t-end", c.t_end, "effective time horizon");

  auto* diffuse = app.add_subcommand("diffuse", "full-system integration and action drift");
  add_common(diffuse, c);
  diffuse->add_option("--eps", c.epsilon, "perturbation size")->required();
  diffuse->add_option("--t-end", c.t_end, "final time");
  diffuse->add_option("--p", c.p0, "initial p (default on the separatrix)")->expected(1, -1);
  diffuse->add_option("--q", c.q0, "initial q (default on the separatrix)")->expected(1, -1);
  diffuse->add_option("--orbit-time", c.orbit_time, "separatrix time of the default start");
  diffuse->add_option("--stride", c.stride, "keep every stride-th step");
  diffuse->add_flag("--jump", c.jump, "also measure one homoclinic jump at the target");
  diffuse->add_flag("--yoshida", c.yoshida, "fixed-step symplectic integrator");
  diffuse->add_option("--step", c.step, "step for --yoshida");

  auto* sep = app.add_subcommand("separatrix", "separatrix orbits and their tails");
  add_common(sep, c);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitPass : kExitUsage;
  }

  try {
    if (*verify) return cmd_verify(c, out);
    if (*rep) return cmd_repair(c, out);
    if (*scan) return cmd_scan(c, out);
    if (*shadow) return cmd_shadow(c, out);
    if (*diffuse) return cmd_diffuse(c, out);
    if (*sep) return cmd_separatrix(c, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DomainError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace drift
