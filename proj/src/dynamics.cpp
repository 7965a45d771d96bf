#include "drift/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <ostream>

#include <boost/numeric/odeint.hpp>

#include "drift/homoclinic.hpp"
#include "drift/reduced.hpp"

namespace drift {

namespace {

using State = std::vector<double>;

// Flat layout: p (n), q (n), I (d), phi (d), A, J (d).
struct Layout {
  std::size_t n, d;
  std::size_t p() const { return 0; }
  std::size_t q() const { return n; }
  std::size_t I() const { return 2 * n; }
  std::size_t phi() const { return 2 * n + d; }
  std::size_t A() const { return 2 * n + 2 * d; }
  std::size_t J() const { return 2 * n + 2 * d + 1; }
  std::size_t size() const { return 2 * n + 3 * d + 1; }
};

State pack(const Layout& L, const FullState& x) {
  State s(L.size());
  std::copy(x.p.begin(), x.p.end(), s.begin() + long(L.p()));
  std::copy(x.q.begin(), x.q.end(), s.begin() + long(L.q()));
  std::copy(x.I.begin(), x.I.end(), s.begin() + long(L.I()));
  std::copy(x.phi.begin(), x.phi.end(), s.begin() + long(L.phi()));
  s[L.A()] = x.A;
  std::copy(x.J.begin(), x.J.end(), s.begin() + long(L.J()));
  return s;
}

FullState unpack(const Layout& L, const State& s, double t) {
  FullState x;
  auto part = [&](std::size_t at, std::size_t len) {
    return Vec(s.begin() + long(at), s.begin() + long(at + len));
  };
  x.p = part(L.p(), L.n);
  x.q = part(L.q(), L.n);
  x.I = part(L.I(), L.d);
  x.phi = part(L.phi(), L.d);
  x.A = s[L.A()];
  x.J = part(L.J(), L.d);
  x.t = t;
  return x;
}

struct HamiltonRhs {
  const SystemSpec* spec;
  Layout L;
  Vec zeros;

  // Position-dependent forces: pdot, Idot, Adot, Jdot.
  void forces(const State& x, double t, State& dx) const {
    const double eps = spec->epsilon();
    const std::span<const double> q(x.data() + L.q(), L.n), phi(x.data() + L.phi(), L.d);
    for (std::size_t i = 0; i < L.n; ++i) {
      const PendulumSpec& pend = spec->pendulums()[i];
      dx[L.p() + i] = -pend.sign() * pend.dpotential(q[i]);
    }
    for (std::size_t j = 0; j < L.d; ++j) dx[L.I() + j] = dx[L.J() + j] = 0.0;
    dx[L.A()] = 0.0;
    if (eps == 0.0 || spec->perturbation().empty()) return;
    const PerturbationJet jet = eval_h1_jet(*spec, q, phi, t, false);
    for (std::size_t i = 0; i < L.n; ++i) dx[L.p() + i] -= eps * jet.grad_q[i];
    for (std::size_t j = 0; j < L.d; ++j) dx[L.I() + j] = -eps * jet.grad_phi[j];
    dx[L.A()] = -eps * jet.d_t;
    const PerturbationJet base = eval_h1_jet(*spec, zeros, phi, t, false);
    for (std::size_t j = 0; j < L.d; ++j) dx[L.J() + j] = -eps * base.grad_phi[j];
  }

  // Momentum-dependent velocities: qdot, phidot.
  void velocities(const State& x, State& dx) const {
    for (std::size_t i = 0; i < L.n; ++i) {
      dx[L.q() + i] = spec->pendulums()[i].sign() * x[L.p() + i];
    }
    const Vec omega = spec->rotor().frequency(std::span<const double>(x.data() + L.I(), L.d));
    for (std::size_t j = 0; j < L.d; ++j) dx[L.phi() + j] = omega[j];
  }

  void operator()(const State& x, State& dx, double t) const {
    dx.resize(L.size());
    forces(x, t, dx);
    velocities(x, dx);
  }
};

// One step of the fourth-order Yoshida composition of leapfrog, treating
// sum sigma p^2/2 + h(I) as kinetic and sum sigma V + eps H1 as potential.
void yoshida_step(const HamiltonRhs& rhs, State& x, double& t, double dt) {
  static const double cbrt2 = std::cbrt(2.0);
  static const double w1 = 1.0 / (2.0 - cbrt2), w0 = -cbrt2 / (2.0 - cbrt2);
  const double c[4] = {w1 / 2, (w0 + w1) / 2, (w0 + w1) / 2, w1 / 2};
  const double dk[3] = {w1, w0, w1};
  State f(x.size());
  const Layout& L = rhs.L;
  for (int k = 0; k < 4; ++k) {
    rhs.velocities(x, f);
    for (std::size_t i = 0; i < L.n; ++i) x[L.q() + i] += c[k] * dt * f[L.q() + i];
    for (std::size_t j = 0; j < L.d; ++j) x[L.phi() + j] += c[k] * dt * f[L.phi() + j];
    t += c[k] * dt;
    if (k == 3) break;
    rhs.forces(x, t, f);
    for (std::size_t i = 0; i < L.n; ++i) x[L.p() + i] += dk[k] * dt * f[L.p() + i];
    for (std::size_t j = 0; j < L.d; ++j) {
      x[L.I() + j] += dk[k] * dt * f[L.I() + j];
      x[L.J() + j] += dk[k] * dt * f[L.J() + j];
    }
    x[L.A()] += dk[k] * dt * f[L.A()];
  }
}

double torus_offset(double q) { return std::remainder(q, kTwoPi); }

}  // namespace

FullState make_state(const SystemSpec& spec, Vec p, Vec q, Vec I, Vec phi, double t) {
  if (p.size() != spec.n() || q.size() != spec.n() || I.size() != spec.d() ||
      phi.size() != spec.d()) {
    throw InputError("state dimensions do not match the model");
  }
  FullState x;
  x.p = std::move(p);
  x.q = std::move(q);
  x.I = std::move(I);
  x.phi = std::move(phi);
  x.t = t;
  x.J.assign(spec.d(), 0.0);
  return x;
}

double pendulum_energy(const SystemSpec& spec, std::size_t i, double p, double q) {
  const PendulumSpec& pend = spec.pendulums()[i];
  return pend.sign() * (0.5 * p * p + pend.potential(q));
}

double extended_energy(const SystemSpec& spec, const FullState& x) {
  double h = x.A + eval_h0(spec, x.p, x.q, x.I);
  if (spec.epsilon() != 0.0) h += spec.epsilon() * eval_h1(spec, x.q, x.phi, x.t);
  return h;
}

TrajectoryRecord integrate_full(const SystemSpec& spec, const FullState& initial, double t_end,
                                const IntegrationOptions& opt) {
  namespace ode = boost::numeric::odeint;
  const Layout L{spec.n(), spec.d()};
  FullState x0 = initial;
  if (x0.J.empty()) x0.J.assign(L.d, 0.0);
  if (x0.p.size() != L.n || x0.q.size() != L.n || x0.I.size() != L.d || x0.phi.size() != L.d ||
      x0.J.size() != L.d) {
    throw InputError("integrate_full: state dimensions do not match the model");
  }
  if (!std::isfinite(t_end)) throw InputError("integrate_full: t_end must be finite");
  if (opt.method == Integrator::Rkf78 && !(opt.tol > 0.0)) {
    throw InputError("integrate_full: tolerance must be positive");
  }
  if (opt.method == Integrator::Yoshida4 && !(opt.step > 0.0)) {
    throw InputError("integrate_full: step must be positive");
  }
  const int stride = std::max(1, opt.stride);
  const double direction = t_end >= x0.t ? 1.0 : -1.0;

  TrajectoryRecord rec;
  HamiltonRhs rhs{&spec, L, Vec(L.n, 0.0)};
  State x = pack(L, x0);
  double t = x0.t;

  Vec e0(L.n);
  for (std::size_t i = 0; i < L.n; ++i) e0[i] = pendulum_energy(spec, i, x0.p[i], x0.q[i]);
  const double h0 = extended_energy(spec, x0);
  rec.pendulum_energy_drift.assign(L.n, 0.0);
  rec.samples.push_back(x0);
  if (std::abs(torus_offset(t)) < 1e-12) rec.section.push_back(x0);

  auto observe = [&](const FullState& s) {
    double acc = 0.0;
    for (std::size_t j = 0; j < L.d; ++j) {
      const double dI = s.I[j] - x0.I[j];
      acc += dI * dI;
      rec.max_action_change = std::max(rec.max_action_change, std::abs(dI));
    }
    rec.action_drift = std::max(rec.action_drift, std::sqrt(acc));
    for (std::size_t i = 0; i < L.n; ++i) {
      rec.pendulum_energy_drift[i] = std::max(
          rec.pendulum_energy_drift[i], std::abs(pendulum_energy(spec, i, s.p[i], s.q[i]) - e0[i]));
    }
    rec.energy_drift = std::max(rec.energy_drift, std::abs(extended_energy(spec, s) - h0));
  };
  auto blown_up = [&](const State& s) {
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (!std::isfinite(s[k])) return true;
    }
    for (std::size_t i = 0; i < L.n; ++i) {
      if (std::abs(s[L.p() + i]) > opt.blowup) return true;
    }
    for (std::size_t j = 0; j < L.d; ++j) {
      if (std::abs(s[L.I() + j]) > opt.blowup) return true;
    }
    return false;
  };
  auto next_section = [&](double from) {
    const double k = direction > 0 ? std::floor(from / kTwoPi + 1e-12) + 1.0
                                   : std::ceil(from / kTwoPi - 1e-12) - 1.0;
    return k * kTwoPi;
  };

  auto stepper = ode::make_controlled(opt.tol, 0.0, ode::runge_kutta_fehlberg78<State>());
  double dt = direction * (opt.method == Integrator::Yoshida4 ? opt.step : 1e-2);
  const double min_dt = 1e-14 * std::max(1.0, std::abs(t_end));
  double section_t = next_section(t);
  while (direction * (t_end - t) > 0.0) {
    double limit = t_end;
    bool at_section = false;
    if (direction * (section_t - t_end) <= 0.0) {
      limit = section_t;
      at_section = true;
    }
    double dt_try = direction * std::min(std::abs(dt), std::abs(limit - t));
    State x_try = x;
    double t_try = t;
    if (opt.method == Integrator::Yoshida4) {
      yoshida_step(rhs, x_try, t_try, dt_try);
    } else if (stepper.try_step(std::cref(rhs), x_try, t_try, dt_try) == ode::fail) {
      dt = dt_try;
      if (std::abs(dt) < min_dt) {
        rec.complete = false;
        rec.exit_message = "integrate_full: step size underflow";
        break;
      }
      continue;
    } else {
      dt = dt_try;
    }
    const bool landed = std::abs(t_try - limit) < 1e-12 * std::max(1.0, std::abs(limit));
    if (landed) t_try = limit;
    ++rec.steps;
    x = std::move(x_try);
    t = t_try;
    if (blown_up(x)) {
      rec.complete = false;
      rec.exit_message = "integrate_full: trajectory blew up";
      rec.samples.push_back(unpack(L, x, t));
      break;
    }
    const FullState s = unpack(L, x, t);
    observe(s);
    if (landed && at_section) {
      rec.section.push_back(s);
      section_t = next_section(t);
    }
    const bool last = t == t_end;
    if (opt.stop && opt.stop(s)) {
      rec.stopped = true;
      rec.samples.push_back(s);
      break;
    }
    if (last || rec.steps % stride == 0) rec.samples.push_back(s);
  }
  return rec;
}

namespace {

struct Excursion {
  int fate = 0;  // +1 passed the saddle, -1 turned back, 0 unresolved
  double min_dist = std::numeric_limits<double>::infinity();
  FullState at_min;
  int integrations = 0;
};

struct JumpContext {
  SystemSpec sys;
  const HomoclinicOrbit* orbit;
  JumpOptions opt;
  double cap;
  Vec I0, theta0;

  FullState seed(double tau, double eta) const {
    const auto [q, p] = orbit_value(*orbit, tau);
    return make_state(sys, {p + eta}, {q}, I0, theta0, 0.0);
  }

  // Follows the trajectory from the seed towards the saddle the loop reaches
  // forward (dir_time > 0) or backward in time.
  Excursion follow(double tau, double eta, double dir_time) const {
    const PendulumSpec& pend = sys.pendulums()[0];
    const int dir = pend.sign() * pend.branch();
    const double saddle = (dir > 0) == (dir_time > 0) ? kTwoPi : 0.0;
    Excursion ex;
    IntegrationOptions io;
    io.tol = opt.tol;
    io.stride = 1 << 30;
    io.stop = [&](const FullState& s) {
      const double off = s.q[0] - saddle;
      const double dist = std::hypot(s.p[0], off);
      if (dist < ex.min_dist) {
        ex.min_dist = dist;
        ex.at_min = s;
      }
      if (off * dir * dir_time > 0.0) {
        ex.fate = +1;
      } else if (pend.sign() * s.p[0] * dir < 0.0) {
        ex.fate = -1;
      }
      return ex.fate != 0;
    };
    integrate_full(sys, seed(tau, eta), dir_time * cap, io);
    ex.integrations = 1;
    return ex;
  }

  // p-offset placing the seed on the stable (dir_time > 0) or unstable manifold.
  double manifold_offset(double tau, double dir_time, int& integrations) const {
    const double p0 = orbit_value(*orbit, tau).second;
    double a = std::max(1e-6, 10.0 * sys.epsilon()) * (1.0 + std::abs(p0));
    double lo = -a, hi = a;
    int f_lo = 0, f_hi = 0;
    for (;;) {
      lo = -a;
      hi = a;
      f_lo = follow(tau, lo, dir_time).fate;
      f_hi = follow(tau, hi, dir_time).fate;
      integrations += 2;
      if (f_lo != 0 && f_hi != 0 && f_lo != f_hi) break;
      a *= 4.0;
      if (a > 0.5 * (1.0 + std::abs(p0))) {
        throw ExcursionError("homoclinic jump: could not bracket the invariant manifold");
      }
    }
    const double width = 4e-16 * (1.0 + std::abs(p0));
    for (int it = 0; it < 200 && hi - lo > width; ++it) {
      const double mid = 0.5 * (lo + hi);
      const int f = follow(tau, mid, dir_time).fate;
      ++integrations;
      if (f == 0) break;
      (f == f_lo ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }
};

Vec reduced_action(const FullState& s) {
  Vec r(s.I.size());
  for (std::size_t j = 0; j < r.size(); ++j) r[j] = s.I[j] - s.J[j];
  return r;
}

}  // namespace

JumpResult measure_homoclinic_jump(const SystemSpec& spec, double epsilon,
                                   const CriticalBranch& branch, std::span<const double> I0,
                                   std::span<const double> theta0, const JumpOptions& opt) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw InputError("homoclinic jump: epsilon must be finite and >= 0");
  }
  if (I0.size() != spec.d() || theta0.size() != spec.d()) {
    throw InputError("homoclinic jump: witness dimension does not match the model");
  }
  const Melnikov& mel = *branch.mel;
  if (mel.n() != spec.n() || mel.d() != spec.d()) {
    throw InputError("homoclinic jump: branch belongs to a different model");
  }
  if (opt.seeding == JumpSeeding::Manifold && spec.n() != 1) {
    throw InputError("homoclinic jump: manifold seeding needs one pendulum; use heuristic seeding");
  }

  const ReducedMap map(std::shared_ptr<const CriticalBranch>(&branch, [](const CriticalBranch*) {}));
  const ReducedEval r = map.eval(I0, theta0);

  JumpContext ctx{spec.with_epsilon(epsilon), &mel.orbits()[0], opt, opt.time_cap,
                  Vec(I0.begin(), I0.end()), Vec(theta0.begin(), theta0.end())};
  if (!(ctx.cap > 0.0)) {
    const Vec lambdas = characteristic_exponents(spec);
    ctx.cap = 50.0 / *std::min_element(lambdas.begin(), lambdas.end());
  }

  JumpResult res;
  res.predicted = r.grad_theta;
  for (double& v : res.predicted) v *= epsilon;
  res.tau = r.tau_star;

  FullState before, after;
  if (opt.seeding == JumpSeeding::Manifold) {
    int count = 0;
    auto gap = [&](double tau, double& eta_s, double& eta_u) {
      eta_s = ctx.manifold_offset(tau, +1.0, count);
      eta_u = ctx.manifold_offset(tau, -1.0, count);
      return eta_s - eta_u;
    };
    double tau0 = r.tau_star[0], tau1 = tau0 + 1e-3;
    double es0, eu0, es1, eu1;
    double g0 = gap(tau0, es0, eu0);
    double g1 = gap(tau1, es1, eu1);
    if (std::abs(g0) < std::abs(g1)) {
      std::swap(tau0, tau1);
      std::swap(g0, g1);
      std::swap(es0, es1);
      std::swap(eu0, eu1);
    }
    // Secant on the splitting of the two manifolds along the p-direction.
    const double g_tol = 1e-14 * (1.0 + std::abs(orbit_value(*ctx.orbit, tau1).second));
    for (int it = 0; it < 30 && std::abs(g1) > g_tol && g1 != g0; ++it) {
      const double tau2 = tau1 - g1 * (tau1 - tau0) / (g1 - g0);
      if (!std::isfinite(tau2) || std::abs(tau2 - r.tau_star[0]) > branch.opt.jump_bound) {
        throw ExcursionError("homoclinic jump: manifold intersection not found near tau*");
      }
      tau0 = tau1;
      g0 = g1;
      tau1 = tau2;
      if (std::abs(tau1 - tau0) < 1e-13) break;
      g1 = gap(tau1, es1, eu1);
    }
    res.tau = {tau1};
    res.eta = 0.5 * (es1 + eu1);
    const Excursion fwd = ctx.follow(tau1, es1, +1.0);
    const Excursion bwd = ctx.follow(tau1, eu1, -1.0);
    res.integrations = count + 2;
    if (fwd.min_dist > opt.return_radius || bwd.min_dist > opt.return_radius) {
      throw ExcursionError("homoclinic jump: trajectory did not return near p = q = 0");
    }
    after = fwd.at_min;
    before = bwd.at_min;
    res.dist_after = fwd.min_dist;
    res.dist_before = bwd.min_dist;
  } else {
    // Start on the unperturbed loops where the farthest pendulum is eta away
    // from its saddle, timed so that the loops pass q0(tau*) at t = 0.
    res.eta = opt.eta > 0.0 ? opt.eta : 10.0 * epsilon;
    if (!(res.eta > 0.0)) res.eta = 1e-3;
    auto spread = [&](double t) {
      double dist = 0.0;
      for (std::size_t i = 0; i < spec.n(); ++i) {
        const auto [q, p] = orbit_value(mel.orbits()[i], r.tau_star[i] + t);
        dist = std::max(dist, std::hypot(p, torus_offset(q)));
      }
      return dist;
    };
    double lo = -ctx.cap, hi = 0.0;
    if (spread(lo) > res.eta) throw InputError("homoclinic jump: eta below the reachable distance");
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
      const double mid = 0.5 * (lo + hi);
      (spread(mid) > res.eta ? hi : lo) = mid;
    }
    const double t0 = lo;
    FullState x = make_state(ctx.sys, Vec(spec.n()), Vec(spec.n()), ctx.I0, ctx.theta0, t0);
    for (std::size_t i = 0; i < spec.n(); ++i) {
      std::tie(x.q[i], x.p[i]) = orbit_value(mel.orbits()[i], r.tau_star[i] + t0);
    }
    const Vec omega = spec.rotor().frequency(ctx.I0);
    for (std::size_t j = 0; j < spec.d(); ++j) x.phi[j] += omega[j] * t0;

    bool departed = false;
    IntegrationOptions io;
    io.tol = opt.tol;
    io.stride = 1 << 30;
    io.stop = [&](const FullState& s) {
      double dist = 0.0;
      for (std::size_t i = 0; i < s.q.size(); ++i) {
        dist = std::max(dist, std::hypot(s.p[i], torus_offset(s.q[i])));
      }
      departed |= dist > opt.depart_radius;
      if (departed && dist < opt.return_radius) {
        after = s;
        res.dist_after = dist;
        return true;
      }
      return false;
    };
    const TrajectoryRecord rec = integrate_full(ctx.sys, x, t0 + 2.0 * ctx.cap, io);
    if (!rec.stopped) throw ExcursionError("homoclinic jump: no return within the time cap");
    before = x;
    res.dist_before = spread(t0);
    res.integrations = 1;
  }
  const Vec ra = reduced_action(after), rb = reduced_action(before);
  res.delta_I.resize(ra.size());
  res.delta_I_raw.resize(ra.size());
  for (std::size_t j = 0; j < ra.size(); ++j) {
    res.delta_I[j] = ra[j] - rb[j];
    res.delta_I_raw[j] = after.I[j] - before.I[j];
  }
  res.t_after = after.t;
  res.t_before = before.t;
  return res;
}

void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec) {
  if (rec.samples.empty()) return;
  const std::size_t n = rec.samples.front().p.size(), d = rec.samples.front().I.size();
  const auto old = os.precision(17);
  os << 't';
  for (std::size_t i = 0; i < n; ++i) os << ",p" << i + 1;
  for (std::size_t i = 0; i < n; ++i) os << ",q" << i + 1;
  for (std::size_t j = 0; j < d; ++j) os << ",I" << j + 1;
  for (std::size_t j = 0; j < d; ++j) os << ",phi" << j + 1;
  os << '\n';
  for (const auto& s : rec.samples) {
    os << s.t;
    for (double v : s.p) os << ',' << v;
    for (double v : s.q) os << ',' << v;
    for (double v : s.I) os << ',' << v;
    for (double v : s.phi) os << ',' << v;
    os << '\n';
  }
  os.precision(old);
}

}  // namespace drift
