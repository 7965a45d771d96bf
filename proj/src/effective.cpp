#include "drift/effective.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <boost/numeric/odeint.hpp>

#include "drift/error.hpp"
#include "drift/parallel.hpp"

namespace drift {

namespace {

using State = std::vector<double>;

struct FlowRhs {
  const ReducedMap* map;
  std::size_t d;
  Vec hint;

  void operator()(const State& x, State& dx, double /*t*/) {
    const std::span<const double> I(x.data(), d), theta(x.data() + d, d);
    const ReducedEval r = map->eval(I, theta, hint.empty() ? nullptr : &hint);
    hint = r.tau_star;
    dx.resize(2 * d);
    for (std::size_t j = 0; j < d; ++j) {
      dx[j] = r.grad_theta[j];
      dx[d + j] = -r.grad_I[j];
    }
  }
};

EffectiveSample make_sample(const ReducedMap& map, double t, const State& x, std::size_t d) {
  EffectiveSample s;
  s.t = t;
  s.I.assign(x.begin(), x.begin() + d);
  s.theta.assign(x.begin() + d, x.end());
  s.value = map.eval(s.I, s.theta).value;
  return s;
}

double distance(const ScatteringState& a, const EffectiveSample& b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.I.size(); ++j) {
    acc += (a.I[j] - b.I[j]) * (a.I[j] - b.I[j]);
    acc += (a.theta[j] - b.theta[j]) * (a.theta[j] - b.theta[j]);
  }
  return std::sqrt(acc);
}

}  // namespace

EffectiveCurve integrate_effective(const ReducedMap& map, const ScatteringState& x0, double t_end,
                                   double tol, const std::vector<double>* sample_times) {
  namespace ode = boost::numeric::odeint;
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw InputError("effective flow: bad t_end");
  if (!(tol > 0.0)) throw InputError("effective flow: tolerance must be positive");
  if (!map.in_domain(x0.I, x0.theta)) throw InputError("effective flow: x0 outside Dom(L*)");
  const std::size_t d = map.d();
  std::vector<double> targets = sample_times ? *sample_times : std::vector<double>{t_end};
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (targets[k] < 0.0 || targets[k] > t_end || (k > 0 && targets[k] < targets[k - 1])) {
      throw InputError("effective flow: sample times must be ascending within [0, t_end]");
    }
  }
  const bool every_step = sample_times == nullptr;

  EffectiveCurve curve;
  FlowRhs rhs{&map, d, {}};
  State x(x0.I.begin(), x0.I.end());
  x.insert(x.end(), x0.theta.begin(), x0.theta.end());
  auto stepper = ode::make_dense_output(tol, tol, ode::runge_kutta_dopri5<State>());

  double dt = std::min(0.01, std::max(t_end, 1e-300));
  const double min_dt = 1e-12 * std::max(1.0, t_end);
  std::size_t next = 0;
  if (every_step || (!targets.empty() && targets.front() == 0.0)) {
    curve.samples.push_back(make_sample(map, 0.0, x, d));
    if (!every_step) ++next;
  }
  stepper.initialize(x, 0.0, dt);
  State xi(2 * d);
  while (stepper.current_time() < t_end && next < targets.size()) {
    const double t0 = stepper.current_time();
    if (stepper.current_time() + stepper.current_time_step() > t_end) {
      stepper.initialize(stepper.current_state(), t0, t_end - t0);
    }
    try {
      stepper.do_step(std::ref(rhs));
    } catch (const DomainError& e) {
      dt = 0.5 * stepper.current_time_step();
      if (dt < min_dt) {
        curve.complete = false;
        curve.exit_message = std::string("effective flow left Dom(L*): ") + e.what();
        break;
      }
      State back = stepper.current_state();
      stepper.initialize(back, t0, dt);
      ++curve.rejected;
      continue;
    }
    ++curve.steps;
    double t1 = stepper.current_time();
    if (std::abs(t1 - t_end) < 1e-13 * std::max(1.0, t_end)) t1 = t_end;
    if (every_step) {
      curve.samples.push_back(make_sample(map, t1, stepper.current_state(), d));
      continue;
    }
    while (next < targets.size() && targets[next] <= t1) {
      stepper.calc_state(targets[next], xi);
      curve.samples.push_back(make_sample(map, targets[next], xi, d));
      ++next;
    }
    if (t1 == t_end) break;
  }
  if (!curve.samples.empty()) {
    const double v0 = curve.samples.front().value;
    for (const auto& s : curve.samples) {
      curve.max_drift = std::max(curve.max_drift, std::abs(s.value - v0));
    }
  }
  return curve;
}

PseudoOrbit pseudo_orbit(const ReducedMap& map, const ScatteringState& x0, double epsilon,
                         int n_steps) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InputError("pseudo-orbit: bad epsilon");
  if (n_steps < 0) throw InputError("pseudo-orbit: negative step count");
  if (!map.in_domain(x0.I, x0.theta)) throw InputError("pseudo-orbit: x0 outside Dom(L*)");
  long N = n_steps;
  if (epsilon > 0.0) N = std::min<long>(N, long(std::floor(1.0 / epsilon + 1e-9)));
  PseudoOrbit orbit;
  orbit.states.reserve(std::size_t(N) + 1);
  orbit.states.push_back(x0);
  Vec hint;
  for (long i = 0; i < N; ++i) {
    try {
      orbit.states.push_back(scattering_step(map, orbit.states.back(), epsilon, &hint));
    } catch (const DomainError& e) {
      orbit.complete = false;
      orbit.exit_message = e.what();
      break;
    }
  }
  return orbit;
}

ShadowReport shadow_scaling(const ReducedMap& map, const ScatteringState& x0,
                            const std::vector<double>& epsilons, double t_end, double tol,
                            int workers) {
  std::vector<double> eps;
  for (double e : epsilons) {
    if (e > 0.0 && std::isfinite(e) && e <= t_end) eps.push_back(e);
  }
  if (eps.size() < 2) throw InputError("shadow_scaling: need at least two usable epsilons");
  if (!map.in_domain(x0.I, x0.theta)) throw InputError("shadow_scaling: x0 outside Dom(L*)");

  ShadowReport rep;
  rep.epsilons = eps;
  rep.max_dev.assign(eps.size(), 0.0);
  rep.steps.assign(eps.size(), 0);
  std::vector<double> drift(eps.size(), 0.0);
  parallel_for(eps.size(), workers, [&](std::size_t k) {
    const int N = int(std::floor(t_end / eps[k] + 1e-9));
    std::vector<double> times(std::size_t(N) + 1);
    for (int i = 0; i <= N; ++i) times[std::size_t(i)] = i * eps[k];
    const EffectiveCurve gamma = integrate_effective(map, x0, times.back(), tol, &times);
    if (!gamma.complete) throw DomainError("shadow_scaling: " + gamma.exit_message);
    const PseudoOrbit orbit = pseudo_orbit(map, x0, eps[k], N);
    if (!orbit.complete) {
      throw DomainError("shadow_scaling: pseudo-orbit left Dom(L*): " + orbit.exit_message);
    }
    double dev = 0.0;
    for (int i = 0; i <= N; ++i) {
      dev = std::max(dev, distance(orbit.states[std::size_t(i)], gamma.samples[std::size_t(i)]));
    }
    rep.max_dev[k] = dev;
    rep.steps[k] = N;
    drift[k] = gamma.max_drift;
  });
  rep.curve_drift = *std::max_element(drift.begin(), drift.end());

  rep.degenerate = *std::max_element(rep.max_dev.begin(), rep.max_dev.end()) < 1e-12;
  if (rep.degenerate) return rep;
  const std::size_t m = eps.size();
  double mx = 0, my = 0, log_k = 0;
  std::vector<double> lx(m), ly(m);
  for (std::size_t k = 0; k < m; ++k) {
    lx[k] = std::log(eps[k]);
    ly[k] = std::log(std::max(rep.max_dev[k], 1e-300));
    mx += lx[k] / double(m);
    my += ly[k] / double(m);
    log_k += (ly[k] - lx[k]) / double(m);
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < m; ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
    syy += (ly[k] - my) * (ly[k] - my);
  }
  rep.fitted_K = std::exp(log_k);
  rep.slope = sxx > 0 ? sxy / sxx : 0.0;
  rep.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  return rep;
}

void write_curve_csv(std::ostream& os, const EffectiveCurve& curve) {
  const std::size_t d = curve.samples.empty() ? 0 : curve.samples.front().I.size();
  const auto old = os.precision(17);
  os << 't';
  for (std::size_t j = 0; j < d; ++j) os << ",I" << j + 1;
  for (std::size_t j = 0; j < d; ++j) os << ",theta" << j + 1;
  os << ",Lstar\n";
  for (const auto& s : curve.samples) {
    os << s.t;
    for (double v : s.I) os << ',' << v;
    for (double v : s.theta) os << ',' << v;
    os << ',' << s.value << '\n';
  }
  os.precision(old);
}

}  // namespace drift
