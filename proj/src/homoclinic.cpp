#include "drift/homoclinic.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <ostream>

#include <boost/numeric/odeint.hpp>

#include "drift/error.hpp"

namespace drift {

namespace {

using State = std::array<double, 1>;

struct HalfRhs {
  const PendulumSpec* pend;
  int side;

  double operator()(double u) const {
    const double z = std::exp(u);
    const double w = std::max(0.0, pend->drop(side * z));
    return -std::sqrt(2.0 * w) / z;
  }
  void operator()(const State& x, State& dx, double /*s*/) const { dx[0] = (*this)(x[0]); }
};

// u = log z on the grid s_j = j h, j = 0..M, starting at z = pi.
void integrate_half(const PendulumSpec& pend, int side, double h, std::size_t M, Vec& u,
                    Vec& du) {
  namespace ode = boost::numeric::odeint;
  HalfRhs rhs{&pend, side};
  State x{std::log(kPi)};
  std::vector<double> times(M + 1);
  for (std::size_t j = 0; j <= M; ++j) times[j] = double(j) * h;
  u.clear();
  u.reserve(M + 1);
  auto stepper = ode::make_controlled(1e-15, 1e-15, ode::runge_kutta_fehlberg78<State>());
  try {
    ode::integrate_times(stepper, rhs, x, times.begin(), times.end(), h,
                         [&](const State& s, double) { u.push_back(s[0]); });
  } catch (const std::exception& e) {
    throw NumericalError(std::string("separatrix integration failed: ") + e.what());
  }
  if (u.size() != M + 1) throw NumericalError("separatrix integration stopped early");
  du.resize(M + 1);
  for (std::size_t j = 0; j <= M; ++j) {
    if (!std::isfinite(u[j])) throw NumericalError("separatrix integration produced NaN");
    du[j] = rhs(u[j]);
  }
}

}  // namespace

HomoclinicOrbit::HomoclinicOrbit(PendulumSpec pendulum, double t_span, double step, Vec u_fwd,
                                 Vec du_fwd, Vec u_bwd, Vec du_bwd)
    : pendulum_(std::move(pendulum)),
      lambda_(pendulum_.lambda()),
      t_span_(t_span),
      step_(step),
      u_fwd_(std::move(u_fwd)),
      du_fwd_(std::move(du_fwd)),
      u_bwd_(std::move(u_bwd)),
      du_bwd_(std::move(du_bwd)) {
  // q moves in the direction sigma * branch; going forward it ends at 2 pi if
  // that direction is positive.
  const int dir = pendulum_.sign() * pendulum_.branch();
  fwd_ = dir > 0 ? Half{-1, kTwoPi} : Half{+1, 0.0};
  bwd_ = dir > 0 ? Half{+1, 0.0} : Half{-1, kTwoPi};
  tail_fwd_ = std::exp(u_fwd_.back() + lambda_ * t_span_);
  tail_bwd_ = std::exp(u_bwd_.back() + lambda_ * t_span_);
}

double HomoclinicOrbit::u_at(const Vec& u, const Vec& du, double s, double& du_out) const {
  const std::size_t M = u.size() - 1;
  if (s >= t_span_) {
    du_out = -lambda_;
    return u[M] - lambda_ * (s - t_span_);
  }
  std::size_t j = std::size_t(s / step_);
  if (j >= M) j = M - 1;
  const double h = step_;
  const double x = (s - double(j) * h) / h;
  const double x2 = x * x;
  const double x3 = x2 * x;
  const double h00 = 2 * x3 - 3 * x2 + 1;
  const double h10 = x3 - 2 * x2 + x;
  const double h01 = -2 * x3 + 3 * x2;
  const double h11 = x3 - x2;
  du_out = ((6 * x2 - 6 * x) * u[j] + (3 * x2 - 4 * x + 1) * h * du[j] +
            (-6 * x2 + 6 * x) * u[j + 1] + (3 * x2 - 2 * x) * h * du[j + 1]) /
           h;
  return h00 * u[j] + h10 * h * du[j] + h01 * u[j + 1] + h11 * h * du[j + 1];
}

OrbitPoint HomoclinicOrbit::at(double t) const {
  const bool forward = t >= 0.0;
  const Half& half = forward ? fwd_ : bwd_;
  double du = 0.0;
  const double u = forward ? u_at(u_fwd_, du_fwd_, t, du) : u_at(u_bwd_, du_bwd_, -t, du);
  const double z = std::exp(u);
  OrbitPoint pt;
  pt.dist = z;
  pt.q = half.sat + half.side * z;
  pt.p = pendulum_.branch() * std::sqrt(2.0 * std::max(0.0, pendulum_.drop(half.side * z)));
  pt.qdot = pendulum_.sign() * pt.p;
  // V'(q) at q = 2 pi - z equals V'(-z); evaluating at the small argument keeps
  // relative accuracy in the tail.
  pt.qddot = -pendulum_.dpotential(half.side * z);
  return pt;
}

std::vector<OrbitSample> HomoclinicOrbit::samples() const {
  const std::size_t M = u_fwd_.size() - 1;
  std::vector<OrbitSample> out;
  out.reserve(2 * M + 1);
  for (std::size_t j = M; j >= 1; --j) {
    const double t = -double(j) * step_;
    const OrbitPoint pt = at(t);
    out.push_back({t, pt.q, pt.p});
  }
  for (std::size_t j = 0; j <= M; ++j) {
    const double t = double(j) * step_;
    const OrbitPoint pt = at(t);
    out.push_back({t, pt.q, pt.p});
  }
  return out;
}

double HomoclinicOrbit::max_energy_error() const {
  const double v0 = pendulum_.potential(0.0);
  double worst = 0.0;
  for (const auto& s : samples()) {
    worst = std::max(worst, std::abs(0.5 * s.p * s.p + pendulum_.potential(s.q) - v0));
  }
  return worst;
}

std::pair<double, double> HomoclinicOrbit::fitted_decay_rates() const {
  auto fit = [&](double sgn) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    const std::size_t M = u_fwd_.size() - 1;
    for (std::size_t j = M / 2; j <= M; ++j) {
      const double s = double(j) * step_;
      const OrbitPoint pt = at(sgn * s);
      const double y = std::log(std::hypot(pt.dist, pt.p));
      sx += s;
      sy += y;
      sxx += s * s;
      sxy += s * y;
      ++cnt;
    }
    const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    return -slope;
  };
  return {fit(1.0), fit(-1.0)};
}

namespace {

template <class F>
double integrate_over_line(const HomoclinicOrbit& orbit, F integrand, double tail_factor) {
  const std::size_t M = std::size_t(std::llround(orbit.t_span() / orbit.step()));
  double total = 0.0;
  for (double sgn : {1.0, -1.0}) {
    double acc = 0.5 * integrand(orbit.at(0.0));
    for (std::size_t j = 1; j < M; ++j) acc += integrand(orbit.at(sgn * double(j) * orbit.step()));
    const OrbitPoint end = orbit.at(sgn * orbit.t_span());
    acc += 0.5 * integrand(end);
    total += acc * orbit.step() + end.dist * tail_factor / orbit.lambda();
  }
  return total;
}

}  // namespace

double HomoclinicOrbit::l1_norm() const {
  return integrate_over_line(
      *this, [](const OrbitPoint& pt) { return std::abs(pt.p) + pt.dist; }, 1.0 + lambda_);
}

double HomoclinicOrbit::l1_norm_derivative() const {
  return integrate_over_line(
      *this, [](const OrbitPoint& pt) { return std::abs(pt.qdot) + std::abs(pt.qddot); },
      lambda_ + lambda_ * lambda_);
}

HomoclinicOrbit compute_separatrix(const PendulumSpec& pendulum, double t_span, double tol) {
  const double lambda = pendulum.lambda();
  const double T = t_span > 0.0 ? t_span : std::max(20.0, 30.0 / lambda);
  if (T < 10.0 / lambda * (1.0 - 1e-12)) {
    throw InputError("t_span must be >= 10 / lambda = " + std::to_string(10.0 / lambda));
  }
  if (!(tol > 0.0)) throw InputError("separatrix tolerance must be positive");
  double curvature = 0.0;
  for (const auto& term : pendulum.fourier_coeffs()) {
    curvature += double(term.k) * term.k * (std::abs(term.cos_amp) + std::abs(term.sin_amp));
  }
  const double rate = std::max(1.0, std::sqrt(curvature));
  const std::size_t M = std::size_t(std::ceil(T * rate / 0.01));
  const double h = T / double(M);

  const int dir = pendulum.sign() * pendulum.branch();
  Vec u_fwd, du_fwd, u_bwd, du_bwd;
  integrate_half(pendulum, dir > 0 ? -1 : +1, h, M, u_fwd, du_fwd);
  integrate_half(pendulum, dir > 0 ? +1 : -1, h, M, u_bwd, du_bwd);

  HomoclinicOrbit orbit(pendulum, T, h, std::move(u_fwd), std::move(du_fwd), std::move(u_bwd),
                        std::move(du_bwd));
  const double energy = orbit.max_energy_error();
  if (!(energy <= tol)) {
    throw NumericalError("separatrix energy drift " + std::to_string(energy) +
                         " exceeds tolerance");
  }
  return orbit;
}

std::vector<HomoclinicOrbit> compute_separatrices(const SystemSpec& spec, double t_span,
                                                  double tol) {
  std::vector<HomoclinicOrbit> out;
  out.reserve(spec.n());
  for (const auto& p : spec.pendulums()) out.push_back(compute_separatrix(p, t_span, tol));
  return out;
}

std::pair<double, double> orbit_value(const HomoclinicOrbit& orbit, double t) {
  const OrbitPoint pt = orbit.at(t);
  return {pt.q, pt.p};
}

std::pair<double, double> orbit_derivative(const HomoclinicOrbit& orbit, double t) {
  const OrbitPoint pt = orbit.at(t);
  return {pt.qdot, orbit.sign() * pt.qddot};
}

void write_orbit_csv(std::ostream& os, const HomoclinicOrbit& orbit) {
  const auto old = os.precision(17);
  os << "t,q,p\n";
  for (const auto& s : orbit.samples()) os << s.t << ',' << s.q << ',' << s.p << '\n';
  os.precision(old);
}

}  // namespace drift
