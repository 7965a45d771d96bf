#pragma once

#include <algorithm>
#include <iosfwd>
#include <utility>
#include <vector>

#include "drift/model.hpp"

namespace drift {

struct OrbitSample {
  double t, q, p;
};

/// Position on the separatrix with the derivatives the Melnikov integrands need.
struct OrbitPoint {
  double q = 0.0;
  double p = 0.0;
  double qdot = 0.0;   ///< sigma * p
  double qddot = 0.0;  ///< -V'(q)
  double dist = 0.0;   ///< |q - saddle| on the torus
};

/// Separatrix (p0(t), q0(t)) of one pendulum, homoclinic to the saddle at 0.
///
/// Each half t >= 0 and t <= 0 is stored as u(s) = log z(s), where z is the
/// distance of q to the saddle it approaches and s = |t|. u is nearly linear
/// in the tails (slope -lambda), which keeps the relative accuracy of q near
/// the saddle independent of how small z gets. Values between grid nodes come
/// from cubic Hermite interpolation of u; p is recomputed from the energy
/// relation, so the energy level is exact to rounding at every t.
class HomoclinicOrbit {
 public:
  HomoclinicOrbit(PendulumSpec pendulum, double t_span, double step, std::vector<double> u_fwd,
                  std::vector<double> du_fwd, std::vector<double> u_bwd,
                  std::vector<double> du_bwd);

  const PendulumSpec& pendulum() const { return pendulum_; }
  double lambda() const { return lambda_; }
  double t_span() const { return t_span_; }
  double step() const { return step_; }
  int branch() const { return pendulum_.branch(); }
  int sign() const { return pendulum_.sign(); }
  /// c with dist(q0(t), saddle) ~ c exp(-lambda |t|) for t -> +inf / -inf.
  double tail_coeff_forward() const { return tail_fwd_; }
  double tail_coeff_backward() const { return tail_bwd_; }
  double tail_coeff() const { return std::max(tail_fwd_, tail_bwd_); }

  /// q in [0, 2 pi].
  OrbitPoint at(double t) const;

  /// Grid samples on [-t_span, t_span].
  std::vector<OrbitSample> samples() const;

  /// max |p^2/2 + V(q) - V(0)| over the grid.
  double max_energy_error() const;
  /// Least-squares slope of log dist((p,q),0) against |t| on [t_span/2, t_span],
  /// one value per half (forward, backward).
  std::pair<double, double> fitted_decay_rates() const;
  /// Integral of |p0| + |q0 - saddle| over R (the L1 norm in the Melnikov bounds).
  double l1_norm() const;
  /// Integral of |qdot| + |pdot| over R.
  double l1_norm_derivative() const;

 private:
  struct Half {
    int side;  // the saddle is approached through V(side * z)
    double sat;  // q = sat + side * z
  };
  double u_at(const std::vector<double>& u, const std::vector<double>& du, double s,
              double& du_out) const;

  PendulumSpec pendulum_;
  double lambda_;
  double t_span_;
  double step_;
  std::vector<double> u_fwd_, du_fwd_, u_bwd_, du_bwd_;
  Half fwd_{}, bwd_{};
  double tail_fwd_ = 0.0;
  double tail_bwd_ = 0.0;
};

/// Integrates each half of the separatrix from q(0) = pi toward the saddle.
/// t_span <= 0 selects the default max(20, 30 / lambda).
/// Throws InputError if t_span < 10 / lambda, NumericalError if the energy
/// error exceeds tol or the integration fails.
HomoclinicOrbit compute_separatrix(const PendulumSpec& pendulum, double t_span = 0.0,
                                   double tol = 1e-10);

std::vector<HomoclinicOrbit> compute_separatrices(const SystemSpec& spec, double t_span = 0.0,
                                                  double tol = 1e-10);

/// (q, p) at time t.
std::pair<double, double> orbit_value(const HomoclinicOrbit& orbit, double t);
/// (qdot, pdot) at time t from the pendulum vector field.
std::pair<double, double> orbit_derivative(const HomoclinicOrbit& orbit, double t);

/// CSV with header t,q,p and 17 significant digits.
void write_orbit_csv(std::ostream& os, const HomoclinicOrbit& orbit);

}  // namespace drift
