#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "drift/reduced.hpp"

namespace drift {

struct EffectiveSample {
  double t = 0.0;
  Vec I, theta;
  double value = 0.0;  ///< L*(I, theta)
};

/// Integral curve of (I', theta') = (dL*/dtheta, -dL*/dI).
struct EffectiveCurve {
  std::vector<EffectiveSample> samples;
  int steps = 0;
  int rejected = 0;
  double max_drift = 0.0;  ///< max |L*(t) - L*(0)| over the samples
  bool complete = true;    ///< false if the curve left Dom(L*) before t_end
  std::string exit_message;
};

/// Adaptive Dormand-Prince 5(4) with absolute and relative local tolerance
/// `tol`. Samples are the accepted steps, or `sample_times` (ascending, within
/// [0, t_end]) from the dense output when given. Throws InputError if x0 is
/// outside the domain.
EffectiveCurve integrate_effective(const ReducedMap& map, const ScatteringState& x0, double t_end,
                                   double tol = 1e-10,
                                   const std::vector<double>* sample_times = nullptr);

struct PseudoOrbit {
  std::vector<ScatteringState> states;  ///< x_0 .. x_N
  bool complete = true;
  std::string exit_message;
};

/// x_{i+1} = scattering_step(x_i), N = min(n_steps, floor(1/eps)) steps.
PseudoOrbit pseudo_orbit(const ReducedMap& map, const ScatteringState& x0, double epsilon,
                         int n_steps);

struct ShadowReport {
  std::vector<double> epsilons;
  std::vector<double> max_dev;  ///< max_i ||x_i - gamma(i eps)||_2
  std::vector<int> steps;
  double fitted_K = 0.0;        ///< max_dev ~ K eps with the slope fixed at 1
  double slope = 0.0;           ///< free log-log slope
  double r2 = 0.0;              ///< of the free log-log fit
  bool degenerate = false;      ///< deviations at roundoff level, fit meaningless
  double curve_drift = 0.0;
};

/// Compares pseudo-orbits for each eps against one effective curve on
/// [0, t_end]. Throws InputError with fewer than two usable eps, DomainError
/// if an orbit leaves the domain.
ShadowReport shadow_scaling(const ReducedMap& map, const ScatteringState& x0,
                            const std::vector<double>& epsilons, double t_end = 1.0,
                            double tol = 1e-10, int workers = 0);

/// Curve CSV: t, I..., theta..., Lstar.
void write_curve_csv(std::ostream& os, const EffectiveCurve& curve);

}  // namespace drift
