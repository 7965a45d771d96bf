#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "drift/criticality.hpp"
#include "drift/error.hpp"

namespace drift {

/// Point of the extended phase space. `A` is the momentum conjugate to t
/// (A' = -eps dH1/dt), so A + H_eps is conserved. `J` integrates the action
/// velocity the perturbation induces on the unperturbed cylinder p = q = 0,
/// J' = -eps dH1/dphi(0, phi, t); I - J is then nearly constant near it.
struct FullState {
  Vec p, q, I, phi;
  double t = 0.0;
  double A = 0.0;
  Vec J;
};

enum class Integrator { Rkf78, Yoshida4 };

struct IntegrationOptions {
  double tol = 1e-10;             ///< absolute local error tolerance (Rkf78)
  double step = 1e-2;             ///< fixed step (Yoshida4)
  Integrator method = Integrator::Rkf78;
  int stride = 1;                 ///< keep every stride-th accepted step
  double blowup = 1e6;            ///< |p|, |I| above this abort the run
  /// Called after each accepted step; returning true stops the integration.
  std::function<bool(const FullState&)> stop;
};

struct TrajectoryRecord {
  std::vector<FullState> samples;
  std::vector<FullState> section;  ///< states at t = 2 pi k
  double action_drift = 0.0;       ///< sup_t ||I(t) - I(0)||_2
  double max_action_change = 0.0; ///< sup_t max_j |I_j(t) - I_j(0)|
  Vec pendulum_energy_drift;       ///< per pendulum, sup |E_i(t) - E_i(0)|
  double energy_drift = 0.0;       ///< sup |A + H_eps - (A + H_eps)(0)|
  int steps = 0;
  bool complete = true;
  bool stopped = false;            ///< ended by the stop predicate
  std::string exit_message;
};

/// Fills A and J with zeros when they are unset.
FullState make_state(const SystemSpec& spec, Vec p, Vec q, Vec I, Vec phi, double t = 0.0);

/// Integrates Hamilton's equations of H_eps from `initial` to time t_end
/// (which may lie before initial.t).
TrajectoryRecord integrate_full(const SystemSpec& spec, const FullState& initial, double t_end,
                                const IntegrationOptions& opt = {});

/// sigma_i (p_i^2/2 + V_i(q_i)).
double pendulum_energy(const SystemSpec& spec, std::size_t i, double p, double q);
/// A + H_eps(p, q, I, phi, t).
double extended_energy(const SystemSpec& spec, const FullState& x);

/// A trajectory failed to return near p = q = 0 within the time cap.
class ExcursionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

enum class JumpSeeding {
  Manifold,   ///< bisection onto W^s and W^u, secant in tau to join them (n = 1)
  Heuristic,  ///< from eta away from the saddle on the unperturbed loop, one pass
};

struct JumpOptions {
  JumpSeeding seeding = JumpSeeding::Manifold;
  double eta = 0.0;          ///< Heuristic start distance; 0 means 10 eps
  double tol = 1e-12;        ///< integrator tolerance
  double return_radius = 0.05;
  double depart_radius = 0.5;
  double time_cap = 0.0;     ///< per half-excursion; 0 means 50 / min lambda
};

struct JumpResult {
  Vec delta_I;         ///< (I - J)(after) - (I - J)(before)
  Vec delta_I_raw;     ///< I(after) - I(before)
  Vec predicted;       ///< eps dL*/dtheta(I0, theta0)
  Vec tau;             ///< seed phase used
  double eta = 0.0;    ///< p-offset (Manifold) or start distance (Heuristic)
  double t_before = 0.0, t_after = 0.0;
  double dist_before = 0.0, dist_after = 0.0;  ///< ||(p, q - saddle)|| at the read-out
  int integrations = 0;
};

/// Follows one homoclinic excursion of H_eps through the section point
/// (q0(tau*), p0(tau*), I0, theta0) at t = 0, tau* = tau*(I0, theta0, 0)
/// on `branch`, and returns the action jump between its two passages near
/// p = q = 0.
JumpResult measure_homoclinic_jump(const SystemSpec& spec, double epsilon,
                                   const CriticalBranch& branch, std::span<const double> I0,
                                   std::span<const double> theta0, const JumpOptions& opt = {});

/// Trajectory CSV: t, p..., q..., I..., phi...
void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec);

}  // namespace drift
