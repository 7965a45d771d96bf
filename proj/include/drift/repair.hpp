#pragma once

#include <optional>
#include <string>
#include <vector>

#include "drift/reduced.hpp"

namespace drift {

/// A perturbation could not be constructed (search failed, basis exhausted).
class RepairError : public NumericalError {
 public:
  RepairError(const std::string& what, double best = 0.0) : NumericalError(what), best_(best) {}
  double best() const { return best_; }

 private:
  double best_;
};

/// (A1, A2) = -int (f(q0(t)) - f(0)) (cos a t, sin a t) dt.
std::pair<double, double> fourier_transform_coeffs(const HomoclinicOrbit& orbit,
                                                   const std::vector<FourierTerm>& f, double a,
                                                   double tol = 1e-12);

/// Candidate single-angle functions in trial order: cos q, sin q, cos 2q,
/// sin 2q, ... up to the given harmonic.
std::vector<FourierTerm> basis_function(std::size_t index);
std::size_t basis_size(int max_harmonic = 8);

/// f(q_i) * cos(l.phi + m t + phase) expanded into modes.
std::vector<Mode> product_modes(const FourierTerm& f, std::size_t pendulum, std::size_t n,
                                std::vector<int> l, int m, double phase, double scale);

struct RepairTarget {
  Vec I, phi;
  double s = 0.0;
};

struct RepairOptions {
  CriticalityOptions crit;
  double h3b_tol = 1e-4;
  double basis_tol = 1e-6;   ///< smallest acceptable transform magnitude
  int max_harmonic = 8;
  int delta_scan = 20;       ///< halvings tried for delta_3 and the H3b delta
  double tau_window = 8.0;   ///< Step-1 search box, in tau-periods
  int grid_steps = 5;        ///< branch grid for post-verification
  double quad_tol = 1e-12;
};

struct Stage1Data {
  std::vector<std::vector<FourierTerm>> f;  ///< per pendulum
  Vec A1, A2, alpha, b;
  double delta2 = 0.0;
  Vec tau_star;
  double grad_before = 0.0;  ///< ||dL/dtau(tau*)|| before the addition
  double grad_after = 0.0;   ///< same for L^delta2
  std::vector<Mode> modes;   ///< delta2 H2
};

struct Stage2Data {
  std::vector<std::vector<FourierTerm>> g;
  Vec B1, B2, beta, c, lambda;
  Vec cos_identity;          ///< cos(s0 - tau*_i + c_i + beta_i)
  double delta3 = 0.0;
  double v = 0.0;            ///< det of the repaired Hessian at tau*
  Vec v_coeffs;              ///< v(delta3) = sum_k v_coeffs[k] delta3^k
  double prod_lambda = 0.0;
  Vec hess_before, hess_after;
  Vec tau_star;
  std::vector<Mode> modes;   ///< delta3 H3
};

struct H3bStageData {
  std::vector<FourierTerm> F;
  Vec A, B, C, alpha, c;
  double delta = 0.0;
  Vec grad_theta_before, grad_theta_after;
  Vec tau_star;
  std::vector<Mode> modes;   ///< delta H2
};

struct Verdicts {
  H3aReport h3a;
  H3bReport h3b;
};

struct RepairCertificate {
  bool noop = false;
  double budget = 0.0;
  RepairTarget target;
  Vec theta_hat;
  std::optional<Stage1Data> stage1;
  std::optional<Stage2Data> stage2;
  std::optional<H3bStageData> h3b_stage;
  double added_amplitude = 0.0;  ///< sum of |amplitude| over all added modes
  Verdicts before, after;
  std::optional<SystemSpec> repaired;
};

/// Step 1: adds delta2 sum_i f_i(q_i) cos(t + b_i) so that tau* becomes a
/// critical point of L^delta2 at the target. Uses at most `budget` of
/// added amplitude. Throws RepairError if no tau with small enough gradient
/// is found in the search window.
Stage1Data repair_h3a_stage1(const SystemSpec& spec, const std::vector<HomoclinicOrbit>& orbits,
                             const RepairTarget& target, double budget,
                             const RepairOptions& opt = {});

/// Step 2: adds delta3 sum_i g_i(q_i) cos(t + c_i) so that the critical point
/// tau* becomes nondegenerate. `spec` must already contain the Step-1 modes.
Stage2Data repair_h3a_stage2(const SystemSpec& spec, const std::vector<HomoclinicOrbit>& orbits,
                             const RepairTarget& target, const Vec& tau_star, double budget,
                             const RepairOptions& opt = {});

/// Adds delta F(q_1) sum_i cos(phi_i + c_i) making dL*/dtheta(I_hat, theta_hat)
/// nonzero. `branch` is the H3a branch of `spec`.
H3bStageData repair_h3b(const SystemSpec& spec, const std::vector<HomoclinicOrbit>& orbits,
                        const CriticalBranch& branch, std::span<const double> I_hat,
                        std::span<const double> theta_hat, double budget,
                        const RepairOptions& opt = {});

/// Verifies the model at the target and repairs what fails. Half the budget
/// goes to H3a (split between its two steps), half to H3b.
RepairCertificate repair(const SystemSpec& spec, const RepairTarget& target, double budget,
                         const RepairOptions& opt = {});

/// H3a on a branch around the target and H3b at theta_hat = phi - omega(I) s.
/// Returns nullptr in `branch_out` when no nondegenerate critical point exists.
Verdicts verify_at(const SystemSpec& spec, const std::vector<HomoclinicOrbit>& orbits,
                   const RepairTarget& target, const RepairOptions& opt,
                   std::shared_ptr<const CriticalBranch>* branch_out = nullptr);

}  // namespace drift
