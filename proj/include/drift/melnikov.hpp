#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "drift/homoclinic.hpp"
#include "drift/kernels.hpp"
#include "drift/model.hpp"

namespace drift {

/// Value and partials of the Melnikov potential L(tau, I, phi, s).
struct MelnikovEval {
  double value = 0.0;
  Vec grad_tau;  ///< n
  Vec grad_I;    ///< d
  Vec grad_phi;  ///< d
  double d_s = 0.0;
  Vec hess_tau;  ///< n x n row-major
  double est_error = 0.0;  ///< quadrature error estimate + analytic tail bound
  int evaluations = 0;
};

/// Which blocks of MelnikovEval to compute. The value is always computed.
enum MelnikovParts : unsigned {
  kMelnikovValue = 0,
  kMelnikovGradient = 1,  ///< grad_tau, grad_phi, d_s
  kMelnikovHessian = 2,   ///< hess_tau
  kMelnikovActionGradient = 4,  ///< grad_I
  kMelnikovAll = 7,
};

/// Evaluator of
///   L(tau, I, phi, s) = -int [H1(q0(tau + t), phi + omega(I) t, s + t)
///                             - H1(0, phi + omega(I) t, s + t)] dt
/// by adaptive Gauss-Kronrod quadrature over a finite window plus an analytic
/// bound on the exponentially small remainder.
///
/// Holds only immutable data; eval() may be called concurrently.
class Melnikov {
 public:
  Melnikov(const SystemSpec& spec, std::vector<HomoclinicOrbit> orbits);

  const SystemSpec& spec() const { return *spec_; }
  const std::vector<HomoclinicOrbit>& orbits() const { return orbits_; }
  std::size_t n() const { return spec_->n(); }
  std::size_t d() const { return spec_->d(); }

  /// Throws AccuracyError if est_error cannot be brought below tol.
  MelnikovEval eval(std::span<const double> tau, std::span<const double> I,
                    std::span<const double> phi, double s, double tol,
                    unsigned parts = kMelnikovAll) const;

  /// Explicit constant M with |L| <= M for all (tau, I, phi, s):
  /// sum_i (sum over modes |a| |k_i|) * ||q0_i - saddle||_L1.
  double uniform_bound() const;
  /// Same with |k_i| |q0dot_i| in place of the distance: bounds |dL/dtau_i|.
  double uniform_gradient_bound() const;

  /// True if no mode couples to a pendulum angle (L is then identically zero).
  bool trivially_zero() const { return coupled_.count == 0; }

 private:
  std::shared_ptr<const SystemSpec> spec_;
  std::vector<HomoclinicOrbit> orbits_;
  kernels::ModeTable coupled_;  // modes with k != 0; the others cancel exactly
  Vec coupling_;  // per pendulum: sum over modes |a| |k_i| (1 + |l|_1 + |m|)
  double freq_scale_ = 1.0;
};

/// Convenience wrapper building the evaluator on the fly.
MelnikovEval melnikov(const SystemSpec& spec, const std::vector<HomoclinicOrbit>& orbits,
                      std::span<const double> tau, std::span<const double> I,
                      std::span<const double> phi, double s, double tol);

/// Fourier integrals of t -> g(q0(t)) - g(0) for g(q) = sum c cos(kq) + s sin(kq):
///   cos_part = int (g - g0) cos(nu t) dt, sin_part = int (g - g0) sin(nu t) dt,
/// and the first moments (t-weighted) when requested.
struct OrbitTransform {
  double cos_part = 0.0;
  double sin_part = 0.0;
  double cos_moment = 0.0;
  double sin_moment = 0.0;
  double error = 0.0;
};
OrbitTransform orbit_transform(const HomoclinicOrbit& orbit, const std::vector<FourierTerm>& g,
                               double nu, double tol, bool moments = false);

/// L for a single mode coupling one pendulum, assembled from orbit_transform
/// of cos(kq), sin(kq) as a cos(linear phase). Independent of the quadrature
/// in Melnikov::eval and used as its oracle. Throws InputError when the mode
/// couples more than one pendulum.
MelnikovEval melnikov_closed_form(const SystemSpec& spec, const Mode& mode,
                                  const std::vector<HomoclinicOrbit>& orbits,
                                  std::span<const double> tau, std::span<const double> I,
                                  std::span<const double> phi, double s, double tol);

/// |L(tau + sigma 1, I, phi, s) - L(tau, I, phi - omega(I) sigma, s - sigma)|.
double check_shift_identity(const Melnikov& mel, std::span<const double> tau,
                            std::span<const double> I, std::span<const double> phi, double s,
                            double sigma, double tol);

struct ScanPoint {
  Vec tau, I, phi;
  double s = 0.0;
};

/// Grid-scan CSV: tau..., I..., phi..., s, L, grad_tau_norm, det_hess, est_error.
void write_scan_csv(std::ostream& os, const Melnikov& mel, const std::vector<ScanPoint>& points,
                    double tol);

}  // namespace drift
