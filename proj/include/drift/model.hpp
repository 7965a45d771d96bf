#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace drift {

using Vec = std::vector<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// One harmonic of a pendulum potential: cos_amp*cos(k q) + sin_amp*sin(k q).
struct FourierTerm {
  int k = 0;
  double cos_amp = 0.0;
  double sin_amp = 0.0;
};

/// Pendulum sigma*(p^2/2 + V(q)) with V a finite Fourier series.
///
/// Construction enforces a non-degenerate unique maximum of V at q = 0:
/// V'(0) = 0, V''(0) < -1e-8, and V(q) <= V(0) - 1e-10 on a uniform grid
/// outside a radius-0.1 window around the maximum.
class PendulumSpec {
 public:
  PendulumSpec(std::vector<FourierTerm> fourier_coeffs, int sign, int branch = +1);

  const std::vector<FourierTerm>& fourier_coeffs() const { return terms_; }
  int sign() const { return sign_; }
  /// Sign of p along the chosen homoclinic loop.
  int branch() const { return branch_; }

  double potential(double q) const;
  double dpotential(double q) const;
  double d2potential(double q) const;

  /// V(0) - V(x), evaluated without cancellation for small |x|.
  double drop(double x) const;
  /// Derivative of drop(x) in x, i.e. -V'(x).
  double ddrop(double x) const { return -dpotential(x); }

  /// sqrt(-V''(0)).
  double lambda() const;

 private:
  std::vector<FourierTerm> terms_;
  int sign_;
  int branch_;
};

/// One monomial coef * prod_j I_j^exps[j] of the rotor polynomial.
struct Monomial {
  double coef = 0.0;
  std::vector<int> exps;
};

/// h(I) as a polynomial of total degree <= 4 in I in R^d.
class RotorSpec {
 public:
  RotorSpec(std::size_t dim, std::vector<Monomial> coefficients);

  std::size_t dim() const { return dim_; }
  const std::vector<Monomial>& coefficients() const { return terms_; }

  double value(std::span<const double> I) const;
  /// omega(I) = Dh(I).
  Vec frequency(std::span<const double> I) const;
  /// D^2 h(I), row-major d x d.
  Vec hessian(std::span<const double> I) const;

 private:
  std::size_t dim_;
  std::vector<Monomial> terms_;
};

/// a * cos(k.q + l.phi + m t + phase).
struct Mode {
  std::vector<int> k;
  std::vector<int> l;
  int m = 0;
  double amplitude = 0.0;
  double phase = 0.0;
};

/// H1(q, phi, t) as a finite sum of modes. Independent of (p, I).
class PerturbationSpec {
 public:
  PerturbationSpec() = default;
  explicit PerturbationSpec(std::vector<Mode> modes) : modes_(std::move(modes)) {}

  const std::vector<Mode>& modes() const { return modes_; }
  bool empty() const { return modes_.empty(); }
  /// Sum of |amplitude| over modes.
  double amplitude_sum() const;

 private:
  std::vector<Mode> modes_;
};

/// Value and first/second derivatives of H1 at a point.
struct PerturbationJet {
  double value = 0.0;
  Vec grad_q;  ///< n
  Vec hess_q;  ///< n x n row-major
  Vec grad_phi;  ///< d
  double d_t = 0.0;
};

/// H_eps = h(I) + sum_i sigma_i (p_i^2/2 + V_i(q_i)) + eps H1(q, phi, t).
class SystemSpec {
 public:
  SystemSpec(RotorSpec rotor, std::vector<PendulumSpec> pendulums,
             PerturbationSpec perturbation, double epsilon);

  const RotorSpec& rotor() const { return rotor_; }
  const std::vector<PendulumSpec>& pendulums() const { return pendulums_; }
  const PerturbationSpec& perturbation() const { return perturbation_; }
  double epsilon() const { return epsilon_; }

  std::size_t n() const { return pendulums_.size(); }
  std::size_t d() const { return rotor_.dim(); }

  SystemSpec with_perturbation(PerturbationSpec perturbation) const;
  SystemSpec with_epsilon(double epsilon) const;

 private:
  RotorSpec rotor_;
  std::vector<PendulumSpec> pendulums_;
  PerturbationSpec perturbation_;
  double epsilon_;
};

double eval_h0(const SystemSpec& spec, std::span<const double> p, std::span<const double> q,
               std::span<const double> I);

double eval_h1(const SystemSpec& spec, std::span<const double> q, std::span<const double> phi,
               double t);

/// Analytic derivatives of H1; the Hessian block is filled only on request.
PerturbationJet eval_h1_jet(const SystemSpec& spec, std::span<const double> q,
                            std::span<const double> phi, double t, bool with_hessian = true);

/// Returns (lambda_1, ..., lambda_n), lambda_i = sqrt(-V_i''(0)).
Vec characteristic_exponents(const SystemSpec& spec);

}  // namespace drift
