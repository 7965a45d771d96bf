#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "drift/criticality.hpp"
#include "drift/error.hpp"

namespace drift {

struct ScatteringState {
  Vec I, theta;
};

/// Raised when an orbit of the scattering map or the effective flow leaves
/// the domain of L*; carries the states computed so far.
class DomainExit : public DomainError {
 public:
  DomainExit(const std::string& what, std::vector<ScatteringState> partial)
      : DomainError(what), partial_(std::move(partial)) {}
  const std::vector<ScatteringState>& partial() const { return partial_; }

 private:
  std::vector<ScatteringState> partial_;
};

struct ReducedEval {
  double value = 0.0;
  Vec grad_I, grad_theta;
  Vec tau_star;
  double est_error = 0.0;
};

/// Reduced Poincare function L*(I, theta) = L(tau*(I, theta, 0), I, theta, 0)
/// on the image of a critical branch under the gauge theta = phi - omega(I) s.
///
/// Its partials are the partials of L at tau* (the tau-derivative vanishes
/// there), so no derivative of tau* is ever formed.
class ReducedMap {
 public:
  explicit ReducedMap(std::shared_ptr<const CriticalBranch> branch, double quad_tol = 1e-12);

  const CriticalBranch& branch() const { return *branch_; }
  std::size_t d() const { return branch_->box.d(); }

  /// (s, phi) with phi = theta + omega(I) s + 2 pi m inside the box, if any.
  std::optional<std::pair<double, Vec>> gauge(std::span<const double> I,
                                              std::span<const double> theta) const;
  bool in_domain(std::span<const double> I, std::span<const double> theta) const {
    return gauge(I, theta).has_value();
  }

  /// Throws DomainError outside the domain or if the branch cannot be followed.
  /// `hint` is a warm start for tau*(I, theta, 0).
  ReducedEval eval(std::span<const double> I, std::span<const double> theta,
                   const Vec* hint = nullptr) const;

  /// L(tau*(I, phi, s), I, phi, s) directly at a base point of the box.
  double value_at_base(std::span<const double> I, std::span<const double> phi, double s) const;

 private:
  Vec predictor(std::span<const double> I, const std::pair<double, Vec>& g) const;

  std::shared_ptr<const CriticalBranch> branch_;
  double quad_tol_;
};

struct H3bReport {
  bool pass = false;
  double max_grad_theta = 0.0;  ///< max over the grid of ||grad_theta||_inf
  Vec I0;
  Vec theta_at;                 ///< maximizer
  Vec grad_theta_at;
  double value_at = 0.0;
  double tol = 0.0;
  std::size_t evaluated = 0;
  std::size_t outside = 0;
  std::string message;
};

H3bReport h3b_check(const ReducedMap& map, std::span<const double> I0,
                    const std::vector<Vec>& theta_grid, double h3b_tol = 1e-4);

/// (I + eps dL*/dtheta, theta - eps dL*/dI). Throws DomainError if `state` is
/// outside the domain, DomainExit (partial = {state, stepped}) if the image is.
/// `tau_hint`, if given, warm-starts tau* and receives the one used.
ScatteringState scattering_step(const ReducedMap& map, const ScatteringState& state,
                                double epsilon, Vec* tau_hint = nullptr);

/// theta-scan CSV: I..., theta..., Lstar, grad_I..., grad_theta...
void write_theta_scan_csv(std::ostream& os, const ReducedMap& map, std::span<const double> I,
                          const std::vector<Vec>& theta_grid);

}  // namespace drift
