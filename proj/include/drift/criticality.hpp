#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "drift/melnikov.hpp"

namespace drift {

struct CriticalityOptions {
  double newton_tol = 1e-10;    ///< on ||grad_tau||_1
  double nondegen_tol = 1e-6;   ///< on nondegeneracy() of the Hessian
  int seeds_per_dim = 8;
  int max_iter = 50;
  double quad_tol = 1e-12;
  double dedupe_dist = 1e-6;
  double jump_bound = 0.5;      ///< max |tau*_node - predictor|_inf during continuation
  int workers = 0;              ///< threads for seed and grid sweeps, 0 = hardware
};

/// |det H| / prod_i max(1, ||row_i||_2): the determinant measured against the
/// Hessian's own scale once rows exceed unit size, absolute below that.
double nondegeneracy(const Vec& hess, std::size_t n);

struct CriticalPoint {
  Vec tau_star;
  double grad_norm = 0.0;  ///< ||grad_tau||_1
  double hess_det = 0.0;
  double nondegeneracy = 0.0;
  Vec hess;       ///< n x n row-major
  Vec hess_eigs;  ///< ascending
  double value = 0.0;
  int iterations = 0;
  // base point
  Vec I, phi;
  double s = 0.0;
};

struct CriticalSearch {
  std::vector<CriticalPoint> nondegenerate;  ///< ordered: largest |det| first, then closest to 0
  std::vector<CriticalPoint> degenerate;
};

/// Damped Newton on grad_tau from `seed`. Sets `converged`; the returned point
/// carries the last iterate either way.
CriticalPoint newton_critical_point(const Melnikov& mel, std::span<const double> seed,
                                    std::span<const double> I, std::span<const double> phi,
                                    double s, const CriticalityOptions& opt, bool& converged);

/// Newton from a uniform seed grid over one period of tau per pendulum.
CriticalSearch find_critical_points(const Melnikov& mel, std::span<const double> I,
                                    std::span<const double> phi, double s,
                                    const CriticalityOptions& opt = {});

/// Per-pendulum seed window length: 2 pi / (smallest positive tau-frequency),
/// the frequency clamped below by 0.25.
Vec tau_periods(const Melnikov& mel, std::span<const double> I);

/// U^- = I-box x phi-box x s-interval.
struct Box {
  Vec I_lo, I_hi, phi_lo, phi_hi;
  double s_lo = 0.0, s_hi = 0.0;

  static Box around(std::span<const double> I, std::span<const double> phi, double s,
                    double half_I = 0.2, double half_angle = 0.5);
  bool contains(std::span<const double> I, std::span<const double> phi, double s) const;
  std::size_t d() const { return I_lo.size(); }
};

struct BranchNode {
  Vec I, phi;
  double s = 0.0;
  CriticalPoint point;
  bool ok = false;
  std::string failure;
};

/// Critical points continued over a grid on the box. Axes are ordered
/// I_1..I_d, phi_1..phi_d, s; each has `steps` nodes (1 collapses the axis to
/// its midpoint).
struct CriticalBranch {
  std::shared_ptr<const Melnikov> mel;
  CriticalityOptions opt;
  Box box;
  int steps = 0;
  std::vector<BranchNode> nodes;
  bool continuation_ok = false;

  std::size_t axes() const { return 2 * box.d() + 1; }
  /// Coordinates of node `index` in parameter space (I..., phi..., s).
  Vec node_params(std::size_t index) const;
  /// Index of the node nearest to (I, phi, s) in box-normalized distance.
  std::size_t nearest(std::span<const double> I, std::span<const double> phi, double s) const;
};

/// Predictor-corrector continuation from `start` across the grid. Throws
/// InputError if `start` is degenerate or its base point lies outside `box`.
CriticalBranch continue_branch(std::shared_ptr<const Melnikov> mel, const CriticalPoint& start,
                               const Box& box, int grid_steps, const CriticalityOptions& opt = {});

/// Critical point on the branch at an arbitrary base point, Newton-corrected
/// from the nearest node (shifted along the diagonal when s differs). Throws
/// DomainError if Newton fails or jumps away from the predictor.
CriticalPoint branch_point(const CriticalBranch& branch, std::span<const double> I,
                           std::span<const double> phi, double s, const Vec& predictor);

struct H3aReport {
  bool pass = false;
  double min_abs_det = 0.0;
  double min_nondegeneracy = 0.0;
  double max_grad_norm = 0.0;
  std::size_t nodes = 0;
  std::size_t failed_nodes = 0;
  std::string message;
};

H3aReport h3a_report(const CriticalBranch& branch);
/// Same with a different threshold on the nondegeneracy measure.
H3aReport h3a_report(const CriticalBranch& branch, double nondegen_tol);

/// Branch CSV: I..., phi..., s, tau*..., det_hess.
void write_branch_csv(std::ostream& os, const CriticalBranch& branch);

}  // namespace drift
