#include "drift/reduced.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "drift/error.hpp"

namespace drift {

ReducedMap::ReducedMap(std::shared_ptr<const CriticalBranch> branch, double quad_tol)
    : branch_(std::move(branch)), quad_tol_(quad_tol) {
  if (!branch_ || !branch_->mel) throw InputError("ReducedMap: no branch");
}

std::optional<std::pair<double, Vec>> ReducedMap::gauge(std::span<const double> I,
                                                        std::span<const double> theta) const {
  const Box& box = branch_->box;
  const std::size_t d = box.d();
  if (I.size() != d || theta.size() != d) throw InputError("reduced map: dimension mismatch");
  for (std::size_t j = 0; j < d; ++j) {
    if (I[j] < box.I_lo[j] - 1e-12 || I[j] > box.I_hi[j] + 1e-12) return std::nullopt;
  }
  const Vec omega = branch_->mel->spec().rotor().frequency(I);
  const double s_mid = 0.5 * (box.s_lo + box.s_hi);
  std::vector<long> m0(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double c = 0.5 * (box.phi_lo[j] + box.phi_hi[j]);
    m0[j] = std::lround((c - theta[j] - omega[j] * s_mid) / kTwoPi);
  }
  // Wrap offsets 0, -1, +1 per component, the unshifted combination first.
  std::size_t combos = 1;
  for (std::size_t j = 0; j < d; ++j) combos *= 3;
  for (std::size_t c = 0; c < combos; ++c) {
    std::vector<long> m = m0;
    std::size_t rem = c;
    for (std::size_t j = 0; j < d; ++j) {
      const int off[3] = {0, -1, 1};
      m[j] += off[rem % 3];
      rem /= 3;
    }
    double lo = box.s_lo, hi = box.s_hi;
    for (std::size_t j = 0; j < d && lo <= hi; ++j) {
      const double a = box.phi_lo[j] - theta[j] - kTwoPi * double(m[j]);
      const double b = box.phi_hi[j] - theta[j] - kTwoPi * double(m[j]);
      if (std::abs(omega[j]) < 1e-14) {
        if (a > 1e-12 || b < -1e-12) hi = lo - 1.0;
        continue;
      }
      double x = a / omega[j], y = b / omega[j];
      if (x > y) std::swap(x, y);
      lo = std::max(lo, x);
      hi = std::min(hi, y);
    }
    if (lo > hi + 1e-12) continue;
    const double s = 0.5 * (lo + hi);
    Vec phi(d);
    for (std::size_t j = 0; j < d; ++j) {
      phi[j] = std::clamp(theta[j] + omega[j] * s + kTwoPi * double(m[j]), box.phi_lo[j],
                          box.phi_hi[j]);
    }
    return std::make_pair(s, phi);
  }
  return std::nullopt;
}

Vec ReducedMap::predictor(std::span<const double> I, const std::pair<double, Vec>& g) const {
  const std::size_t k = branch_->nearest(I, g.second, g.first);
  const BranchNode& node = branch_->nodes[k];
  if (!node.ok) throw DomainError("reduced map: nearest branch node failed continuation");
  Vec pred = node.point.tau_star;
  for (auto& v : pred) v -= g.first;
  return pred;
}

ReducedEval ReducedMap::eval(std::span<const double> I, std::span<const double> theta,
                             const Vec* hint) const {
  const auto g = gauge(I, theta);
  if (!g) throw DomainError("reduced map: point outside Dom(L*)");
  const Vec pred = predictor(I, *g);
  const Melnikov& mel = *branch_->mel;
  const CriticalityOptions& opt = branch_->opt;
  bool conv = false;
  const CriticalPoint cp =
      newton_critical_point(mel, hint ? *hint : pred, I, theta, 0.0, opt, conv);
  if (!conv) throw DomainError("reduced map: Newton for tau* did not converge");
  if (!(cp.nondegeneracy > opt.nondegen_tol)) throw DomainError("reduced map: tau* degenerate");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (std::abs(cp.tau_star[i] - pred[i]) > opt.jump_bound) {
      throw DomainError("reduced map: tau* left the continued branch");
    }
  }
  const MelnikovEval e =
      mel.eval(cp.tau_star, I, theta, 0.0, quad_tol_, kMelnikovGradient | kMelnikovActionGradient);
  ReducedEval r;
  r.value = e.value;
  r.grad_I = e.grad_I;
  r.grad_theta = e.grad_phi;
  r.tau_star = cp.tau_star;
  r.est_error = e.est_error;
  return r;
}

double ReducedMap::value_at_base(std::span<const double> I, std::span<const double> phi,
                                 double s) const {
  const std::size_t k = branch_->nearest(I, phi, s);
  const BranchNode& node = branch_->nodes[k];
  if (!node.ok) throw DomainError("reduced map: nearest branch node failed continuation");
  const CriticalPoint cp = branch_point(*branch_, I, phi, s, node.point.tau_star);
  return branch_->mel->eval(cp.tau_star, I, phi, s, quad_tol_, kMelnikovValue).value;
}

H3bReport h3b_check(const ReducedMap& map, std::span<const double> I0,
                    const std::vector<Vec>& theta_grid, double h3b_tol) {
  H3bReport rep;
  rep.tol = h3b_tol;
  rep.I0.assign(I0.begin(), I0.end());
  for (const Vec& theta : theta_grid) {
    ReducedEval r;
    try {
      r = map.eval(I0, theta);
    } catch (const DomainError&) {
      ++rep.outside;
      continue;
    }
    ++rep.evaluated;
    double g = 0.0;
    for (double v : r.grad_theta) g = std::max(g, std::abs(v));
    if (rep.evaluated == 1 || g > rep.max_grad_theta) {
      rep.max_grad_theta = g;
      rep.theta_at = theta;
      rep.grad_theta_at = r.grad_theta;
      rep.value_at = r.value;
    }
  }
  rep.pass = rep.evaluated > 0 && rep.max_grad_theta > h3b_tol;
  if (rep.evaluated == 0) {
    rep.message = "H3b: no theta in the grid lies in Dom(L*)";
  } else if (rep.pass) {
    rep.message = "H3b: dL*/dtheta = " + std::to_string(rep.max_grad_theta) + " at the witness";
  } else {
    rep.message = "H3b: max |dL*/dtheta| = " + std::to_string(rep.max_grad_theta) +
                  " does not exceed " + std::to_string(h3b_tol);
  }
  return rep;
}

ScatteringState scattering_step(const ReducedMap& map, const ScatteringState& state,
                                double epsilon, Vec* tau_hint) {
  if (!map.in_domain(state.I, state.theta)) {
    throw DomainError("scattering_step: state outside Dom(L*)");
  }
  if (epsilon == 0.0) return state;
  const ReducedEval r =
      map.eval(state.I, state.theta, tau_hint && !tau_hint->empty() ? tau_hint : nullptr);
  if (tau_hint) *tau_hint = r.tau_star;
  ScatteringState next = state;
  for (std::size_t j = 0; j < next.I.size(); ++j) {
    next.I[j] += epsilon * r.grad_theta[j];
    next.theta[j] -= epsilon * r.grad_I[j];
  }
  if (!map.in_domain(next.I, next.theta)) {
    throw DomainExit("scattering_step: image leaves Dom(L*)", {state, next});
  }
  return next;
}

void write_theta_scan_csv(std::ostream& os, const ReducedMap& map, std::span<const double> I,
                          const std::vector<Vec>& theta_grid) {
  const std::size_t d = map.d();
  const auto old = os.precision(17);
  for (std::size_t j = 0; j < d; ++j) os << 'I' << j + 1 << ',';
  for (std::size_t j = 0; j < d; ++j) os << "theta" << j + 1 << ',';
  os << "Lstar";
  for (std::size_t j = 0; j < d; ++j) os << ",grad_I" << j + 1;
  for (std::size_t j = 0; j < d; ++j) os << ",grad_theta" << j + 1;
  os << '\n';
  for (const Vec& theta : theta_grid) {
    ReducedEval r;
    try {
      r = map.eval(I, theta);
    } catch (const DomainError&) {
      continue;
    }
    for (double v : I) os << v << ',';
    for (double v : theta) os << v << ',';
    os << r.value;
    for (double v : r.grad_I) os << ',' << v;
    for (double v : r.grad_theta) os << ',' << v;
    os << '\n';
  }
  os.precision(old);
}

}  // namespace drift
