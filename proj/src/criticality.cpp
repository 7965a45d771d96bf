#include "drift/criticality.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>

#include <Eigen/Dense>

#include "drift/error.hpp"
#include "drift/parallel.hpp"

namespace drift {

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix as_matrix(const Vec& h, std::size_t n) {
  return Eigen::Map<const Matrix>(h.data(), Eigen::Index(n), Eigen::Index(n));
}

double norm1(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

double norm2(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void fill_certificate(CriticalPoint& cp, const MelnikovEval& e, std::size_t n) {
  cp.value = e.value;
  cp.grad_norm = norm1(e.grad_tau);
  cp.hess = e.hess_tau;
  const Matrix H = as_matrix(e.hess_tau, n);
  cp.hess_det = H.determinant();
  cp.nondegeneracy = nondegeneracy(e.hess_tau, n);
  const Matrix sym = 0.5 * (H + H.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  cp.hess_eigs.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
}

// Newton direction -H^{-1} g, with eigenvalues floored away from zero so a
// near-singular Hessian gives a bounded step instead of a blow-up.
Vec newton_direction(const Vec& hess, const Vec& grad, std::size_t n) {
  const Matrix H = as_matrix(hess, n);
  const Matrix sym = 0.5 * (H + H.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const double scale = std::max(1e-300, es.eigenvalues().cwiseAbs().maxCoeff());
  Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(grad.data(), Eigen::Index(n));
  Eigen::VectorXd coeff = es.eigenvectors().transpose() * g;
  for (Eigen::Index i = 0; i < coeff.size(); ++i) {
    double lam = es.eigenvalues()(i);
    const double floor = 1e-8 * scale;
    if (std::abs(lam) < floor) lam = lam < 0 ? -floor : floor;
    coeff(i) /= lam;
  }
  const Eigen::VectorXd step = -(es.eigenvectors() * coeff);
  return Vec(step.data(), step.data() + n);
}

}  // namespace

double nondegeneracy(const Vec& hess, std::size_t n) {
  const Matrix H = as_matrix(hess, n);
  double scale = 1.0;
  for (Eigen::Index r = 0; r < H.rows(); ++r) scale *= std::max(1.0, H.row(r).norm());
  return std::abs(H.determinant()) / scale;
}

CriticalPoint newton_critical_point(const Melnikov& mel, std::span<const double> seed,
                                    std::span<const double> I, std::span<const double> phi,
                                    double s, const CriticalityOptions& opt, bool& converged) {
  const std::size_t n = mel.n();
  const unsigned parts = kMelnikovGradient | kMelnikovHessian;
  CriticalPoint cp;
  cp.I.assign(I.begin(), I.end());
  cp.phi.assign(phi.begin(), phi.end());
  cp.s = s;
  cp.tau_star.assign(seed.begin(), seed.end());
  converged = false;
  MelnikovEval e = mel.eval(cp.tau_star, I, phi, s, opt.quad_tol, parts);
  const Vec periods = tau_periods(mel, I);
  double max_step = 0.0;
  for (double p : periods) max_step = std::max(max_step, 0.25 * p);

  for (int it = 0; it <= opt.max_iter; ++it) {
    cp.iterations = it;
    if (norm1(e.grad_tau) < opt.newton_tol) {
      converged = true;
      break;
    }
    if (it == opt.max_iter) break;
    Vec step = newton_direction(e.hess_tau, e.grad_tau, n);
    double big = 0.0;
    for (double v : step) big = std::max(big, std::abs(v));
    if (big > max_step) {
      for (auto& v : step) v *= max_step / big;
    }
    const double g0 = norm2(e.grad_tau);
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      Vec trial = cp.tau_star;
      for (std::size_t i = 0; i < n; ++i) trial[i] += alpha * step[i];
      MelnikovEval et = mel.eval(trial, I, phi, s, opt.quad_tol, parts);
      if (norm2(et.grad_tau) <= (1.0 - 1e-4 * alpha) * g0) {
        cp.tau_star = std::move(trial);
        e = std::move(et);
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
  }
  fill_certificate(cp, e, n);
  return cp;
}

Vec tau_periods(const Melnikov& mel, std::span<const double> I) {
  const std::size_t n = mel.n(), d = mel.d();
  const Vec omega = mel.spec().rotor().frequency(I);
  Vec out(n, kTwoPi);
  for (std::size_t i = 0; i < n; ++i) {
    double nu_min = 0.0;
    for (const auto& m : mel.spec().perturbation().modes()) {
      if (m.k[i] == 0 || m.amplitude == 0.0) continue;
      double nu = m.m;
      for (std::size_t j = 0; j < d; ++j) nu += m.l[j] * omega[j];
      nu = std::abs(nu);
      if (nu > 1e-12 && (nu_min == 0.0 || nu < nu_min)) nu_min = nu;
    }
    if (nu_min > 0.0) out[i] = kTwoPi / std::max(0.25, nu_min);
  }
  return out;
}

CriticalSearch find_critical_points(const Melnikov& mel, std::span<const double> I,
                                    std::span<const double> phi, double s,
                                    const CriticalityOptions& opt) {
  const std::size_t n = mel.n();
  if (opt.seeds_per_dim < 1) throw InputError("seeds_per_dim must be >= 1");
  const Vec periods = tau_periods(mel, I);
  const std::size_t per = std::size_t(opt.seeds_per_dim);
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= per;

  std::vector<CriticalPoint> found(total);
  std::vector<char> ok(total, 0);
  parallel_for(total, opt.workers, [&](std::size_t idx) {
    Vec seed(n);
    std::size_t rem = idx;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = rem % per;
      rem /= per;
      seed[i] = periods[i] * (-0.5 + (double(j) + 0.5) / double(per));
    }
    bool conv = false;
    found[idx] = newton_critical_point(mel, seed, I, phi, s, opt, conv);
    ok[idx] = conv;
  });

  CriticalSearch res;
  auto is_dup = [&](const CriticalPoint& cp) {
    for (const auto* list : {&res.nondegenerate, &res.degenerate}) {
      for (const auto& other : *list) {
        double dist = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          dist = std::max(dist, std::abs(other.tau_star[i] - cp.tau_star[i]));
        }
        if (dist < opt.dedupe_dist) return true;
      }
    }
    return false;
  };
  for (std::size_t idx = 0; idx < total; ++idx) {
    if (!ok[idx] || is_dup(found[idx])) continue;
    if (found[idx].nondegeneracy > opt.nondegen_tol) {
      res.nondegenerate.push_back(found[idx]);
    } else {
      res.degenerate.push_back(found[idx]);
    }
  }
  std::sort(res.nondegenerate.begin(), res.nondegenerate.end(),
            [](const CriticalPoint& a, const CriticalPoint& b) {
              return norm2(a.tau_star) < norm2(b.tau_star);
            });
  // Ties in |det| (to 1e-8) keep the closer-to-origin order from above.
  std::stable_sort(res.nondegenerate.begin(), res.nondegenerate.end(),
                   [](const CriticalPoint& a, const CriticalPoint& b) {
                     return std::round(std::abs(a.hess_det) * 1e8) >
                            std::round(std::abs(b.hess_det) * 1e8);
                   });
  return res;
}

Box Box::around(std::span<const double> I, std::span<const double> phi, double s, double half_I,
                double half_angle) {
  Box b;
  for (double v : I) {
    b.I_lo.push_back(v - half_I);
    b.I_hi.push_back(v + half_I);
  }
  for (double v : phi) {
    b.phi_lo.push_back(v - half_angle);
    b.phi_hi.push_back(v + half_angle);
  }
  b.s_lo = s - half_angle;
  b.s_hi = s + half_angle;
  return b;
}

bool Box::contains(std::span<const double> I, std::span<const double> phi, double s) const {
  const double slack = 1e-12;
  for (std::size_t j = 0; j < d(); ++j) {
    if (I[j] < I_lo[j] - slack || I[j] > I_hi[j] + slack) return false;
    if (phi[j] < phi_lo[j] - slack || phi[j] > phi_hi[j] + slack) return false;
  }
  return s >= s_lo - slack && s <= s_hi + slack;
}

namespace {

struct Axis {
  double lo, hi;
};

std::vector<Axis> axes_of(const Box& box) {
  std::vector<Axis> ax;
  for (std::size_t j = 0; j < box.d(); ++j) ax.push_back({box.I_lo[j], box.I_hi[j]});
  for (std::size_t j = 0; j < box.d(); ++j) ax.push_back({box.phi_lo[j], box.phi_hi[j]});
  ax.push_back({box.s_lo, box.s_hi});
  return ax;
}

double axis_value(const Axis& a, int j, int steps) {
  if (steps == 1) return 0.5 * (a.lo + a.hi);
  return a.lo + (a.hi - a.lo) * double(j) / double(steps - 1);
}

std::vector<int> unflatten(std::size_t index, std::size_t axes, int steps) {
  std::vector<int> idx(axes);
  for (std::size_t a = 0; a < axes; ++a) {
    idx[a] = int(index % std::size_t(steps));
    index /= std::size_t(steps);
  }
  return idx;
}

std::size_t flatten(const std::vector<int>& idx, int steps) {
  std::size_t out = 0;
  for (std::size_t a = idx.size(); a-- > 0;) out = out * std::size_t(steps) + std::size_t(idx[a]);
  return out;
}

void split_params(const Vec& params, std::size_t d, Vec& I, Vec& phi, double& s) {
  I.assign(params.begin(), params.begin() + long(d));
  phi.assign(params.begin() + long(d), params.begin() + long(2 * d));
  s = params[2 * d];
}

}  // namespace

Vec CriticalBranch::node_params(std::size_t index) const {
  const auto ax = axes_of(box);
  const auto idx = unflatten(index, ax.size(), steps);
  Vec out(ax.size());
  for (std::size_t a = 0; a < ax.size(); ++a) out[a] = axis_value(ax[a], idx[a], steps);
  return out;
}

std::size_t CriticalBranch::nearest(std::span<const double> I, std::span<const double> phi,
                                    double s) const {
  const auto ax = axes_of(box);
  Vec p(I.begin(), I.end());
  p.insert(p.end(), phi.begin(), phi.end());
  p.push_back(s);
  std::vector<int> idx(ax.size());
  for (std::size_t a = 0; a < ax.size(); ++a) {
    if (steps == 1 || ax[a].hi == ax[a].lo) {
      idx[a] = 0;
      continue;
    }
    const double x = (p[a] - ax[a].lo) / (ax[a].hi - ax[a].lo) * double(steps - 1);
    idx[a] = std::clamp(int(std::lround(x)), 0, steps - 1);
  }
  return flatten(idx, steps);
}

CriticalBranch continue_branch(std::shared_ptr<const Melnikov> mel, const CriticalPoint& start,
                               const Box& box, int grid_steps, const CriticalityOptions& opt) {
  if (!mel) throw InputError("continue_branch: no Melnikov evaluator");
  if (grid_steps < 1) throw InputError("continue_branch: grid_steps must be >= 1");
  if (!(start.nondegeneracy > opt.nondegen_tol)) {
    throw InputError("continue_branch: start point is degenerate");
  }
  if (box.d() != mel->d() || !box.contains(start.I, start.phi, start.s)) {
    throw InputError("continue_branch: start base point lies outside the box");
  }
  const std::size_t d = mel->d();
  CriticalBranch br;
  br.mel = mel;
  br.opt = opt;
  br.box = box;
  br.steps = grid_steps;
  const std::size_t axes = br.axes();
  std::size_t total = 1;
  for (std::size_t a = 0; a < axes; ++a) total *= std::size_t(grid_steps);
  br.nodes.resize(total);
  for (std::size_t k = 0; k < total; ++k) {
    split_params(br.node_params(k), d, br.nodes[k].I, br.nodes[k].phi, br.nodes[k].s);
    br.nodes[k].failure = "not reached by continuation";
  }

  // Corrector at node k from predictor; marks the node.
  auto solve = [&](std::size_t k, const Vec& predictor) {
    BranchNode& node = br.nodes[k];
    bool conv = false;
    node.point = newton_critical_point(*mel, predictor, node.I, node.phi, node.s, opt, conv);
    double jump = 0.0;
    for (std::size_t i = 0; i < predictor.size(); ++i) {
      jump = std::max(jump, std::abs(node.point.tau_star[i] - predictor[i]));
    }
    node.ok = false;
    if (!conv) {
      node.failure = "Newton did not converge";
    } else if (!(node.point.nondegeneracy > opt.nondegen_tol)) {
      node.failure = "Hessian degenerate";
    } else if (jump > opt.jump_bound) {
      node.failure = "branch jump " + std::to_string(jump);
    } else {
      node.ok = true;
      node.failure.clear();
    }
  };

  // Breadth-first sweep; each layer is corrected in parallel from its parents.
  const std::size_t root = br.nearest(start.I, start.phi, start.s);
  Vec root_pred = start.tau_star;
  for (auto& v : root_pred) v += br.nodes[root].s - start.s;
  solve(root, root_pred);
  std::vector<long> parent(total, -2);
  parent[root] = -1;
  std::vector<std::size_t> layer;
  if (br.nodes[root].ok) layer.push_back(root);
  while (!layer.empty()) {
    std::vector<std::size_t> next;
    std::vector<Vec> preds;
    for (std::size_t u : layer) {
      const auto iu = unflatten(u, axes, grid_steps);
      for (std::size_t a = 0; a < axes; ++a) {
        for (int dir : {-1, 1}) {
          auto iv = iu;
          iv[a] += dir;
          if (iv[a] < 0 || iv[a] >= grid_steps) continue;
          const std::size_t v = flatten(iv, grid_steps);
          if (parent[v] != -2) continue;
          parent[v] = long(u);
          Vec pred = br.nodes[u].point.tau_star;
          // Secant predictor when u was itself reached along the same direction.
          if (parent[u] >= 0) {
            const auto ip = unflatten(std::size_t(parent[u]), axes, grid_steps);
            if (ip[a] == iu[a] - dir) {
              const Vec& prev = br.nodes[std::size_t(parent[u])].point.tau_star;
              for (std::size_t i = 0; i < pred.size(); ++i) pred[i] += pred[i] - prev[i];
            }
          }
          next.push_back(v);
          preds.push_back(std::move(pred));
        }
      }
    }
    parallel_for(next.size(), opt.workers, [&](std::size_t j) { solve(next[j], preds[j]); });
    layer.clear();
    for (std::size_t v : next) {
      if (br.nodes[v].ok) layer.push_back(v);
    }
  }
  br.continuation_ok = std::all_of(br.nodes.begin(), br.nodes.end(),
                                   [](const BranchNode& nd) { return nd.ok; });
  return br;
}

CriticalPoint branch_point(const CriticalBranch& branch, std::span<const double> I,
                           std::span<const double> phi, double s, const Vec& predictor) {
  bool conv = false;
  CriticalPoint cp = newton_critical_point(*branch.mel, predictor, I, phi, s, branch.opt, conv);
  if (!conv) throw DomainError("critical point lost: Newton did not converge");
  if (!(cp.nondegeneracy > branch.opt.nondegen_tol)) {
    throw DomainError("critical point lost: Hessian degenerate");
  }
  for (std::size_t i = 0; i < predictor.size(); ++i) {
    if (std::abs(cp.tau_star[i] - predictor[i]) > branch.opt.jump_bound) {
      throw DomainError("critical point lost: Newton jumped to another branch");
    }
  }
  return cp;
}

H3aReport h3a_report(const CriticalBranch& branch) {
  return h3a_report(branch, branch.opt.nondegen_tol);
}

H3aReport h3a_report(const CriticalBranch& branch, double nondegen_tol) {
  H3aReport rep;
  rep.nodes = branch.nodes.size();
  bool first = true;
  for (const auto& node : branch.nodes) {
    if (!node.ok) {
      ++rep.failed_nodes;
      continue;
    }
    const double det = std::abs(node.point.hess_det);
    rep.min_abs_det = first ? det : std::min(rep.min_abs_det, det);
    rep.min_nondegeneracy =
        first ? node.point.nondegeneracy : std::min(rep.min_nondegeneracy, node.point.nondegeneracy);
    rep.max_grad_norm = std::max(rep.max_grad_norm, node.point.grad_norm);
    first = false;
  }
  rep.pass = rep.nodes > 0 && rep.failed_nodes == 0 && branch.continuation_ok &&
             rep.min_nondegeneracy > nondegen_tol &&
             rep.max_grad_norm < branch.opt.newton_tol;
  if (rep.nodes == 0 || first) {
    rep.message = "H3a: no nondegenerate critical points on the branch";
  } else if (rep.failed_nodes > 0) {
    rep.message = "H3a: continuation failed at " + std::to_string(rep.failed_nodes) + " of " +
                  std::to_string(rep.nodes) + " nodes";
  } else if (!rep.pass) {
    rep.message = "H3a: nondegeneracy " + std::to_string(rep.min_nondegeneracy) +
                  " does not exceed threshold " + std::to_string(nondegen_tol);
  } else {
    rep.message = "H3a: nondegenerate branch over " + std::to_string(rep.nodes) + " nodes";
  }
  return rep;
}

void write_branch_csv(std::ostream& os, const CriticalBranch& branch) {
  const std::size_t d = branch.box.d();
  const std::size_t n = branch.mel->n();
  const auto old = os.precision(17);
  for (std::size_t j = 0; j < d; ++j) os << 'I' << j + 1 << ',';
  for (std::size_t j = 0; j < d; ++j) os << "phi" << j + 1 << ',';
  os << 's';
  for (std::size_t i = 0; i < n; ++i) os << ",tau" << i + 1;
  os << ",det_hess,ok\n";
  for (const auto& node : branch.nodes) {
    for (double v : node.I) os << v << ',';
    for (double v : node.phi) os << v << ',';
    os << node.s;
    for (std::size_t i = 0; i < n; ++i) {
      os << ',' << (i < node.point.tau_star.size() ? node.point.tau_star[i] : 0.0);
    }
    os << ',' << node.point.hess_det << ',' << (node.ok ? 1 : 0) << '\n';
  }
  os.precision(old);
}

}  // namespace drift
