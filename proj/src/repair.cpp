#include "drift/repair.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "drift/error.hpp"
#include "drift/parallel.hpp"

namespace drift {

namespace {

double wrap_angle(double x) {
  x = std::fmod(x, kTwoPi);
  return x < 0.0 ? x + kTwoPi : x;
}

double amplitude_sum(const std::vector<Mode>& modes) {
  double s = 0.0;
  for (const Mode& m : modes) s += std::abs(m.amplitude);
  return s;
}

SystemSpec with_added(const SystemSpec& spec, const std::vector<Mode>& extra) {
  std::vector<Mode> modes = spec.perturbation().modes();
  modes.insert(modes.end(), extra.begin(), extra.end());
  return spec.with_perturbation(PerturbationSpec(std::move(modes)));
}

double inf_norm(const Vec& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

/// First basis function with a transform of magnitude above basis_tol at
/// frequency nu; returns its (cos, sin) transform pair.
std::pair<std::vector<FourierTerm>, OrbitTransform> pick_basis(const HomoclinicOrbit& orbit,
                                                               double nu,
                                                               const RepairOptions& opt) {
  const std::size_t count = basis_size(opt.max_harmonic);
  for (std::size_t j = 0; j < count; ++j) {
    std::vector<FourierTerm> f = basis_function(j);
    const OrbitTransform tr = orbit_transform(orbit, f, nu, opt.quad_tol);
    if (std::hypot(tr.cos_part, tr.sin_part) > opt.basis_tol) return {f, tr};
  }
  throw RepairError("no basis function up to harmonic " + std::to_string(opt.max_harmonic) +
                    " has a nonzero transform at frequency " + std::to_string(nu));
}

Vec hessian_at(const Melnikov& mel, const Vec& tau, const RepairTarget& t, double tol) {
  return mel.eval(tau, t.I, t.phi, t.s, tol, kMelnikovGradient | kMelnikovHessian).hess_tau;
}

double det_shifted(const Vec& hess, const Vec& lambda, double delta) {
  const Eigen::Index n = Eigen::Index(lambda.size());
  Eigen::MatrixXd M(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) M(i, j) = hess[std::size_t(i * n + j)];
    M(i, i) += delta * lambda[std::size_t(i)];
  }
  return M.determinant();
}

}  // namespace

std::pair<double, double> fourier_transform_coeffs(const HomoclinicOrbit& orbit,
                                                   const std::vector<FourierTerm>& f, double a,
                                                   double tol) {
  const OrbitTransform tr = orbit_transform(orbit, f, a, tol);
  return {-tr.cos_part, -tr.sin_part};
}

std::vector<FourierTerm> basis_function(std::size_t index) {
  const int k = int(index / 2) + 1;
  if (index % 2 == 0) return {{k, 1.0, 0.0}};
  return {{k, 0.0, 1.0}};
}

std::size_t basis_size(int max_harmonic) { return 2 * std::size_t(std::max(max_harmonic, 0)); }

std::vector<Mode> product_modes(const FourierTerm& f, std::size_t pendulum, std::size_t n,
                                std::vector<int> l, int m, double phase, double scale) {
  std::vector<Mode> out;
  if (f.k == 0) {
    if (f.cos_amp != 0.0) out.push_back({std::vector<int>(n, 0), l, m, scale * f.cos_amp, phase});
    return out;
  }
  std::vector<int> k(n, 0);
  k[pendulum] = f.k;
  std::vector<int> nl = l;
  for (int& v : nl) v = -v;
  // cos(kq) cos(psi) = (cos(kq + psi) + cos(kq - psi)) / 2, sin likewise with a
  // quarter-period phase lag.
  auto add = [&](double amp, double lag) {
    if (amp == 0.0) return;
    out.push_back({k, l, m, 0.5 * scale * amp, phase - lag});
    out.push_back({k, nl, -m, 0.5 * scale * amp, -phase - lag});
  };
  add(f.cos_amp, 0.0);
  add(f.sin_amp, kPi / 2);
  return out;
}

Stage1Data repair_h3a_stage1(const SystemSpec& spec, const std::vector<HomoclinicOrbit>& orbits,
                             const RepairTarget& target, double budget,
                             const RepairOptions& opt) {
  if (!(budget > 0.0) || !std::isfinite(budget)) throw InputError("repair budget must be > 0");
  const std::size_t n = spec.n(), d = spec.d();
  const Melnikov mel(spec, orbits);

  Stage1Data st;
  st.f.resize(n);
  st.A1.resize(n);
  st.A2.resize(n);
  st.alpha.resize(n);
  st.b.resize(n);
  Vec R(n);
  std::vector<Mode> unit;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [f, tr] = pick_basis(orbits[i], 1.0, opt);
    st.f[i] = f;
    st.A1[i] = -tr.cos_part;
    st.A2[i] = -tr.sin_part;
    st.alpha[i] = std::atan2(st.A2[i], st.A1[i]);
    R[i] = std::hypot(st.A1[i], st.A2[i]);
    const auto u = product_modes(f[0], i, n, std::vector<int>(d, 0), 1, 0.0, 1.0);
    unit.insert(unit.end(), u.begin(), u.end());
  }
  st.delta2 = 0.9 * budget / amplitude_sum(unit);

  // tau* minimizing ||dL/dtau|| on a grid over the search window, then Newton.
  st.tau_star.assign(n, 0.0);
  Vec grad(n, 0.0);
  if (!mel.trivially_zero()) {
    const Vec periods = tau_periods(mel, target.I);
    std::size_t per = std::max<std::size_t>(
        3, std::size_t(std::floor(std::pow(2048.0, 1.0 / double(n)))));
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= per;
    std::vector<double> norms(total);
    parallel_for(total, opt.crit.workers, [&](std::size_t idx) {
      Vec tau(n);
      std::size_t rem = idx;
      for (std::size_t i = 0; i < n; ++i) {
        const double w = opt.tau_window * periods[i];
        tau[i] = -w + 2.0 * w * double(rem % per) / double(per - 1);
        rem /= per;
      }
      norms[idx] = inf_norm(
          mel.eval(tau, target.I, target.phi, target.s, opt.quad_tol, kMelnikovGradient).grad_tau);
    });
    const std::size_t best = std::size_t(std::min_element(norms.begin(), norms.end()) - norms.begin());
    std::size_t rem = best;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = opt.tau_window * periods[i];
      st.tau_star[i] = -w + 2.0 * w * double(rem % per) / double(per - 1);
      rem /= per;
    }
    bool conv = false;
    const CriticalPoint cp =
        newton_critical_point(mel, st.tau_star, target.I, target.phi, target.s, opt.crit, conv);
    if (conv) st.tau_star = cp.tau_star;
    grad = mel.eval(st.tau_star, target.I, target.phi, target.s, opt.quad_tol, kMelnikovGradient)
               .grad_tau;
  }
  st.grad_before = inf_norm(grad);
  const double reach = st.delta2 * *std::min_element(R.begin(), R.end());
  if (!(st.grad_before < reach)) {
    throw RepairError("stage 1: smallest ||dL/dtau|| in the search window is " +
                          std::to_string(st.grad_before) + ", not below " + std::to_string(reach),
                      st.grad_before);
  }

  for (std::size_t i = 0; i < n; ++i) {
    // dL/dtau_i + delta2 R_i sin(s - tau_i + b_i + alpha_i) = 0 on the branch
    // where the cosine is positive.
    const double u = -std::asin(grad[i] / (st.delta2 * R[i]));
    st.b[i] = wrap_angle(u - target.s + st.tau_star[i] - st.alpha[i]);
    const auto m = product_modes(st.f[i][0], i, n, std::vector<int>(d, 0), 1, st.b[i], st.delta2);
    st.modes.insert(st.modes.end(), m.begin(), m.end());
  }
  const Melnikov after(with_added(spec, st.modes), orbits);
  st.grad_after = inf_norm(
      after.eval(st.tau_star, target.I, target.phi, target.s, opt.quad_tol, kMelnikovGradient)
          .grad_tau);
  return st;
}

Stage2Data repair_h3a_stage2(const SystemSpec& spec, const std::vector<HomoclinicOrbit>& orbits,
                             const RepairTarget& target, const Vec& tau_star, double budget,
                             const RepairOptions& opt) {
  if (!(budget > 0.0) || !std::isfinite(budget)) throw InputError("repair budget must be > 0");
  const std::size_t n = spec.n(), d = spec.d();
  if (tau_star.size() != n) throw InputError("stage 2: tau* has the wrong dimension");
  const Melnikov mel(spec, orbits);

  Stage2Data st;
  st.tau_star = tau_star;
  st.g.resize(n);
  st.B1.resize(n);
  st.B2.resize(n);
  st.beta.resize(n);
  st.c.resize(n);
  st.lambda.resize(n);
  st.cos_identity.resize(n);
  std::vector<Mode> unit;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [g, tr] = pick_basis(orbits[i], 1.0, opt);
    st.g[i] = g;
    st.B1[i] = -tr.cos_part;
    st.B2[i] = -tr.sin_part;
    st.beta[i] = std::atan2(st.B2[i], st.B1[i]);
    st.c[i] = wrap_angle(-target.s + tau_star[i] - st.beta[i]);
    st.cos_identity[i] = std::cos(target.s - tau_star[i] + st.c[i] + st.beta[i]);
    st.lambda[i] = -std::hypot(st.B1[i], st.B2[i]);
    const auto u = product_modes(g[0], i, n, std::vector<int>(d, 0), 1, st.c[i], 1.0);
    unit.insert(unit.end(), u.begin(), u.end());
  }
  st.prod_lambda = 1.0;
  for (double l : st.lambda) st.prod_lambda *= l;

  st.hess_before = hessian_at(mel, tau_star, target, opt.quad_tol);

  // Coefficients of v(delta) = det(H + delta diag(lambda)) from its values at
  // delta = 0..n.
  {
    const Eigen::Index m = Eigen::Index(n + 1);
    Eigen::MatrixXd V(m, m);
    Eigen::VectorXd y(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      double p = 1.0;
      for (Eigen::Index k = 0; k < m; ++k) {
        V(j, k) = p;
        p *= double(j);
      }
      y(j) = det_shifted(st.hess_before, st.lambda, double(j));
    }
    const Eigen::VectorXd c = V.colPivHouseholderQr().solve(y);
    st.v_coeffs.assign(c.data(), c.data() + m);
  }

  const double top = budget / amplitude_sum(unit);
  for (int k = 0; k < opt.delta_scan; ++k) {
    const double delta = top * std::ldexp(1.0, -k);
    Vec shifted = st.hess_before;
    for (std::size_t i = 0; i < n; ++i) shifted[i * n + i] += delta * st.lambda[i];
    if (nondegeneracy(shifted, n) > opt.crit.nondegen_tol) {
      st.delta3 = delta;
      st.v = det_shifted(st.hess_before, st.lambda, delta);
      break;
    }
  }
  if (st.delta3 == 0.0) {
    throw RepairError("stage 2: v(delta3) stays below the nondegeneracy threshold over the scan");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto m = product_modes(st.g[i][0], i, n, std::vector<int>(d, 0), 1, st.c[i], st.delta3);
    st.modes.insert(st.modes.end(), m.begin(), m.end());
  }
  const Melnikov after(with_added(spec, st.modes), orbits);
  st.hess_after = hessian_at(after, tau_star, target, opt.quad_tol);
  return st;
}

H3bStageData repair_h3b(const SystemSpec& spec, const std::vector<HomoclinicOrbit>& orbits,
                        const CriticalBranch& branch, std::span<const double> I_hat,
                        std::span<const double> theta_hat, double budget,
                        const RepairOptions& opt) {
  if (!(budget > 0.0) || !std::isfinite(budget)) throw InputError("repair budget must be > 0");
  const std::size_t n = spec.n(), d = spec.d();
  const ReducedMap map(std::shared_ptr<const CriticalBranch>(&branch, [](const CriticalBranch*) {}),
                       opt.quad_tol);
  const ReducedEval r = map.eval(I_hat, theta_hat);
  const double tau1 = r.tau_star[0];
  const Vec omega = spec.rotor().frequency(I_hat);

  H3bStageData st;
  st.grad_theta_before = r.grad_theta;
  st.F = pick_basis(orbits[0], omega[0], opt).first;
  st.A.resize(d);
  st.B.resize(d);
  st.C.resize(d);
  st.alpha.resize(d);
  st.c.resize(d);
  std::vector<Mode> unit;
  for (std::size_t i = 0; i < d; ++i) {
    const OrbitTransform tr = orbit_transform(orbits[0], st.F, omega[i], opt.quad_tol);
    const double cw = std::cos(omega[i] * tau1), sw = std::sin(omega[i] * tau1);
    st.A[i] = -(tr.cos_part * cw + tr.sin_part * sw);
    st.B[i] = -(tr.sin_part * cw - tr.cos_part * sw);
    st.C[i] = std::hypot(st.A[i], st.B[i]);
    st.alpha[i] = std::atan2(st.B[i], st.A[i]);
    st.c[i] = wrap_angle(-theta_hat[i] - st.alpha[i] + (i == 0 ? kPi / 2 : 0.0));
    std::vector<int> l(d, 0);
    l[i] = 1;
    const auto u = product_modes(st.F[0], 0, n, l, 0, st.c[i], 1.0);
    unit.insert(unit.end(), u.begin(), u.end());
  }

  const double top = budget / amplitude_sum(unit);
  for (int k = 0; k < opt.delta_scan; ++k) {
    const double delta = top * std::ldexp(1.0, -k);
    std::vector<Mode> modes = unit;
    for (Mode& m : modes) m.amplitude *= delta;
    const Melnikov mel(with_added(spec, modes), orbits);
    bool conv = false;
    const CriticalPoint cp =
        newton_critical_point(mel, r.tau_star, I_hat, theta_hat, 0.0, opt.crit, conv);
    if (!conv || !(cp.nondegeneracy > opt.crit.nondegen_tol)) continue;
    bool near = true;
    for (std::size_t i = 0; i < n; ++i) {
      near = near && std::abs(cp.tau_star[i] - r.tau_star[i]) <= opt.crit.jump_bound;
    }
    if (!near) continue;
    const Vec g =
        mel.eval(cp.tau_star, I_hat, theta_hat, 0.0, opt.quad_tol, kMelnikovGradient).grad_phi;
    const double gn = inf_norm(g);
    if (gn >= 0.5 * delta * st.C[0] && gn > opt.h3b_tol) {
      st.delta = delta;
      st.grad_theta_after = g;
      st.tau_star = cp.tau_star;
      st.modes = std::move(modes);
      return st;
    }
  }
  throw RepairError("H3b repair: no delta in the scan gives |dL*/dtheta| >= delta C1 / 2");
}

Verdicts verify_at(const SystemSpec& spec, const std::vector<HomoclinicOrbit>& orbits,
                   const RepairTarget& target, const RepairOptions& opt,
                   std::shared_ptr<const CriticalBranch>* branch_out) {
  if (branch_out) branch_out->reset();
  auto mel = std::make_shared<const Melnikov>(spec, orbits);
  const CriticalSearch search = find_critical_points(*mel, target.I, target.phi, target.s, opt.crit);
  Verdicts v;
  v.h3b.tol = opt.h3b_tol;
  v.h3b.I0 = target.I;
  if (search.nondegenerate.empty()) {
    v.h3a.message = "H3a: no nondegenerate critical point of tau -> L at the target";
    v.h3b.message = "H3b: L* undefined without an H3a branch";
    return v;
  }
  auto branch = std::make_shared<const CriticalBranch>(
      continue_branch(mel, search.nondegenerate.front(),
                      Box::around(target.I, target.phi, target.s), opt.grid_steps, opt.crit));
  v.h3a = h3a_report(*branch);
  const Vec omega = spec.rotor().frequency(target.I);
  Vec theta(target.phi.size());
  for (std::size_t j = 0; j < theta.size(); ++j) theta[j] = target.phi[j] - omega[j] * target.s;
  v.h3b = h3b_check(ReducedMap(branch, opt.quad_tol), target.I, {theta}, opt.h3b_tol);
  if (branch_out) *branch_out = branch;
  return v;
}

RepairCertificate repair(const SystemSpec& spec, const RepairTarget& target, double budget,
                         const RepairOptions& opt) {
  if (!(budget > 0.0) || !std::isfinite(budget)) throw InputError("repair budget must be > 0");
  if (target.I.size() != spec.d() || target.phi.size() != spec.d()) {
    throw InputError("repair target has the wrong dimension");
  }
  const auto orbits = compute_separatrices(spec);
  RepairCertificate cert;
  cert.budget = budget;
  cert.target = target;
  const Vec omega = spec.rotor().frequency(target.I);
  cert.theta_hat.resize(spec.d());
  for (std::size_t j = 0; j < spec.d(); ++j) {
    cert.theta_hat[j] = target.phi[j] - omega[j] * target.s;
  }

  cert.before = verify_at(spec, orbits, target, opt);
  SystemSpec current = spec;
  if (cert.before.h3a.pass && cert.before.h3b.pass) {
    cert.noop = true;
    cert.after = cert.before;
    cert.repaired = current;
    return cert;
  }

  const double stage_budget = budget / 4.0;
  if (!cert.before.h3a.pass) {
    const Melnikov mel(current, orbits);
    CriticalSearch search = find_critical_points(mel, target.I, target.phi, target.s, opt.crit);
    if (search.nondegenerate.empty()) {
      Vec tau_star;
      bool degenerate = true;
      if (search.degenerate.empty()) {
        cert.stage1 = repair_h3a_stage1(current, orbits, target, stage_budget, opt);
        current = with_added(current, cert.stage1->modes);
        tau_star = cert.stage1->tau_star;
        const Melnikov m1(current, orbits);
        degenerate =
            !(nondegeneracy(hessian_at(m1, tau_star, target, opt.quad_tol), spec.n()) >
              opt.crit.nondegen_tol);
      } else {
        auto closest = std::min_element(
            search.degenerate.begin(), search.degenerate.end(),
            [](const CriticalPoint& a, const CriticalPoint& b) {
              return inf_norm(a.tau_star) < inf_norm(b.tau_star);
            });
        tau_star = closest->tau_star;
      }
      if (degenerate) {
        cert.stage2 = repair_h3a_stage2(current, orbits, target, tau_star, stage_budget, opt);
        current = with_added(current, cert.stage2->modes);
      }
    }
  }

  std::shared_ptr<const CriticalBranch> branch;
  cert.after = verify_at(current, orbits, target, opt, &branch);
  if (branch && cert.after.h3a.pass && !cert.after.h3b.pass) {
    cert.h3b_stage = repair_h3b(current, orbits, *branch, target.I, cert.theta_hat,
                                budget / 2.0, opt);
    current = with_added(current, cert.h3b_stage->modes);
    cert.after = verify_at(current, orbits, target, opt);
  }

  for (const auto* modes : {cert.stage1 ? &cert.stage1->modes : nullptr,
                            cert.stage2 ? &cert.stage2->modes : nullptr,
                            cert.h3b_stage ? &cert.h3b_stage->modes : nullptr}) {
    if (modes) cert.added_amplitude += amplitude_sum(*modes);
  }
  cert.repaired = current;
  return cert;
}

}  // namespace drift
