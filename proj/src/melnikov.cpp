#include "drift/melnikov.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include <Eigen/Dense>

#include "drift/error.hpp"
#include "drift/quadrature.hpp"

namespace drift {

namespace {

// Half-length of the window around the orbit's time origin beyond which the
// tail term coupling * c * exp(-lambda W) / lambda drops below `budget`.
double window_for(const HomoclinicOrbit& orbit, double coupling, double budget) {
  const double lam = orbit.lambda();
  const double need = std::log(std::max(1.0, coupling * orbit.tail_coeff() / (lam * budget))) / lam;
  return std::clamp(need, orbit.t_span(), 700.0 / lam);
}

std::string accuracy_message(const char* what, double err, double tol) {
  return std::string(what) + ": error estimate " + std::to_string(err) +
         " exceeds tolerance " + std::to_string(tol);
}

}  // namespace

Melnikov::Melnikov(const SystemSpec& spec, std::vector<HomoclinicOrbit> orbits)
    : spec_(std::make_shared<const SystemSpec>(spec)), orbits_(std::move(orbits)) {
  if (orbits_.size() != spec.n()) throw InputError("one separatrix per pendulum is required");
  std::vector<Mode> coupled;
  for (const auto& m : spec.perturbation().modes()) {
    if (std::any_of(m.k.begin(), m.k.end(), [](int k) { return k != 0; }) && m.amplitude != 0.0) {
      coupled.push_back(m);
    }
  }
  coupled_ = kernels::ModeTable::from(PerturbationSpec(coupled), spec.n(), spec.d());
  coupling_.assign(spec.n(), 0.0);
  for (const auto& m : coupled) {
    double lm = std::abs(m.m);
    for (int l : m.l) lm += std::abs(l);
    for (std::size_t i = 0; i < spec.n(); ++i) {
      coupling_[i] += std::abs(m.amplitude) * std::abs(m.k[i]) * (1.0 + lm);
    }
  }
  for (const auto& o : orbits_) freq_scale_ = std::max(freq_scale_, o.lambda());
}

double Melnikov::uniform_bound() const {
  double total = 0.0;
  for (std::size_t i = 0; i < n(); ++i) {
    double k_sum = 0.0;
    for (std::size_t m = 0; m < coupled_.count; ++m) {
      k_sum += std::abs(coupled_.amp[m] * coupled_.k[m * n() + i]);
    }
    if (k_sum > 0.0) total += k_sum * orbits_[i].l1_norm();
  }
  return total;
}

double Melnikov::uniform_gradient_bound() const {
  double total = 0.0;
  for (std::size_t i = 0; i < n(); ++i) {
    double k_sum = 0.0;
    for (std::size_t m = 0; m < coupled_.count; ++m) {
      k_sum += std::abs(coupled_.amp[m] * coupled_.k[m * n() + i]);
    }
    total = std::max(total, k_sum * orbits_[i].l1_norm_derivative());
  }
  return total;
}

MelnikovEval Melnikov::eval(std::span<const double> tau, std::span<const double> I,
                            std::span<const double> phi, double s, double tol,
                            unsigned parts) const {
  const std::size_t n = this->n();
  const std::size_t d = this->d();
  if (tau.size() != n || I.size() != d || phi.size() != d) {
    throw InputError("melnikov: dimension mismatch");
  }
  if (!(tol > 0.0)) throw InputError("melnikov: tol must be positive");
  const bool want_grad = parts & kMelnikovGradient;
  const bool want_hess = parts & kMelnikovHessian;
  const bool want_action = parts & kMelnikovActionGradient;

  MelnikovEval res;
  res.grad_tau.assign(n, 0.0);
  res.grad_I.assign(d, 0.0);
  res.grad_phi.assign(d, 0.0);
  res.hess_tau.assign(n * n, 0.0);
  if (coupled_.count == 0) return res;

  const Vec omega = spec_->rotor().frequency(I);
  double freq = freq_scale_;
  for (std::size_t m = 0; m < coupled_.count; ++m) {
    double nu = coupled_.m[m];
    for (std::size_t j = 0; j < d; ++j) nu += coupled_.l[m * d + j] * omega[j];
    freq = std::max(freq, std::abs(nu));
  }

  // Window: pendulum i is in its analytic tail for |tau_i + t| > W_i.
  double lam_max = 0.0;
  for (const auto& o : orbits_) lam_max = std::max(lam_max, o.lambda());
  const double tail_budget = tol / 8.0;
  double a = 0.0, b = 0.0;
  bool first = true;
  Vec weight(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (coupling_[i] == 0.0) continue;
    const double lam = orbits_[i].lambda();
    weight[i] = coupling_[i] * (1.0 + lam) * (1.0 + lam) * (1.0 + kPi * lam_max);
    double W = window_for(orbits_[i], weight[i] * 2.0, tail_budget / double(n));
    if (want_action) W *= 1.2;
    const double lo = -tau[i] - W;
    const double hi = -tau[i] + W;
    a = first ? lo : std::min(a, lo);
    b = first ? hi : std::max(b, hi);
    first = false;
  }
  double tail = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (weight[i] == 0.0) continue;
    const double lam = orbits_[i].lambda();
    double right = orbits_[i].tail_coeff_forward() * std::exp(-lam * (tau[i] + b)) / lam;
    double left = orbits_[i].tail_coeff_backward() * std::exp(-lam * (-tau[i] - a)) / lam;
    if (want_action) {
      right *= 1.0 + std::abs(b) + 1.0 / lam;
      left *= 1.0 + std::abs(a) + 1.0 / lam;
    }
    tail += weight[i] * (right + left);
  }

  // Component layout.
  const std::size_t c_grad = 1;
  const std::size_t c_phi = c_grad + n;
  const std::size_t c_s = c_phi + d;
  const std::size_t c_hess = want_grad ? c_s + 1 : 1;
  const std::size_t c_act = want_hess ? c_hess + n * n : c_hess;
  const std::size_t dim = want_action ? c_act + d : c_act;

  const kernels::Isa isa = kernels::active();
  auto integrand = [&](std::span<const double> nodes, std::span<double> out) {
    const std::size_t N = nodes.size();
    Vec q(n * N), zero(n * N, 0.0), qdot(n * N), qddot(n * N), ph(d * N), tt(N);
    for (std::size_t j = 0; j < N; ++j) {
      const double t = nodes[j];
      for (std::size_t i = 0; i < n; ++i) {
        const OrbitPoint pt = orbits_[i].at(tau[i] + t);
        q[i * N + j] = pt.q;
        qdot[i * N + j] = pt.qdot;
        qddot[i * N + j] = pt.qddot;
      }
      for (std::size_t k = 0; k < d; ++k) ph[k * N + j] = phi[k] + omega[k] * t;
      tt[j] = s + t;
    }
    kernels::JetBatch on, off;
    on.resize(n, d, N, want_hess);
    off.resize(n, d, N, false);
    kernels::evaluate_jets(coupled_, {N, q, ph, tt}, on, want_hess, isa);
    kernels::evaluate_jets(coupled_, {N, zero, ph, tt}, off, false, isa);
    for (std::size_t j = 0; j < N; ++j) {
      out[j] = -(on.value[j] - off.value[j]);
      if (want_grad) {
        for (std::size_t i = 0; i < n; ++i) {
          out[(c_grad + i) * N + j] = -on.grad_q[i * N + j] * qdot[i * N + j];
        }
        for (std::size_t k = 0; k < d; ++k) {
          out[(c_phi + k) * N + j] = -(on.grad_phi[k * N + j] - off.grad_phi[k * N + j]);
        }
        out[c_s * N + j] = -(on.d_t[j] - off.d_t[j]);
      }
      if (want_hess) {
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t c = 0; c < n; ++c) {
            double v = on.hess_q[(r * n + c) * N + j] * qdot[r * N + j] * qdot[c * N + j];
            if (r == c) v += on.grad_q[r * N + j] * qddot[r * N + j];
            out[(c_hess + r * n + c) * N + j] = -v;
          }
        }
      }
      if (want_action) {
        const double t = nodes[j];
        for (std::size_t k = 0; k < d; ++k) {
          out[(c_act + k) * N + j] = -t * (on.grad_phi[k * N + j] - off.grad_phi[k * N + j]);
        }
      }
    }
  };

  quad::Options opt;
  opt.abs_tol = std::max(tol - tail, 0.5 * tol);
  const double width = 1.0 / std::max(freq, lam_max);
  opt.initial_panels = std::max(8, int(std::ceil((b - a) / width)));
  opt.max_panels = std::max(4000, 16 * opt.initial_panels);
  const quad::Result r = quad::gauss_kronrod(integrand, dim, a, b, opt);

  res.value = r.value[0];
  if (want_grad) {
    for (std::size_t i = 0; i < n; ++i) res.grad_tau[i] = r.value[c_grad + i];
    for (std::size_t k = 0; k < d; ++k) res.grad_phi[k] = r.value[c_phi + k];
    res.d_s = r.value[c_s];
  }
  if (want_hess) {
    for (std::size_t rc = 0; rc < n * n; ++rc) res.hess_tau[rc] = r.value[c_hess + rc];
  }
  double scale = 1.0;
  if (want_action) {
    const Vec H = spec_->rotor().hessian(I);
    for (std::size_t k = 0; k < d; ++k) {
      double row = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        res.grad_I[k] += H[k * d + j] * r.value[c_act + j];
        row += std::abs(H[k * d + j]);
      }
      scale = std::max(scale, row);
    }
  }
  res.est_error = (r.error + tail) * scale;
  res.evaluations = r.evaluations;
  if (!r.converged || r.error + tail > tol) {
    throw AccuracyError(accuracy_message("melnikov", r.error + tail, tol), res.value,
                        res.est_error);
  }
  return res;
}

MelnikovEval melnikov(const SystemSpec& spec, const std::vector<HomoclinicOrbit>& orbits,
                      std::span<const double> tau, std::span<const double> I,
                      std::span<const double> phi, double s, double tol) {
  return Melnikov(spec, orbits).eval(tau, I, phi, s, tol);
}

OrbitTransform orbit_transform(const HomoclinicOrbit& orbit, const std::vector<FourierTerm>& g,
                               double nu, double tol, bool moments) {
  if (!(tol > 0.0)) throw InputError("orbit_transform: tol must be positive");
  double g0 = 0.0, lip = 0.0;
  for (const auto& term : g) {
    g0 += term.cos_amp;
    lip += std::abs(term.k) * (std::abs(term.cos_amp) + std::abs(term.sin_amp));
  }
  OrbitTransform res;
  if (lip == 0.0) return res;
  const double lam = orbit.lambda();
  double W = window_for(orbit, 2.0 * lip, tol / 8.0);
  if (moments) W *= 1.2;
  double tail = lip * (orbit.tail_coeff_forward() + orbit.tail_coeff_backward()) *
                std::exp(-lam * W) / lam;
  if (moments) tail *= 1.0 + W + 1.0 / lam;

  const std::size_t dim = moments ? 4 : 2;
  auto integrand = [&](std::span<const double> nodes, std::span<double> out) {
    const std::size_t N = nodes.size();
    for (std::size_t j = 0; j < N; ++j) {
      const double t = nodes[j];
      const double q = orbit.at(t).q;
      double v = -g0;
      for (const auto& term : g) {
        v += term.cos_amp * std::cos(term.k * q) + term.sin_amp * std::sin(term.k * q);
      }
      const double c = std::cos(nu * t), s = std::sin(nu * t);
      out[j] = v * c;
      out[N + j] = v * s;
      if (moments) {
        out[2 * N + j] = t * v * c;
        out[3 * N + j] = t * v * s;
      }
    }
  };
  quad::Options opt;
  opt.abs_tol = std::max(tol - tail, 0.5 * tol);
  opt.initial_panels = std::max(8, int(std::ceil(2.0 * W * std::max({1.0, lam, std::abs(nu)}))));
  opt.max_panels = std::max(4000, 16 * opt.initial_panels);
  const quad::Result r = quad::gauss_kronrod(integrand, dim, -W, W, opt);
  res.cos_part = r.value[0];
  res.sin_part = r.value[1];
  if (moments) {
    res.cos_moment = r.value[2];
    res.sin_moment = r.value[3];
  }
  res.error = r.error + tail;
  if (!r.converged || res.error > tol) {
    throw AccuracyError(accuracy_message("orbit transform", res.error, tol), res.cos_part,
                        res.error);
  }
  return res;
}

MelnikovEval melnikov_closed_form(const SystemSpec& spec, const Mode& mode,
                                  const std::vector<HomoclinicOrbit>& orbits,
                                  std::span<const double> tau, std::span<const double> I,
                                  std::span<const double> phi, double s, double tol) {
  const std::size_t n = spec.n();
  const std::size_t d = spec.d();
  if (mode.k.size() != n || mode.l.size() != d) throw InputError("mode dimension mismatch");
  if (orbits.size() != n) throw InputError("one separatrix per pendulum is required");
  std::size_t which = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (mode.k[i] == 0) continue;
    if (which != n) throw InputError("closed form needs a mode coupling a single pendulum");
    which = i;
  }
  MelnikovEval res;
  res.grad_tau.assign(n, 0.0);
  res.grad_I.assign(d, 0.0);
  res.grad_phi.assign(d, 0.0);
  res.hess_tau.assign(n * n, 0.0);
  if (which == n || mode.amplitude == 0.0) return res;

  const Vec omega = spec.rotor().frequency(I);
  const Vec H = spec.rotor().hessian(I);
  double nu = mode.m;
  double psi = mode.m * s + mode.phase;
  for (std::size_t j = 0; j < d; ++j) {
    nu += mode.l[j] * omega[j];
    psi += mode.l[j] * phi[j];
  }
  psi -= nu * tau[which];
  const int k = mode.k[which];
  const double part_tol = tol / (8.0 * std::abs(mode.amplitude));
  const OrbitTransform tc = orbit_transform(orbits[which], {{k, 1.0, 0.0}}, nu, part_tol, true);
  const OrbitTransform ts = orbit_transform(orbits[which], {{k, 0.0, 1.0}}, nu, part_tol, true);
  const double P = tc.cos_part - ts.sin_part;
  const double Q = tc.sin_part + ts.cos_part;
  const double dP = -tc.sin_moment - ts.cos_moment;
  const double dQ = tc.cos_moment - ts.sin_moment;
  const double a = mode.amplitude;
  const double cp = std::cos(psi), sp = std::sin(psi);

  res.value = -a * (P * cp - Q * sp);
  const double D = a * (P * sp + Q * cp);
  res.grad_tau[which] = -nu * D;
  res.hess_tau[which * n + which] = -nu * nu * res.value;
  for (std::size_t j = 0; j < d; ++j) res.grad_phi[j] = mode.l[j] * D;
  res.d_s = mode.m * D;
  const double dvalue_dnu = -a * (dP * cp - dQ * sp) - tau[which] * D;
  for (std::size_t kk = 0; kk < d; ++kk) {
    double dnu = 0.0;
    for (std::size_t j = 0; j < d; ++j) dnu += mode.l[j] * H[j * d + kk];
    res.grad_I[kk] = dvalue_dnu * dnu;
  }
  res.est_error = 4.0 * std::abs(a) * (tc.error + ts.error) * (1.0 + std::abs(tau[which]));
  return res;
}

double check_shift_identity(const Melnikov& mel, std::span<const double> tau,
                            std::span<const double> I, std::span<const double> phi, double s,
                            double sigma, double tol) {
  Vec tau2(tau.begin(), tau.end());
  for (auto& v : tau2) v += sigma;
  const Vec omega = mel.spec().rotor().frequency(I);
  Vec phi2(phi.begin(), phi.end());
  for (std::size_t j = 0; j < phi2.size(); ++j) phi2[j] -= omega[j] * sigma;
  const double lhs = mel.eval(tau2, I, phi, s, tol, kMelnikovValue).value;
  const double rhs = mel.eval(tau, I, phi2, s - sigma, tol, kMelnikovValue).value;
  return std::abs(lhs - rhs);
}

void write_scan_csv(std::ostream& os, const Melnikov& mel, const std::vector<ScanPoint>& points,
                    double tol) {
  const std::size_t n = mel.n(), d = mel.d();
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < n; ++i) os << "tau" << i + 1 << ',';
  for (std::size_t j = 0; j < d; ++j) os << 'I' << j + 1 << ',';
  for (std::size_t j = 0; j < d; ++j) os << "phi" << j + 1 << ',';
  os << "s,L,grad_tau_norm,det_hess,est_error\n";
  for (const auto& p : points) {
    const MelnikovEval e =
        mel.eval(p.tau, p.I, p.phi, p.s, tol, kMelnikovGradient | kMelnikovHessian);
    double gn = 0.0;
    for (double g : e.grad_tau) gn += std::abs(g);
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        H(e.hess_tau.data(), Eigen::Index(n), Eigen::Index(n));
    for (double v : p.tau) os << v << ',';
    for (double v : p.I) os << v << ',';
    for (double v : p.phi) os << v << ',';
    os << p.s << ',' << e.value << ',' << gn << ',' << H.determinant() << ',' << e.est_error
       << '\n';
  }
  os.precision(old);
}

}  // namespace drift
