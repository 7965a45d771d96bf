#include "drift/model.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "drift/error.hpp"

namespace drift {

namespace {

constexpr double kMorseTol = 1e-8;
constexpr double kUniqueMaxTol = 1e-10;
constexpr double kExclusionRadius = 0.1;
constexpr int kUniqueMaxGrid = 4096;

double ipow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

void check_dims(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw InputError(std::string("dimension mismatch for ") + what + ": got " +
                     std::to_string(got) + ", expected " + std::to_string(want));
  }
}

// sin(y) - y without cancellation for small |y|.
double sin_minus_arg(double y) {
  if (std::abs(y) > 0.5) return std::sin(y) - y;
  const double y2 = y * y;
  double term = -y * y2 / 6.0;
  double sum = term;
  for (int j = 2; j < 12; ++j) {
    term *= -y2 / ((2.0 * j) * (2.0 * j + 1.0));
    sum += term;
  }
  return sum;
}

}  // namespace

// ---------------------------------------------------------------------------
// PendulumSpec

PendulumSpec::PendulumSpec(std::vector<FourierTerm> fourier_coeffs, int sign, int branch)
    : terms_(std::move(fourier_coeffs)), sign_(sign), branch_(branch) {
  if (sign_ != 1 && sign_ != -1) throw InputError("pendulum sign must be +1 or -1");
  if (branch_ != 1 && branch_ != -1) throw InputError("pendulum branch must be +1 or -1");
  double scale = 0.0;
  for (const auto& t : terms_) {
    if (t.k < 0) throw InputError("pendulum harmonic k must be >= 0");
    if (!std::isfinite(t.cos_amp) || !std::isfinite(t.sin_amp)) {
      throw InputError("pendulum Fourier coefficient is not finite");
    }
    scale += std::abs(t.k) * (std::abs(t.cos_amp) + std::abs(t.sin_amp));
  }
  const double v1 = dpotential(0.0);
  if (std::abs(v1) > 1e-10 * std::max(1.0, scale)) {
    throw InputError("Morse violation: V'(0) = " + std::to_string(v1) + " != 0");
  }
  const double v2 = d2potential(0.0);
  if (!(v2 < -kMorseTol)) {
    throw InputError("Morse violation: V''(0) = " + std::to_string(v2) + " is not < 0");
  }
  for (int j = 0; j < kUniqueMaxGrid; ++j) {
    const double q = kTwoPi * j / kUniqueMaxGrid;
    const double dist = std::min(q, kTwoPi - q);
    if (dist < kExclusionRadius) continue;
    if (drop(q) < kUniqueMaxTol) {
      throw InputError("maximum of V at q = 0 is not unique (V(" + std::to_string(q) +
                       ") >= V(0) - 1e-10)");
    }
  }
}

double PendulumSpec::potential(double q) const {
  double v = 0.0;
  for (const auto& t : terms_) v += t.cos_amp * std::cos(t.k * q) + t.sin_amp * std::sin(t.k * q);
  return v;
}

double PendulumSpec::dpotential(double q) const {
  double v = 0.0;
  for (const auto& t : terms_) {
    v += t.k * (-t.cos_amp * std::sin(t.k * q) + t.sin_amp * std::cos(t.k * q));
  }
  return v;
}

double PendulumSpec::d2potential(double q) const {
  double v = 0.0;
  for (const auto& t : terms_) {
    const double kk = double(t.k) * t.k;
    v -= kk * (t.cos_amp * std::cos(t.k * q) + t.sin_amp * std::sin(t.k * q));
  }
  return v;
}

double PendulumSpec::drop(double x) const {
  // cos(0) - cos(kx) = 2 sin^2(kx/2). For the sine part, sin(kx) - kx is summed
  // separately from the linear remainder x * sum(k s) = x V'(0), so nothing of
  // order x survives to cancel near the saddle.
  double w = 0.0;
  double linear = 0.0;
  for (const auto& t : terms_) {
    const double h = std::sin(0.5 * t.k * x);
    w += 2.0 * t.cos_amp * h * h - t.sin_amp * sin_minus_arg(t.k * x);
    linear += t.k * t.sin_amp;
  }
  return w - linear * x;
}

double PendulumSpec::lambda() const { return std::sqrt(-d2potential(0.0)); }

// ---------------------------------------------------------------------------
// RotorSpec

RotorSpec::RotorSpec(std::size_t dim, std::vector<Monomial> coefficients)
    : dim_(dim), terms_(std::move(coefficients)) {
  if (dim_ < 1) throw InputError("rotor dimension d must be >= 1");
  for (auto& m : terms_) {
    if (m.exps.empty()) m.exps.assign(dim_, 0);
    check_dims(m.exps.size(), dim_, "rotor monomial exponents");
    int deg = 0;
    for (int e : m.exps) {
      if (e < 0) throw InputError("rotor exponents must be >= 0");
      deg += e;
    }
    if (deg > 4) throw InputError("rotor polynomial degree exceeds 4");
    if (!std::isfinite(m.coef)) throw InputError("rotor coefficient is not finite");
  }
}

double RotorSpec::value(std::span<const double> I) const {
  check_dims(I.size(), dim_, "I");
  double h = 0.0;
  for (const auto& m : terms_) {
    double term = m.coef;
    for (std::size_t j = 0; j < dim_; ++j) term *= ipow(I[j], m.exps[j]);
    h += term;
  }
  return h;
}

Vec RotorSpec::frequency(std::span<const double> I) const {
  check_dims(I.size(), dim_, "I");
  Vec w(dim_, 0.0);
  for (const auto& m : terms_) {
    for (std::size_t a = 0; a < dim_; ++a) {
      if (m.exps[a] == 0) continue;
      double term = m.coef * m.exps[a];
      for (std::size_t j = 0; j < dim_; ++j) {
        term *= ipow(I[j], m.exps[j] - (j == a ? 1 : 0));
      }
      w[a] += term;
    }
  }
  return w;
}

Vec RotorSpec::hessian(std::span<const double> I) const {
  check_dims(I.size(), dim_, "I");
  Vec h(dim_ * dim_, 0.0);
  for (const auto& m : terms_) {
    for (std::size_t a = 0; a < dim_; ++a) {
      for (std::size_t b = 0; b < dim_; ++b) {
        std::vector<int> e = m.exps;
        double term = m.coef;
        term *= e[a];
        e[a] -= 1;
        if (term == 0.0) continue;
        term *= e[b];
        e[b] -= 1;
        if (term == 0.0) continue;
        for (std::size_t j = 0; j < dim_; ++j) term *= ipow(I[j], e[j]);
        h[a * dim_ + b] += term;
      }
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// PerturbationSpec / SystemSpec

double PerturbationSpec::amplitude_sum() const {
  return std::accumulate(modes_.begin(), modes_.end(), 0.0,
                         [](double acc, const Mode& m) { return acc + std::abs(m.amplitude); });
}

SystemSpec::SystemSpec(RotorSpec rotor, std::vector<PendulumSpec> pendulums,
                       PerturbationSpec perturbation, double epsilon)
    : rotor_(std::move(rotor)),
      pendulums_(std::move(pendulums)),
      perturbation_(std::move(perturbation)),
      epsilon_(epsilon) {
  if (pendulums_.empty()) throw InputError("at least one pendulum is required (n >= 1)");
  if (!std::isfinite(epsilon_)) throw InputError("epsilon is not finite");
  std::vector<Mode> modes = perturbation_.modes();
  for (auto& m : modes) {
    if (m.k.empty()) m.k.assign(n(), 0);
    if (m.l.empty()) m.l.assign(d(), 0);
    check_dims(m.k.size(), n(), "perturbation mode k");
    check_dims(m.l.size(), d(), "perturbation mode l");
    if (!std::isfinite(m.amplitude) || !std::isfinite(m.phase)) {
      throw InputError("perturbation mode amplitude/phase is not finite");
    }
  }
  perturbation_ = PerturbationSpec(std::move(modes));
}

SystemSpec SystemSpec::with_perturbation(PerturbationSpec perturbation) const {
  return SystemSpec(rotor_, pendulums_, std::move(perturbation), epsilon_);
}

SystemSpec SystemSpec::with_epsilon(double epsilon) const {
  return SystemSpec(rotor_, pendulums_, perturbation_, epsilon);
}

// ---------------------------------------------------------------------------

double eval_h0(const SystemSpec& spec, std::span<const double> p, std::span<const double> q,
               std::span<const double> I) {
  check_dims(p.size(), spec.n(), "p");
  check_dims(q.size(), spec.n(), "q");
  double h = spec.rotor().value(I);
  for (std::size_t i = 0; i < spec.n(); ++i) {
    const auto& pend = spec.pendulums()[i];
    h += pend.sign() * (0.5 * p[i] * p[i] + pend.potential(q[i]));
  }
  return h;
}

double eval_h1(const SystemSpec& spec, std::span<const double> q, std::span<const double> phi,
               double t) {
  check_dims(q.size(), spec.n(), "q");
  check_dims(phi.size(), spec.d(), "phi");
  double v = 0.0;
  for (const auto& m : spec.perturbation().modes()) {
    double psi = m.m * t + m.phase;
    for (std::size_t i = 0; i < q.size(); ++i) psi += m.k[i] * q[i];
    for (std::size_t j = 0; j < phi.size(); ++j) psi += m.l[j] * phi[j];
    v += m.amplitude * std::cos(psi);
  }
  return v;
}

PerturbationJet eval_h1_jet(const SystemSpec& spec, std::span<const double> q,
                            std::span<const double> phi, double t, bool with_hessian) {
  check_dims(q.size(), spec.n(), "q");
  check_dims(phi.size(), spec.d(), "phi");
  const std::size_t n = spec.n();
  const std::size_t d = spec.d();
  PerturbationJet jet;
  jet.grad_q.assign(n, 0.0);
  jet.grad_phi.assign(d, 0.0);
  if (with_hessian) jet.hess_q.assign(n * n, 0.0);
  for (const auto& m : spec.perturbation().modes()) {
    double psi = m.m * t + m.phase;
    for (std::size_t i = 0; i < n; ++i) psi += m.k[i] * q[i];
    for (std::size_t j = 0; j < d; ++j) psi += m.l[j] * phi[j];
    const double ac = m.amplitude * std::cos(psi);
    const double as = m.amplitude * std::sin(psi);
    jet.value += ac;
    for (std::size_t i = 0; i < n; ++i) jet.grad_q[i] -= m.k[i] * as;
    for (std::size_t j = 0; j < d; ++j) jet.grad_phi[j] -= m.l[j] * as;
    jet.d_t -= m.m * as;
    if (with_hessian) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) jet.hess_q[i * n + k] -= double(m.k[i]) * m.k[k] * ac;
      }
    }
  }
  return jet;
}

Vec characteristic_exponents(const SystemSpec& spec) {
  Vec out;
  out.reserve(spec.n());
  for (const auto& p : spec.pendulums()) {
    const double v2 = p.d2potential(0.0);
    if (!(v2 < -kMorseTol)) throw InputError("Morse violation: V''(0) >= 0");
    out.push_back(std::sqrt(-v2));
  }
  return out;
}

}  // namespace drift
