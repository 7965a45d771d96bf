#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "../common/systems.hpp"
#include "drift/error.hpp"
#include "drift/melnikov.hpp"

using namespace drift;
using namespace drift::testing;

namespace {

// mpmath, tests/oracles/closed_forms.py
constexpr double kAmp1 = 2.73027780132343108615825337143;
constexpr double kSinAmp1 = 2.50408066250429524617668599287;
constexpr double kCos2Amp1 = 1.82018520088228739077216891429;

SystemSpec rich_system() {
  // Two pendulums, non-quadratic rotor, modes with mixed couplings.
  const RotorSpec rotor(2, {{0.5, {2, 0}}, {0.5, {0, 2}}, {0.3, {1, 1}}, {0.1, {3, 0}},
                            {-0.05, {1, 2}}});
  const PendulumSpec skew({{1, 1.0, 0.0}, {2, 0.2, 0.1}, {1, 0.0, -0.2}}, 1);
  return SystemSpec(rotor, {skew, cos_pendulum(2.0, -1)},
                    PerturbationSpec({{{1, 0}, {1, 0}, 1, 0.4, 0.3},
                                      {{0, 1}, {0, 1}, -1, -0.3, 1.0},
                                      {{1, 1}, {1, -1}, 0, 0.2, 2.0},
                                      {{2, 0}, {0, 0}, 1, 0.25, 0.0},
                                      {{0, 0}, {1, 1}, 1, 0.9, 0.0}}),
                    0.01);
}

}  // namespace

TEST_CASE("zero perturbation gives a zero potential") {
  const SystemSpec spec = unperturbed_system();
  const Melnikov mel(spec, compute_separatrices(spec));
  const double tau[1] = {0.3}, I[1] = {1.0}, phi[1] = {0.2};
  const MelnikovEval e = mel.eval(tau, I, phi, 0.5, 1e-10);
  CHECK(e.value == 0.0);
  CHECK(e.grad_tau[0] == 0.0);
  CHECK(e.hess_tau[0] == 0.0);
  CHECK(e.grad_I[0] == 0.0);
  CHECK(mel.trivially_zero());
}

TEST_CASE("single time harmonic matches the residue formula") {
  CHECK(harmonic_amplitude() == doctest::Approx(kAmp1).epsilon(1e-15));
  const SystemSpec spec = single_harmonic_system();
  const Melnikov mel(spec, compute_separatrices(spec));
  const double I[1] = {1.0}, phi[1] = {0.4};
  double worst = 0.0, worst_grad = 0.0, worst_hess = 0.0;
  for (int a = 0; a < 10; ++a) {
    for (int b = 0; b < 10; ++b) {
      const double tau[1] = {-3.0 + 0.6 * a}, s = -3.0 + 0.65 * b;
      const MelnikovEval e = mel.eval(tau, I, phi, s, 1e-11);
      worst = std::max(worst, std::abs(e.value - kAmp1 * std::cos(s - tau[0])));
      worst_grad = std::max(worst_grad, std::abs(e.grad_tau[0] - kAmp1 * std::sin(s - tau[0])));
      worst_grad = std::max(worst_grad, std::abs(e.d_s + kAmp1 * std::sin(s - tau[0])));
      worst_hess = std::max(worst_hess, std::abs(e.hess_tau[0] + kAmp1 * std::cos(s - tau[0])));
      CHECK(std::abs(e.grad_phi[0]) < 1e-12);
      CHECK(std::abs(e.grad_I[0]) < 1e-12);
      CHECK(e.est_error <= 1e-11);
    }
  }
  CHECK(worst < 1e-9);
  CHECK(worst_grad < 1e-9);
  CHECK(worst_hess < 1e-9);
}

TEST_CASE("angle harmonic depends on I through the frequency") {
  const SystemSpec spec = angle_harmonic_system();
  const Melnikov mel(spec, compute_separatrices(spec));
  for (double Iv : {1.0, 0.7, 1.3}) {
    const double I[1] = {Iv}, phi[1] = {0.9}, tau[1] = {0.35};
    const MelnikovEval e = mel.eval(tau, I, phi, 0.1, 1e-11);
    const double amp = harmonic_amplitude(Iv);
    CHECK(e.value == doctest::Approx(amp * std::cos(phi[0] - Iv * tau[0])).epsilon(1e-9));
    // d/dI [A(I) cos(phi - I tau)] with A(a) = 2 pi a / sinh(pi a / 2)
    const double dA = 2 * M_PI / std::sinh(M_PI * Iv / 2) -
                      2 * M_PI * Iv * (M_PI / 2) * std::cosh(M_PI * Iv / 2) /
                          std::pow(std::sinh(M_PI * Iv / 2), 2);
    const double expect = dA * std::cos(phi[0] - Iv * tau[0]) +
                          amp * tau[0] * std::sin(phi[0] - Iv * tau[0]);
    CHECK(e.grad_I[0] == doctest::Approx(expect).epsilon(1e-8));
  }
}

TEST_CASE("quadrature agrees with the closed form for single-pendulum modes") {
  const SystemSpec spec = rich_system();
  const auto orbits = compute_separatrices(spec);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  for (const Mode& mode : spec.perturbation().modes()) {
    if (mode.k[0] != 0 && mode.k[1] != 0) {
      const double tau[2] = {0, 0}, I[2] = {1, 1}, phi[2] = {0, 0};
      CHECK_THROWS_AS(melnikov_closed_form(spec, mode, orbits, tau, I, phi, 0.0, 1e-10),
                      InputError);
      continue;
    }
    const SystemSpec one = spec.with_perturbation(PerturbationSpec({mode}));
    const Melnikov mel(one, orbits);
    for (int trial = 0; trial < 5; ++trial) {
      const double tau[2] = {U(rng), U(rng)}, I[2] = {1.0 + 0.2 * U(rng), 0.8 + 0.2 * U(rng)};
      const double phi[2] = {U(rng), U(rng)}, s = U(rng);
      const MelnikovEval q = mel.eval(tau, I, phi, s, 1e-11);
      const MelnikovEval c = melnikov_closed_form(one, mode, orbits, tau, I, phi, s, 1e-11);
      CHECK(std::abs(q.value - c.value) < 1e-9);
      for (int i = 0; i < 2; ++i) {
        CHECK(std::abs(q.grad_tau[i] - c.grad_tau[i]) < 1e-9);
        CHECK(std::abs(q.grad_phi[i] - c.grad_phi[i]) < 1e-9);
        CHECK(std::abs(q.grad_I[i] - c.grad_I[i]) < 1e-8);
      }
      for (int rc = 0; rc < 4; ++rc) CHECK(std::abs(q.hess_tau[rc] - c.hess_tau[rc]) < 1e-9);
      CHECK(std::abs(q.d_s - c.d_s) < 1e-9);
    }
  }
}

TEST_CASE("orbit transforms reproduce the reference values") {
  const HomoclinicOrbit orbit = compute_separatrix(cos_pendulum());
  const OrbitTransform c1 = orbit_transform(orbit, {{1, 1.0, 0.0}}, 1.0, 1e-12);
  CHECK(-c1.cos_part == doctest::Approx(kAmp1).epsilon(1e-11));
  CHECK(std::abs(c1.sin_part) < 1e-12);
  const OrbitTransform c0 = orbit_transform(orbit, {{1, 1.0, 0.0}}, 0.0, 1e-12);
  CHECK(c0.cos_part == doctest::Approx(-4.0).epsilon(1e-11));
  const OrbitTransform s1 = orbit_transform(orbit, {{1, 0.0, 1.0}}, 1.0, 1e-12);
  CHECK(std::abs(s1.cos_part) < 1e-12);
  CHECK(-s1.sin_part == doctest::Approx(kSinAmp1).epsilon(1e-11));
  const OrbitTransform c2 = orbit_transform(orbit, {{2, 1.0, 0.0}}, 1.0, 1e-12);
  CHECK(-c2.cos_part == doctest::Approx(kCos2Amp1).epsilon(1e-11));
  const OrbitTransform k0 = orbit_transform(orbit, {{0, 3.0, 0.0}}, 1.0, 1e-12);
  CHECK(k0.cos_part == 0.0);
  CHECK(k0.sin_part == 0.0);
}

TEST_CASE("analytic derivatives match finite differences") {
  const SystemSpec spec = rich_system();
  const Melnikov mel(spec, compute_separatrices(spec));
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  const double h = 1e-4;
  auto close = [](double fd, double an) {
    return std::abs(fd - an) <= 1e-5 || std::abs(fd - an) <= 1e-4 * std::abs(an);
  };
  int bad = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Vec tau = {U(rng), U(rng)}, I = {1.0 + 0.2 * U(rng), 0.9 + 0.2 * U(rng)},
        phi = {U(rng), U(rng)};
    const double s = U(rng);
    const MelnikovEval e = mel.eval(tau, I, phi, s, 1e-12);
    auto L = [&](Vec t2, Vec I2, Vec p2, double s2) {
      return mel.eval(t2, I2, p2, s2, 1e-12, kMelnikovValue).value;
    };
    auto Lg = [&](Vec t2) { return mel.eval(t2, I, phi, s, 1e-12, kMelnikovGradient).grad_tau; };
    for (int i = 0; i < 2; ++i) {
      Vec a = tau, b = tau;
      a[i] += h;
      b[i] -= h;
      bad += !close((L(a, I, phi, s) - L(b, I, phi, s)) / (2 * h), e.grad_tau[i]);
      const Vec ga = Lg(a), gb = Lg(b);
      for (int k = 0; k < 2; ++k) bad += !close((ga[k] - gb[k]) / (2 * h), e.hess_tau[i * 2 + k]);
      Vec c = phi, dd = phi;
      c[i] += h;
      dd[i] -= h;
      bad += !close((L(tau, I, c, s) - L(tau, I, dd, s)) / (2 * h), e.grad_phi[i]);
      Vec Ia = I, Ib = I;
      Ia[i] += h;
      Ib[i] -= h;
      bad += !close((L(tau, Ia, phi, s) - L(tau, Ib, phi, s)) / (2 * h), e.grad_I[i]);
    }
    bad += !close((L(tau, I, phi, s + h) - L(tau, I, phi, s - h)) / (2 * h), e.d_s);
    CHECK(std::abs(e.hess_tau[1] - e.hess_tau[2]) < 1e-8);
  }
  CHECK(bad == 0);
}

TEST_CASE("shift identity and uniform bound") {
  const SystemSpec spec = rich_system();
  const Melnikov mel(spec, compute_separatrices(spec));
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  const double tol = 1e-10;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double tau[2] = {U(rng), U(rng)}, I[2] = {1.0 + 0.1 * U(rng), 1.0 + 0.1 * U(rng)};
    const double phi[2] = {U(rng), U(rng)};
    worst = std::max(worst, check_shift_identity(mel, tau, I, phi, U(rng), U(rng), tol));
  }
  CHECK(worst < 10 * tol);
  const double sigma0[2] = {0.2, -0.4}, I0[2] = {1.0, 1.0};
  CHECK(check_shift_identity(mel, sigma0, I0, sigma0, 0.3, 0.0, tol) == 0.0);

  const double M = mel.uniform_bound();
  double biggest = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double tau[2] = {U(rng), U(rng)}, I[2] = {1.0, 1.0}, phi[2] = {U(rng), U(rng)};
    biggest = std::max(biggest, std::abs(mel.eval(tau, I, phi, U(rng), 1e-8, kMelnikovValue).value));
  }
  CHECK(biggest <= M);
  CHECK(biggest > 0.05 * M);
}

TEST_CASE("kernel variants give the same potential") {
  const SystemSpec spec = rich_system();
  const Melnikov mel(spec, compute_separatrices(spec));
  const double tau[2] = {0.3, -0.2}, I[2] = {1.1, 0.9}, phi[2] = {0.5, 2.0};
  const kernels::Isa before = kernels::active();
  kernels::force(kernels::Isa::Scalar);
  const MelnikovEval a = mel.eval(tau, I, phi, 0.7, 1e-11);
  if (kernels::available(kernels::Isa::Avx2)) {
    kernels::force(kernels::Isa::Avx2);
    const MelnikovEval b = mel.eval(tau, I, phi, 0.7, 1e-11);
    CHECK(std::abs(a.value - b.value) < 1e-13);
    CHECK(std::abs(a.grad_I[0] - b.grad_I[0]) < 1e-12);
  }
  kernels::force(before);
}

TEST_CASE("scan CSV layout") {
  const SystemSpec spec = single_harmonic_system();
  const Melnikov mel(spec, compute_separatrices(spec));
  std::ostringstream os;
  write_scan_csv(os, mel, {{{0.0}, {1.0}, {0.0}, 0.0}, {{kPi}, {1.0}, {0.0}, 0.0}}, 1e-10);
  std::istringstream in(os.str());
  std::string header, row;
  std::getline(in, header);
  CHECK(header == "tau1,I1,phi1,s,L,grad_tau_norm,det_hess,est_error");
  std::getline(in, row);
  CHECK(row.rfind("0,1,0,0,2.73027780", 0) == 0);
}
