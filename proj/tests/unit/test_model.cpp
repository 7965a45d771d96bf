#include <doctest.h>

#include <cmath>
#include <random>

#include "../common/systems.hpp"
#include "drift/config.hpp"
#include "drift/error.hpp"
#include "drift/model.hpp"

using namespace drift;
using namespace drift::testing;

TEST_CASE("eval_h0 examples") {
  const SystemSpec one = unperturbed_system();
  const double z[1] = {0.0};
  CHECK(eval_h0(one, z, z, z) == doctest::Approx(0.0));
  const double p[1] = {2.0}, q[1] = {kPi}, I[1] = {1.0};
  CHECK(eval_h0(one, p, q, I) == doctest::Approx(0.5).epsilon(1e-14));

  const SystemSpec two(half_square_rotor(), {cos_pendulum(1.0, 1), cos_pendulum(1.0, -1)},
                       PerturbationSpec(), 0.0);
  const double p2[2] = {1.0, 1.0}, q2[2] = {0.0, 0.0};
  CHECK(std::abs(eval_h0(two, p2, q2, z)) < 1e-15);
  CHECK_THROWS_AS(eval_h0(two, p, q, I), InputError);
}

TEST_CASE("eval_h1 examples") {
  const double q0[1] = {0.0}, phi0[1] = {0.0};
  CHECK(eval_h1(unperturbed_system(), q0, phi0, 0.7) == 0.0);
  const SystemSpec one_mode(half_square_rotor(), {cos_pendulum()},
                            PerturbationSpec({{{1}, {}, 1, 1.0, 0.0}}), 0.0);
  CHECK(eval_h1(one_mode, q0, phi0, 0.0) == doctest::Approx(1.0));
  const double q[1] = {kPi / 2};
  CHECK(eval_h1(single_harmonic_system(), q, phi0, kPi / 3) ==
        doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("characteristic exponents and Morse checks") {
  CHECK(characteristic_exponents(unperturbed_system())[0] == doctest::Approx(1.0));
  CHECK(cos_pendulum(4.0).lambda() == doctest::Approx(2.0));
  // -(cos q - 1) has a minimum at 0.
  CHECK_THROWS_AS(PendulumSpec({{1, -1.0, 0.0}, {0, 1.0, 0.0}}, 1), InputError);
  // cos 2q has a second maximum at pi.
  CHECK_THROWS_AS(PendulumSpec({{2, 1.0, 0.0}}, 1), InputError);
  // sin q is not stationary at 0.
  CHECK_THROWS_AS(PendulumSpec({{1, 1.0, 0.0}, {1, 0.0, 1.0}}, 1), InputError);
  CHECK_THROWS_AS(PendulumSpec({{1, 1.0, 0.0}}, 2), InputError);
  // A skewed potential with a unique maximum is accepted.
  CHECK_NOTHROW(PendulumSpec({{1, 1.0, 0.0}, {2, 0.2, 0.1}, {1, 0.0, -0.2}}, 1));
}

TEST_CASE("drop is accurate near the saddle") {
  const PendulumSpec skew({{1, 1.0, 0.0}, {2, 0.2, 0.1}, {1, 0.0, -0.2}}, 1);
  const double lam2 = -skew.d2potential(0.0);
  for (double x : {1e-3, 1e-6, 1e-9, 1e-12, -1e-12}) {
    const double expect = 0.5 * lam2 * x * x;
    CHECK(skew.drop(x) == doctest::Approx(expect).epsilon(std::max(1e-12, 10 * std::abs(x))));
  }
}

TEST_CASE("perturbation is 2 pi periodic and derivatives match finite differences") {
  const SystemSpec spec(half_square_rotor(2), {cos_pendulum(), cos_pendulum(2.0, -1)},
                        PerturbationSpec({{{1, 2}, {0, 1}, 1, 0.3, 0.4},
                                          {{0, 1}, {2, -1}, 0, -0.7, 1.1},
                                          {{3, 0}, {1, 1}, -2, 0.2, 0.0}}),
                        0.1);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-4.0, 4.0);
  double worst_period = 0.0, worst_grad = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    double q[2] = {U(rng), U(rng)}, phi[2] = {U(rng), U(rng)};
    const double t = U(rng);
    const double base = eval_h1(spec, q, phi, t);
    double qs[2] = {q[0] + kTwoPi, q[1]}, ps[2] = {phi[0], phi[1] - kTwoPi};
    worst_period = std::max(worst_period, std::abs(base - eval_h1(spec, qs, phi, t)));
    worst_period = std::max(worst_period, std::abs(base - eval_h1(spec, q, ps, t)));
    worst_period = std::max(worst_period, std::abs(base - eval_h1(spec, q, phi, t + kTwoPi)));

    const PerturbationJet jet = eval_h1_jet(spec, q, phi, t);
    const double h = 1e-5;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    for (int i = 0; i < 2; ++i) {
      double a[2] = {q[0], q[1]}, b[2] = {q[0], q[1]};
      a[i] += h;
      b[i] -= h;
      worst_grad = std::max(worst_grad, rel((eval_h1(spec, a, phi, t) - eval_h1(spec, b, phi, t)) / (2 * h), jet.grad_q[i]));
      const PerturbationJet ja = eval_h1_jet(spec, a, phi, t), jb = eval_h1_jet(spec, b, phi, t);
      for (int k = 0; k < 2; ++k) {
        worst_grad = std::max(worst_grad, rel((ja.grad_q[k] - jb.grad_q[k]) / (2 * h), jet.hess_q[i * 2 + k]));
      }
      double c[2] = {phi[0], phi[1]}, e[2] = {phi[0], phi[1]};
      c[i] += h;
      e[i] -= h;
      worst_grad = std::max(worst_grad, rel((eval_h1(spec, q, c, t) - eval_h1(spec, q, e, t)) / (2 * h), jet.grad_phi[i]));
    }
    worst_grad = std::max(worst_grad, rel((eval_h1(spec, q, phi, t + h) - eval_h1(spec, q, phi, t - h)) / (2 * h), jet.d_t));

    const double I[2] = {U(rng), U(rng)};
    const Vec w = spec.rotor().frequency(I);
    const Vec H = spec.rotor().hessian(I);
    for (int j = 0; j < 2; ++j) {
      double a[2] = {I[0], I[1]}, b[2] = {I[0], I[1]};
      a[j] += h;
      b[j] -= h;
      worst_grad = std::max(worst_grad, rel((spec.rotor().value(a) - spec.rotor().value(b)) / (2 * h), w[j]));
      const Vec wa = spec.rotor().frequency(a), wb = spec.rotor().frequency(b);
      for (int k = 0; k < 2; ++k) worst_grad = std::max(worst_grad, rel((wa[k] - wb[k]) / (2 * h), H[k * 2 + j]));
    }
  }
  CHECK(worst_period < 1e-12);
  CHECK(worst_grad < 1e-6);
}

TEST_CASE("rotor polynomial validation") {
  CHECK_THROWS_AS(RotorSpec(1, {{1.0, {5}}}), InputError);
  CHECK_THROWS_AS(RotorSpec(0, {}), InputError);
  const RotorSpec r(2, {{1.0, {2, 1}}, {-0.5, {0, 3}}});
  const double I[2] = {2.0, 3.0};
  CHECK(r.value(I) == doctest::Approx(4.0 * 3.0 - 0.5 * 27.0));
  const Vec w = r.frequency(I);
  CHECK(w[0] == doctest::Approx(12.0));
  CHECK(w[1] == doctest::Approx(4.0 - 1.5 * 9.0));
}

TEST_CASE("model files round-trip and report line numbers") {
  const SystemSpec spec = two_harmonic_system(2.5e-3);
  const std::string text = format_model(spec);
  const SystemSpec back = parse_model(text);
  CHECK(format_model(back) == text);
  CHECK(back.epsilon() == 2.5e-3);
  CHECK(back.perturbation().modes().size() == 6);

  const std::string bad = "epsilon = 0.1\n[rotor]\ncoefficients = [[0.5, 2]]\n[[pendulum]]\n"
                          "fourier_coeffs = [[1, 1.0, 0.0], [0, -1.0, 0.0]]\nsign = 3\n";
  try {
    parse_model(bad, "bad.toml");
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("bad.toml:4") != std::string::npos);
  }
  try {
    parse_model("epsilon = \n", "syntax.toml");
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("syntax.toml:1") != std::string::npos);
  }
  CHECK_THROWS_AS(load_model("/nonexistent/model.toml"), InputError);
}
