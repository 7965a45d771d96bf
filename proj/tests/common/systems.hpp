#pragma once

#include <cmath>

#include "drift/model.hpp"

namespace drift::testing {

inline PendulumSpec cos_pendulum(double scale = 1.0, int sign = 1, int branch = 1) {
  return PendulumSpec({{1, scale, 0.0}, {0, -scale, 0.0}}, sign, branch);
}

inline RotorSpec half_square_rotor(std::size_t d = 1) {
  std::vector<Monomial> terms;
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<int> e(d, 0);
    e[j] = 2;
    terms.push_back({0.5, e});
  }
  return RotorSpec(d, terms);
}

/// (cos q - 1) cos t.
inline PerturbationSpec time_harmonic() {
  return PerturbationSpec({{{1}, {0}, 1, 0.5, 0.0}, {{1}, {0}, -1, 0.5, 0.0}, {{0}, {0}, 1, -1.0, 0.0}});
}

/// (cos q - 1) cos phi.
inline PerturbationSpec angle_harmonic() {
  return PerturbationSpec({{{1}, {1}, 0, 0.5, 0.0}, {{1}, {-1}, 0, 0.5, 0.0}, {{0}, {1}, 0, -1.0, 0.0}});
}

/// (cos q - 1)(cos t + cos phi).
inline PerturbationSpec two_harmonic() {
  auto a = time_harmonic().modes();
  auto b = angle_harmonic().modes();
  a.insert(a.end(), b.begin(), b.end());
  return PerturbationSpec(a);
}

inline SystemSpec single_harmonic_system(double eps = 1e-3) {
  return SystemSpec(half_square_rotor(), {cos_pendulum()}, time_harmonic(), eps);
}

inline SystemSpec angle_harmonic_system(double eps = 1e-3) {
  return SystemSpec(half_square_rotor(), {cos_pendulum()}, angle_harmonic(), eps);
}

inline SystemSpec two_harmonic_system(double eps = 1e-3) {
  return SystemSpec(half_square_rotor(), {cos_pendulum()}, two_harmonic(), eps);
}

inline SystemSpec unperturbed_system(double eps = 1e-3) {
  return SystemSpec(half_square_rotor(), {cos_pendulum()}, PerturbationSpec(), eps);
}

/// 2 pi / sinh(pi / 2): amplitude of L for the single-harmonic example.
inline double harmonic_amplitude(double a = 1.0) {
  if (a == 0.0) return 4.0;
  return 2.0 * M_PI * a / std::sinh(M_PI * a / 2.0);
}

}  // namespace drift::testing
