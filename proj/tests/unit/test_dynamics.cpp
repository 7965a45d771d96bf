#include <doctest.h>

#include <cmath>
#include <sstream>

#include "../common/systems.hpp"
#include "drift/dynamics.hpp"
#include "drift/homoclinic.hpp"

using namespace drift;
using namespace drift::testing;

namespace {

CriticalBranch make_branch(const SystemSpec& spec, double I0, double phi0) {
  auto mel = std::make_shared<const Melnikov>(spec, compute_separatrices(spec));
  const double I[1] = {I0}, phi[1] = {phi0};
  const CriticalPoint start = find_critical_points(*mel, I, phi, 0.0).nondegenerate.front();
  return continue_branch(mel, start, Box::around(I, phi, 0.0), 5);
}

}  // namespace

TEST_CASE("unperturbed motion on the cylinder p = q = 0") {
  const SystemSpec spec = two_harmonic_system(0.0);
  const FullState x0 = make_state(spec, {0.0}, {0.0}, {1.3}, {0.2});
  const TrajectoryRecord rec = integrate_full(spec, x0, 20.0);
  REQUIRE(rec.complete);
  const FullState& end = rec.samples.back();
  CHECK(end.t == 20.0);
  CHECK(end.p[0] == 0.0);
  CHECK(end.q[0] == 0.0);
  CHECK(end.I[0] == 1.3);
  CHECK(std::abs(end.phi[0] - (0.2 + 1.3 * 20.0)) < 1e-9);
}

TEST_CASE("unperturbed motion along the separatrix") {
  const SystemSpec spec = two_harmonic_system(0.0);
  const auto orbits = compute_separatrices(spec);
  const auto [q0, p0] = orbit_value(orbits[0], 0.0);
  const FullState x0 = make_state(spec, {p0}, {q0}, {1.0}, {0.0});
  for (double t_end : {10.0, -10.0}) {
    IntegrationOptions opt;
    opt.tol = 1e-12;
    const TrajectoryRecord rec = integrate_full(spec, x0, t_end, opt);
    REQUIRE(rec.complete);
    double err = 0.0;
    for (const auto& s : rec.samples) {
      const auto [q, p] = orbit_value(orbits[0], s.t);
      err = std::max({err, std::abs(s.q[0] - q), std::abs(s.p[0] - p)});
      CHECK(s.I[0] == 1.0);
    }
    CHECK(err < 1e-6);
  }
}

TEST_CASE("conservation at eps = 0 over [0, 100]") {
  const double tol = 1e-10;
  const SystemSpec spec = two_harmonic_system(0.0);
  IntegrationOptions opt;
  opt.tol = tol;
  opt.stride = 10;
  for (double p0 : {0.7, 2.5}) {  // libration and rotation
    const FullState x0 = make_state(spec, {p0}, {0.4}, {0.9}, {1.0});
    const TrajectoryRecord rec = integrate_full(spec, x0, 100.0, opt);
    REQUIRE(rec.complete);
    CHECK(rec.max_action_change == 0.0);
    CHECK(rec.pendulum_energy_drift[0] < 100 * tol);
    CHECK(rec.energy_drift < 100 * tol);
  }
}

TEST_CASE("extended energy is conserved for eps > 0") {
  const double tol = 1e-10;
  const SystemSpec spec = two_harmonic_system(0.05);
  IntegrationOptions opt;
  opt.tol = tol;
  const FullState x0 = make_state(spec, {1.2}, {0.3}, {1.0}, {0.5});
  const TrajectoryRecord rec = integrate_full(spec, x0, 50.0, opt);
  REQUIRE(rec.complete);
  CHECK(rec.energy_drift < 100 * tol);
  CHECK(rec.action_drift > 1e-4);
}

TEST_CASE("time-2 pi map composes") {
  const SystemSpec spec = two_harmonic_system(0.05);
  IntegrationOptions opt;
  opt.tol = 1e-13;
  const FullState x0 = make_state(spec, {0.9}, {0.2}, {1.0}, {0.3});
  const TrajectoryRecord once = integrate_full(spec, x0, 2 * kTwoPi, opt);
  REQUIRE(once.section.size() == 3);
  const TrajectoryRecord a = integrate_full(spec, x0, kTwoPi, opt);
  const TrajectoryRecord b = integrate_full(spec, a.samples.back(), 2 * kTwoPi, opt);
  const FullState& u = once.samples.back();
  const FullState& v = b.samples.back();
  CHECK(u.t == v.t);
  CHECK(std::abs(u.p[0] - v.p[0]) < 1e-9);
  CHECK(std::abs(u.q[0] - v.q[0]) < 1e-9);
  CHECK(std::abs(u.I[0] - v.I[0]) < 1e-9);
  CHECK(std::abs(u.phi[0] - v.phi[0]) < 1e-9);
  CHECK(std::abs(once.section[1].q[0] - a.samples.back().q[0]) < 1e-9);
}

TEST_CASE("Yoshida integrator is fourth order and tracks RKF78") {
  const SystemSpec spec = two_harmonic_system(0.05);
  const FullState x0 = make_state(spec, {0.9}, {0.2}, {1.0}, {0.3});
  IntegrationOptions ref;
  ref.tol = 1e-13;
  const FullState exact = integrate_full(spec, x0, 10.0, ref).samples.back();
  double err[2];
  for (int k = 0; k < 2; ++k) {
    IntegrationOptions opt;
    opt.method = Integrator::Yoshida4;
    opt.step = 0.02 / (1 << k);
    const TrajectoryRecord rec = integrate_full(spec, x0, 10.0, opt);
    REQUIRE(rec.complete);
    CHECK(rec.samples.back().t == 10.0);
    err[k] = std::abs(rec.samples.back().q[0] - exact.q[0]);
    CHECK(rec.energy_drift < 1e-6);
  }
  CHECK(err[0] / err[1] > 12.0);
  CHECK(err[0] / err[1] < 20.0);
}

TEST_CASE("blow-up ends the record") {
  const SystemSpec spec = two_harmonic_system(0.0);
  IntegrationOptions opt;
  opt.blowup = 5.0;
  const TrajectoryRecord rec =
      integrate_full(spec, make_state(spec, {10.0}, {0.0}, {1.0}, {0.0}), 10.0, opt);
  CHECK_FALSE(rec.complete);
  CHECK_THROWS_AS(integrate_full(spec, make_state(spec, {0.0}, {0.0}, {1.0}, {0.0}),
                                 std::nan(""), opt),
                  InputError);
}

TEST_CASE("homoclinic jump matches eps dL*/dtheta to first order") {
  const SystemSpec spec = two_harmonic_system();
  const CriticalBranch br = make_branch(spec, 1.0, kPi / 2);
  const double I[1] = {1.0}, theta[1] = {kPi / 2};

  const JumpResult zero = measure_homoclinic_jump(spec, 0.0, br, I, theta);
  CHECK(zero.delta_I[0] == 0.0);

  const double eps[3] = {1e-2, 5e-3, 2.5e-3};
  double resid[3];
  for (int k = 0; k < 3; ++k) {
    const JumpResult r = measure_homoclinic_jump(spec, eps[k], br, I, theta);
    CHECK(r.dist_after < 1e-6);
    CHECK(r.dist_before < 1e-6);
    resid[k] = std::abs(r.delta_I[0] - r.predicted[0]) / eps[k];
    CHECK(resid[k] < 0.05 * std::abs(r.predicted[0]) / eps[k]);
  }
  const double slope = std::log(resid[0] / resid[2]) / std::log(eps[0] / eps[2]);
  CHECK(slope == doctest::Approx(1.0).epsilon(0.2));

  JumpOptions heur;
  heur.seeding = JumpSeeding::Heuristic;
  const JumpResult h = measure_homoclinic_jump(spec, 5e-3, br, I, theta, heur);
  CHECK(std::abs(h.delta_I[0] - h.predicted[0]) < 0.05 * std::abs(h.predicted[0]));
}

TEST_CASE("homoclinic jump is second order when dL*/dtheta vanishes") {
  const SystemSpec spec = single_harmonic_system();
  const CriticalBranch br = make_branch(spec, 1.0, 0.0);
  const double I[1] = {1.0}, theta[1] = {0.0};
  const JumpResult a = measure_homoclinic_jump(spec, 1e-2, br, I, theta);
  const JumpResult b = measure_homoclinic_jump(spec, 5e-3, br, I, theta);
  CHECK(std::abs(a.predicted[0]) < 1e-12);
  CHECK(std::abs(a.delta_I[0]) < 1e-2 * 1e-2);
  CHECK(std::abs(b.delta_I[0]) <= std::abs(a.delta_I[0]) / 3.0 + 1e-13);
}

TEST_CASE("trajectory CSV") {
  const SystemSpec spec = two_harmonic_system(0.0);
  const TrajectoryRecord rec =
      integrate_full(spec, make_state(spec, {0.5}, {0.0}, {1.0}, {0.0}), 1.0);
  std::ostringstream os;
  write_trajectory_csv(os, rec);
  CHECK(os.str().rfind("t,p1,q1,I1,phi1\n", 0) == 0);
}
