#include <cmath>
#include <random>

#include <doctest.h>

#include "ksent/kicked.hpp"

using namespace ksent;

namespace {

KickedModel null_kick(int dim, double period) {
  KickedModel m;
  m.name = "null";
  m.dim = dim;
  m.period = period;
  m.kick = [dim](const Vec&) {
    KickValue v;
    v.grad.assign(static_cast<size_t>(dim), 0.0);
    v.hess = SymMatrix(dim);
    return v;
  };
  return m;
}

// Constant-curvature 1D kick: grad f = c q, hess f = c.
KickedModel linear_kick(double c, double period) {
  KickedModel m;
  m.name = "linear";
  m.dim = 1;
  m.period = period;
  m.kick = [c](const Vec& q) {
    KickValue v;
    v.f = 0.5 * c * q[0] * q[0];
    v.grad = {c * q[0]};
    v.hess = SymMatrix(1);
    v.hess.at(0, 0) = c;
    return v;
  };
  return m;
}

}  // namespace

TEST_CASE("kick_step: null kick leaves sigma at zero, free flight is linear") {
  const KickedModel m = null_kick(2, 0.5);
  KickedState s = KickedState::initial({0.0, 1.0}, {1.0, -2.0});
  for (int n = 0; n < 10; ++n) REQUIRE(kick_step(s, m));
  CHECK(s.sigma.max_abs() == 0.0);
  CHECK(s.ks_sum == 0.0);
  CHECK(s.q[0] == doctest::Approx(0.0 + 1.0 * 10 * 0.5).epsilon(1e-14));
  CHECK(s.q[1] == doctest::Approx(1.0 - 2.0 * 10 * 0.5).epsilon(1e-14));
}

TEST_CASE("kick_step: golden fixed point of the constant-curvature map") {
  // hess f = -1, T = 1: sigma iterates 0, 1, 1.5, 1.6, ... -> (1+sqrt 5)/2
  const KickedModel m = linear_kick(-1.0, 1.0);
  KickedState s = KickedState::initial({0.0}, {0.0});
  REQUIRE(kick_step(s, m));
  CHECK(s.sigma.at(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  REQUIRE(kick_step(s, m));
  CHECK(s.sigma.at(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
  REQUIRE(kick_step(s, m));
  CHECK(s.sigma.at(0, 0) == doctest::Approx(1.6).epsilon(1e-15));

  const double phi = 0.5 * (1.0 + std::sqrt(5.0));
  for (int n = 0; n < 60; ++n) REQUIRE(kick_step(s, m));
  CHECK(s.sigma.at(0, 0) == doctest::Approx(phi).epsilon(1e-14));

  // per-step KS increment converges to ln(1 + phi) = ln((3+sqrt 5)/2)
  const double before = s.ks_sum;
  REQUIRE(kick_step(s, m));
  CHECK(s.ks_sum - before == doctest::Approx(std::log(1.0 + phi)).epsilon(1e-13));
}

TEST_CASE("run_kicked: golden value on the rotor's stable symmetry orbit") {
  // q0 = p0 = 0 pins hess = -K cos q = -1 for K = 1, so the iteration is
  // exactly the constant-curvature map; k -> ln((3+sqrt 5)/2).
  const KickedModel m = make_kicked_model("rotor", {.kick_strength = 1.0, .period = 1.0});
  KickedOptions opt;
  opt.n_steps = 1000;
  const KickedEstimate est = run_kicked(m, {0.0}, {0.0}, opt);
  REQUIRE(!est.failed);
  CHECK(std::abs(est.k_window - std::log((3.0 + std::sqrt(5.0)) / 2.0)) <= 1e-6);
}

TEST_CASE("run_kicked: null kick gives k = 0") {
  KickedOptions opt;
  opt.n_steps = 100;
  const KickedEstimate est = run_kicked(null_kick(1, 1.0), {0.0}, {0.1}, opt);
  REQUIRE(!est.failed);
  CHECK(est.k == 0.0);
}

TEST_CASE("kick_step: determinant sign flip is logged, magnitude used") {
  const KickedModel m = linear_kick(0.0, 1.0);
  KickedState s = KickedState::initial({0.0}, {0.0});
  s.sigma.at(0, 0) = -2.0;  // det(1 + sigma T) = -1
  REQUIRE(kick_step(s, m));
  CHECK(s.det_sign_flips == 1);
  CHECK(s.ks_sum == doctest::Approx(0.0).epsilon(1e-15));  // ln|-1| = 0
}

TEST_CASE("kick_step: exactly singular free flight is a degenerate event") {
  const KickedModel m = linear_kick(0.0, 1.0);
  KickedState s = KickedState::initial({0.0}, {0.0});
  s.sigma.at(0, 0) = -1.0;  // det(1 + sigma T) = 0
  CHECK(!kick_step(s, m));
  CHECK(s.degenerate);
  CHECK(s.degenerate_at == 0);
}

TEST_CASE("rational sigma update equals the inverse form where defined") {
  std::mt19937_64 rng(37);
  std::normal_distribution<double> gauss;
  const double T = 0.7;
  for (int trial = 0; trial < 100; ++trial) {
    SymMatrix sigma(3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j <= i; ++j) sigma.at(i, j) = gauss(rng);
    const SymEigen e = sym_eigen(sigma);
    bool invertible = true;
    for (double v : e.values)
      if (std::abs(v) < 0.05 || std::abs(1.0 + T * v) < 0.05) invertible = false;
    if (!invertible) continue;

    // a = sigma (I + T sigma)^-1 via LU solve of (I + T sigma) x = sigma
    Matrix lhs = to_dense(sigma);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) lhs.at(i, j) = (i == j ? 1.0 : 0.0) + T * lhs.at(i, j);
    Matrix x(3, 3);
    REQUIRE(lu_solve(lhs, to_dense(sigma), x));
    const SymMatrix a = symmetrized(x);

    SymMatrix b = sym_inverse(sym_inverse(sigma) + T * SymMatrix::identity(3));
    CHECK((a - b).max_abs() <= 1e-10);
  }
}

TEST_CASE("inter-kick closed form: free-flight Riccati from sigma_n") {
  // sigma' = -sigma^2 between kicks; sigma(t) = (t + sigma_n^-1)^-1.
  // (negative s0 must keep the pole at t = -1/s0 outside [0, 0.5])
  for (double s0 : {0.5, 2.0, -1.0}) {
    double s = s0;
    const double dt = 1e-4;
    const int steps = 5000;  // t = 0.5
    for (int i = 0; i < steps; ++i) {
      const double k1 = -s * s;
      const double s2 = s + 0.5 * dt * k1;
      const double k2 = -s2 * s2;
      const double s3 = s + 0.5 * dt * k2;
      const double k3 = -s3 * s3;
      const double s4 = s + dt * k3;
      const double k4 = -s4 * s4;
      s += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    const double t = steps * dt;
    CHECK(std::abs(s - 1.0 / (t + 1.0 / s0)) <= 1e-8);
  }
}

TEST_CASE("kick_step: rotor tangent map covariant under a 2 pi shift") {
  const KickedModel m = make_kicked_model("rotor", {.kick_strength = 5.0, .period = 1.0});
  KickedState a = KickedState::initial({0.4}, {0.3});
  KickedState b = KickedState::initial({0.4 + 2.0 * 3.14159265358979323846}, {0.3});
  for (int n = 0; n < 15; ++n) {
    REQUIRE(kick_step(a, m));
    REQUIRE(kick_step(b, m));
    CHECK(std::abs(a.sigma.at(0, 0) - b.sigma.at(0, 0)) <= 1e-8 * std::max(1.0, std::abs(a.sigma.at(0, 0))));
    CHECK(std::abs(a.ks_sum - b.ks_sum) <= 1e-8 * std::max(1.0, std::abs(a.ks_sum)));
  }
}

TEST_CASE("run_kicked: escape reported with partial results") {
  KickedOptions opt;
  opt.n_steps = 1000;
  opt.escape_bound = 10.0;
  const KickedEstimate est = run_kicked(null_kick(1, 1.0), {0.0}, {1.0}, opt);
  CHECK(est.failed);
  CHECK(est.n_steps < 1000);
}
