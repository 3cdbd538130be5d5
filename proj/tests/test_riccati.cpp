#include <cmath>
#include <random>

#include <doctest.h>

#include "ksent/riccati.hpp"

using namespace ksent;

namespace {

constexpr double kPi = 3.14159265358979323846;

HessianBlocks standard_blocks(const SymMatrix& k11) {
  HessianBlocks b;
  b.k11 = k11;
  b.k12 = Matrix(k11.order(), k11.order());
  b.k22 = SymMatrix::identity(k11.order());
  b.k12_zero = true;
  return b;
}

SymMatrix scalar1(double v) {
  SymMatrix m(1);
  m.at(0, 0) = v;
  return m;
}

}  // namespace

TEST_CASE("sigma_rhs: sigma = 0 gives -K11") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> gauss;
  SymMatrix k11(3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j <= i; ++j) k11.at(i, j) = gauss(rng);
  const SymMatrix d = sigma_rhs(SymMatrix(3), standard_blocks(k11));
  CHECK((d + k11).max_abs() <= 1e-15);
}

TEST_CASE("sigma_rhs: scalar inverted oscillator is 1 - sigma^2") {
  const HessianBlocks b = standard_blocks(scalar1(-1.0));
  for (double s : {0.0, 0.3, 0.9, -2.0}) {
    const SymMatrix d = sigma_rhs(scalar1(s), b);
    CHECK(d.at(0, 0) == doctest::Approx(1.0 - s * s).epsilon(1e-14));
  }
}

TEST_CASE("tau_rhs: tau = 0 crosses the pole with slope I") {
  const SymMatrix d = tau_rhs(SymMatrix(2), standard_blocks(SymMatrix::identity(2)));
  CHECK((d - SymMatrix::identity(2)).max_abs() <= 1e-15);
}

TEST_CASE("tau_rhs: scalar harmonic is 1 + tau^2") {
  const HessianBlocks b = standard_blocks(scalar1(1.0));
  for (double t : {0.0, 0.5, -1.7}) {
    const SymMatrix d = tau_rhs(scalar1(t), b);
    CHECK(d.at(0, 0) == doctest::Approx(1.0 + t * t).epsilon(1e-14));
  }
}

TEST_CASE("tau_rhs defining identity: tau' = -t sigma' t for tau = sigma^-1") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 50; ++trial) {
    SymMatrix sigma(3), k11(3);
    Matrix k12(3, 3);
    SymMatrix k22raw(3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j <= i; ++j) {
        sigma.at(i, j) = gauss(rng);
        k11.at(i, j) = gauss(rng);
        k22raw.at(i, j) = gauss(rng);
      }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) k12.at(i, j) = gauss(rng);
    HessianBlocks b;
    b.k11 = k11;
    b.k12 = k12;
    b.k22 = k22raw;
    b.k12_zero = false;

    const SymEigen e = sym_eigen(sigma);
    bool ok = true;
    for (double v : e.values)
      if (std::abs(v) < 0.05) ok = false;
    if (!ok) continue;

    const SymMatrix tau = sym_inverse(sigma);
    const SymMatrix lhs = tau_rhs(tau, b);
    const Matrix rhs_m = mul(mul(tau, sigma_rhs(sigma, b)), to_dense(tau));
    SymMatrix rhs = symmetrized(rhs_m);
    rhs *= -1.0;
    CHECK((lhs - rhs).max_abs() <= 1e-10);
  }
}

TEST_CASE("ks_integrand: pinned scalar cases") {
  // sigma = 0
  CHECK(ks_integrand(SigmaRep::direct, SymMatrix(3), standard_blocks(SymMatrix::identity(3))) ==
        doctest::Approx(0.0).epsilon(1e-15));

  // 1D inverted oscillator along sigma = tanh t: 2 tanh t / (1 + tanh^2 t)
  const HessianBlocks inv = standard_blocks(scalar1(-1.0));
  for (double t : {0.1, 0.5, 1.0, 3.0, 10.0}) {
    const double s = std::tanh(t);
    CHECK(ks_integrand(SigmaRep::direct, scalar1(s), inv) ==
          doctest::Approx(2.0 * s / (1.0 + s * s)).epsilon(1e-13));
  }

  // isotropic harmonic (K11 = K22): integrand identically zero
  const HessianBlocks iso = standard_blocks(SymMatrix::identity(2));
  std::mt19937_64 rng(31);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 20; ++trial) {
    SymMatrix s(2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j <= i; ++j) s.at(i, j) = gauss(rng);
    CHECK(std::abs(ks_integrand(SigmaRep::direct, s, iso)) <= 1e-14);
  }
}

TEST_CASE("maybe_switch: no-op for small sigma, round-trip involution") {
  RiccatiOptions opt;
  SigmaState state = SigmaState::initial(2);
  state.matrix.at(0, 0) = 0.5;
  state.matrix.at(1, 1) = -0.2;
  const SymMatrix before = state.matrix;
  maybe_switch(state, 1.0, opt);
  CHECK(state.rep == SigmaRep::direct);
  CHECK((state.matrix - before).max_abs() == 0.0);

  // force a switch out and straight back: sigma recovered to 1e-10
  state.matrix.at(0, 0) = 2e3;
  const SymMatrix big = state.matrix;
  maybe_switch(state, 2.0, opt);
  REQUIRE(state.rep == SigmaRep::inverted);
  opt.hysteresis = 0.1;  // make the return condition immediate
  maybe_switch(state, 3.0, opt);
  REQUIRE(state.rep == SigmaRep::direct);
  CHECK((state.matrix - big).max_abs() / big.max_abs() <= 1e-10);
  CHECK(state.switch_log.size() == 2);
}

TEST_CASE("evolve_ks: free particle has k = 0 exactly") {
  const HamiltonianModel m = make_model("free");
  RiccatiOptions opt;
  opt.t_max = 10.0;
  opt.dt = 1e-2;
  const KsEstimate est = evolve_ks(m, {{0.0}, {1.0}, 0.0}, opt);
  CHECK(!est.failed);
  CHECK(est.k == 0.0);
  CHECK(est.integral == 0.0);
}

TEST_CASE("evolve_ks: inverted oscillator reaches k = 1 to 1e-3") {
  const HamiltonianModel m = make_model("inverted-1d");
  RiccatiOptions opt;
  opt.t_max = 100.0;
  opt.dt = 1e-3;
  opt.sample_every = 0.0;
  opt.trace_sigma = true;
  const KsEstimate est = evolve_ks(m, {{0.0}, {0.0}, 0.0}, opt);
  REQUIRE(!est.failed);
  CHECK(std::abs(est.k_window - 1.0) <= 1e-3);

  // sigma follows tanh t
  for (const auto& [t, s] : est.sigma_trace) {
    if (t < 0.5 || t > 20.0) continue;
    CHECK(std::abs(s - std::tanh(t)) <= 1e-8);
  }
}

TEST_CASE("evolve_ks: harmonic oscillator, poles and the tangent law") {
  const double omega = 1.0;
  const HamiltonianModel m = make_model("quadratic", {.omega = omega});
  RiccatiOptions opt;
  opt.t_max = 10.0;
  opt.dt = 1e-4;
  opt.sample_every = 0.0;
  opt.trace_sigma = true;
  const KsEstimate est = evolve_ks(m, {{1.0}, {0.0}, 0.0}, opt);
  REQUIRE(!est.failed);

  // pole events at t = (m - 1/2) pi within one step
  REQUIRE(est.poles.size() == 3);
  for (size_t i = 0; i < est.poles.size(); ++i) {
    const double expected = (static_cast<double>(i) + 0.5) * kPi;
    CHECK(std::abs(est.poles[i].t - expected) <= opt.dt);
  }

  // sigma(t) = -omega tan(omega t) away from the poles, to 1e-6
  int compared = 0;
  for (const auto& [t, s] : est.sigma_trace) {
    const double ref = -omega * std::tan(omega * t);
    if (std::abs(ref) > 50.0) continue;  // skip the pole neighborhoods
    ++compared;
    CHECK(std::abs(s - ref) / std::max(1.0, std::abs(ref)) <= 1e-6);
  }
  CHECK(compared > 50000);

  // k decays toward zero
  CHECK(std::abs(est.k) <= 0.5);
}

TEST_CASE("evolve_ks: orbit escape reported as failure with partials") {
  // inverted oscillator started on the unstable manifold escapes
  const HamiltonianModel m = make_model("inverted-1d");
  RiccatiOptions opt;
  opt.t_max = 100.0;
  opt.dt = 1e-3;
  opt.escape_bound = 1e3;
  const KsEstimate est = evolve_ks(m, {{1.0}, {1.0}, 0.0}, opt);
  CHECK(est.failed);
  CHECK(!est.error.empty());
  CHECK(est.elapsed > 0.0);
}

TEST_CASE("evolve_ks: energy drift reported and small for the quartic") {
  const HamiltonianModel m = make_model("quartic3");
  RiccatiOptions opt;
  opt.t_max = 20.0;
  opt.dt = 1e-3;
  opt.sample_every = 1.0;
  const KsEstimate est = evolve_ks(m, {{0.3, -0.2, 0.1}, {0.9, 0.4, -0.5}, 0.0}, opt);
  REQUIRE(!est.failed);
  CHECK(std::abs(est.energy_drift) <= 1e-8);
  // sample series monotone in t
  for (size_t i = 1; i < est.samples.size(); ++i)
    CHECK(est.samples[i].t > est.samples[i - 1].t);
}
