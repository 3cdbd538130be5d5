#include <cmath>
#include <complex>
#include <cstdio>

#include <doctest.h>

#include "ksent/benettin.hpp"
#include "ksent/kicked.hpp"
#include "ksent/quantum.hpp"
#include "ksent/systems.hpp"

using namespace ksent;

namespace {

constexpr double kPi = 3.14159265358979323846;

double max_density_variation(const WaveState& psi) {
  double lo = 1e300, hi = 0.0;
  for (const auto& a : psi.amp) {
    const double d = std::norm(a);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return hi - lo;
}

}  // namespace

TEST_CASE("split_step: K = 0 leaves a momentum eigenstate invariant") {
  RotorParams prm;
  prm.kick_strength = 0.0;
  prm.grid = 256;
  prm.substeps = 4;
  WaveState psi = plane_wave(prm.grid, prm.hbar, 3);
  const WaveState before = psi;
  for (int n = 0; n < 20; ++n) split_step(psi, prm);
  CHECK(max_density_variation(psi) <= 1e-12);
  // amplitudes differ from the start by a global phase only
  const std::complex<double> phase = psi.amp[0] / before.amp[0];
  CHECK(std::abs(std::abs(phase) - 1.0) <= 1e-12);
  for (size_t j = 0; j < psi.amp.size(); ++j)
    CHECK(std::abs(psi.amp[j] - phase * before.amp[j]) <= 1e-10);
}

TEST_CASE("split_step: kick is a pure phase on the uniform state") {
  RotorParams prm;
  prm.kick_strength = 5.0;
  prm.grid = 256;
  WaveState psi = uniform_state(prm.grid, prm.hbar);
  apply_kick(psi, prm.kick_strength);
  CHECK(max_density_variation(psi) <= 1e-14);
  CHECK(std::abs(psi.norm() - 1.0) <= 1e-12);
}

TEST_CASE("split_step: substep count does not change the evolution") {
  RotorParams a, b;
  a.kick_strength = b.kick_strength = 5.0;
  a.grid = b.grid = 512;
  a.substeps = 8;
  b.substeps = 16;
  WaveState pa = gaussian_state(a.grid, a.hbar, kPi, 0.4);
  WaveState pb = pa;
  for (int n = 0; n < 20; ++n) {
    split_step(pa, a);
    split_step(pb, b);
  }
  for (size_t j = 0; j < pa.amp.size(); ++j) CHECK(std::abs(pa.amp[j] - pb.amp[j]) <= 1e-10);
}

TEST_CASE("unitarity: norm drift below 1e-10 over 1e4 periods") {
  RotorParams prm;
  prm.kick_strength = 5.0;
  prm.grid = 2048;
  prm.substeps = 1;
  WaveState psi = gaussian_state(prm.grid, prm.hbar, kPi, 0.4);
  double drift = 0.0;
  for (int n = 0; n < 10000; ++n) {
    split_step(psi, prm);
    drift = std::max(drift, std::abs(psi.norm() - 1.0));
  }
  CHECK(drift <= 1e-10);
}

TEST_CASE("madelung_fields: plane wave") {
  const int m = 4;
  WaveState psi = plane_wave(512, 1.0, m);
  const MadelungFields f = madelung_fields(psi);
  for (int j = 0; j < 512; ++j) {
    CHECK(!f.node[static_cast<size_t>(j)]);
    CHECK(std::abs(f.v[static_cast<size_t>(j)] - psi.hbar * m) <= 1e-10);
    CHECK(std::abs(f.lap_s[static_cast<size_t>(j)]) <= 1e-10);
    CHECK(std::abs(f.logdens[static_cast<size_t>(j)] - f.logdens[0]) <= 1e-10);
  }
}

TEST_CASE("madelung_fields: real standing wave has zero velocity, masked nodes") {
  // (e^{imq} + e^{-imq})/sqrt 2: real, nodes at cos mq = 0
  const int grid = 512, m = 2;
  WaveState psi = uniform_state(grid, 1.0);
  for (int j = 0; j < grid; ++j) {
    const double q = 2.0 * kPi * j / grid;
    psi.amp[static_cast<size_t>(j)] = std::sqrt(1.0 / kPi) * std::cos(m * q);
  }
  const MadelungFields f = madelung_fields(psi);
  int masked = 0;
  for (int j = 0; j < grid; ++j) {
    if (f.node[static_cast<size_t>(j)]) {
      ++masked;
      continue;
    }
    CHECK(std::abs(f.v[static_cast<size_t>(j)]) <= 1e-6);
  }
  CHECK(masked > 0);
  CHECK(masked < grid / 8);
}

TEST_CASE("madelung_fields: finite-difference oracle on an evolved packet") {
  RotorParams prm;
  prm.kick_strength = 2.0;
  prm.grid = 4096;
  prm.substeps = 4;
  WaveState psi = gaussian_state(prm.grid, prm.hbar, kPi, 0.6);
  for (int n = 0; n < 3; ++n) split_step(psi, prm);

  const MadelungFields f = madelung_fields(psi);
  const double dq = psi.dq();
  const int n = prm.grid;
  // unwrapped phase S/hbar from arg psi
  std::vector<double> s(static_cast<size_t>(n));
  double carry = 0.0, prev = std::arg(psi.amp[0]);
  s[0] = prev;
  for (int j = 1; j < n; ++j) {
    double a = std::arg(psi.amp[static_cast<size_t>(j)]);
    double d = a - prev;
    while (d > kPi) d -= 2.0 * kPi;
    while (d < -kPi) d += 2.0 * kPi;
    carry += d;
    s[static_cast<size_t>(j)] = s[0] + carry;
    prev = a;
  }
  int compared = 0;
  for (int j = 3; j < n - 3; ++j) {
    bool near_node = false;
    for (int o = -3; o <= 3; ++o)
      if (f.node[static_cast<size_t>(j + o)]) near_node = true;
    if (near_node) continue;
    const auto S = [&](int i) { return s[static_cast<size_t>(i)]; };
    // 6th-order central stencils
    const double v_fd = psi.hbar *
                        (-S(j - 3) + 9.0 * S(j - 2) - 45.0 * S(j - 1) + 45.0 * S(j + 1) -
                         9.0 * S(j + 2) + S(j + 3)) /
                        (60.0 * dq);
    const double lap_fd = psi.hbar *
                          (2.0 * S(j - 3) - 27.0 * S(j - 2) + 270.0 * S(j - 1) - 490.0 * S(j) +
                           270.0 * S(j + 1) - 27.0 * S(j + 2) + 2.0 * S(j + 3)) /
                          (180.0 * dq * dq);
    const double vscale = std::max(1.0, std::abs(f.v[static_cast<size_t>(j)]));
    const double lscale = std::max(1.0, std::abs(f.lap_s[static_cast<size_t>(j)]));
    CHECK(std::abs(v_fd - f.v[static_cast<size_t>(j)]) / vscale <= 1e-6);
    CHECK(std::abs(lap_fd - f.lap_s[static_cast<size_t>(j)]) / lscale <= 1e-6);
    ++compared;
  }
  CHECK(compared > n / 2);
}

TEST_CASE("trace_mb_orbit: plane wave rides at constant velocity") {
  RotorParams prm;
  prm.kick_strength = 0.0;
  prm.grid = 256;
  prm.substeps = 8;
  const int m = 2;
  WaveState psi = plane_wave(prm.grid, prm.hbar, m);
  const MbOrbit orbit = trace_mb_orbit(psi, prm, 1.0, 20);
  REQUIRE(!orbit.aborted);
  const double expect = 1.0 + prm.hbar * m * orbit.duration();
  CHECK(std::abs(orbit.q_unwrapped.back() - expect) <= 1e-8);
}

TEST_CASE("trace_mb_orbit: free Gaussian follows the analytic spreading field") {
  RotorParams prm;
  prm.kick_strength = 0.0;
  prm.hbar = 0.05;
  prm.grid = 1024;
  prm.substeps = 32;
  const double w0 = 0.2, c = kPi, q0 = c + 0.1;
  WaveState psi = gaussian_state(prm.grid, prm.hbar, c, w0);
  const MbOrbit orbit = trace_mb_orbit(psi, prm, q0, 2);
  REQUIRE(!orbit.aborted);
  const auto width = [&](double t) {
    const double r = prm.hbar * t / (2.0 * w0 * w0);
    return w0 * std::sqrt(1.0 + r * r);
  };
  for (size_t i = 0; i < orbit.times.size(); ++i) {
    const double t = orbit.times[i];
    const double expect = c + (q0 - c) * width(t) / w0;
    CHECK(std::abs(orbit.q_unwrapped[i] - expect) <= 1e-4);
  }

  // central orbit: density decay equals the width-growth rate
  const MbOrbit central = trace_mb_orbit(psi, prm, c, 2);
  REQUIRE(!central.aborted);
  const double t_end = central.duration();
  const double analytic = std::log(width(t_end) / w0) / t_end;
  CHECK(std::abs(density_decay_ks(central) - analytic) <= 1e-4);
}

TEST_CASE("quantum_ks: plane-wave orbit averages to zero, short windows rejected") {
  RotorParams prm;
  prm.kick_strength = 0.0;
  prm.grid = 256;
  prm.substeps = 4;
  WaveState psi = plane_wave(prm.grid, prm.hbar, 1);
  const MbOrbit orbit = trace_mb_orbit(psi, prm, 0.5, 20);
  REQUIRE(!orbit.aborted);
  CHECK(std::abs(quantum_ks(orbit, prm.period)) <= 1e-10);
  CHECK(std::abs(density_decay_ks(orbit)) <= 1e-10);

  const MbOrbit tiny = trace_mb_orbit(psi, prm, 0.5, 5);
  CHECK_THROWS(quantum_ks(tiny, prm.period));
}

TEST_CASE("classical_rotor_orbit: uniform rotation at K = 0, kicked-engine equality") {
  const ClassicalOrbit free_orbit = classical_rotor_orbit(0.3, 0.7, 0.0, 1.0, 50);
  for (size_t i = 0; i < free_orbit.q_unwrapped.size(); ++i)
    CHECK(std::abs(free_orbit.q_unwrapped[i] - (0.3 + 0.7 * static_cast<double>(i))) <= 1e-12);

  // bit-for-bit match with the kicked engine's 1D map
  const double K = 5.0, T = 1.0;
  const ClassicalOrbit orbit = classical_rotor_orbit(0.4, 0.3, K, T, 100);
  const KickedModel m = make_kicked_model("rotor", {.kick_strength = K, .period = T});
  KickedState st = KickedState::initial({0.4}, {0.3});
  for (size_t i = 0; i < 100; ++i) {
    CHECK(orbit.q_unwrapped[i] == st.q[0]);
    CHECK(orbit.p[i] == st.p[0]);
    REQUIRE(kick_step(st, m));
  }
}

TEST_CASE("MB orbits do not separate exponentially; the classical map does") {
  RotorParams prm;
  prm.kick_strength = 5.0;
  prm.grid = 1024;
  prm.substeps = 32;
  WaveState psi = gaussian_state(prm.grid, prm.hbar, kPi, 0.4);

  RotorRunRequest req;
  req.psi0 = psi;
  req.params = prm;
  req.n_periods = 60;
  req.mb_starts = {2.5, 2.5 + 1e-6};
  req.trace.rtol = 1e-7;
  req.trace.atol = 1e-8;
  const RotorRunResult run = run_rotor(req);
  REQUIRE(run.orbits.size() == 2);
  REQUIRE(!run.orbits[0].aborted);
  REQUIRE(!run.orbits[1].aborted);

  // least-squares slope of log separation vs time
  const auto& a = run.orbits[0];
  const auto& b = run.orbits[1];
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  long cnt = 0;
  for (size_t i = 0; i < a.times.size(); ++i) {
    const double sep = std::abs(a.q_unwrapped[i] - b.q_unwrapped[i]);
    if (sep <= 0.0) continue;
    const double y = std::log(sep);
    st += a.times[i];
    sy += y;
    stt += a.times[i] * a.times[i];
    sty += a.times[i] * y;
    ++cnt;
  }
  const double slope = (cnt * sty - st * sy) / (cnt * stt - st * st);
  CHECK(slope <= 0.05);

  // classical contrast: standard-map exponent at K = 5 is large and positive
  const KickedModel m = make_kicked_model("rotor", {.kick_strength = 5.0, .period = 1.0});
  KickedBenettinOptions bopt;
  bopt.n_steps = 20000;
  const SpectrumResult r = spectrum_kicked(m, {2.5}, {0.0}, bopt);
  REQUIRE(!r.failed);
  CHECK(r.exponents[0] >= 0.5);
}

TEST_CASE("entropy series: uniform state is stationary at ln 2 pi") {
  RotorParams prm;
  prm.kick_strength = 0.0;
  prm.grid = 256;
  prm.substeps = 1;
  RotorRunRequest req;
  req.psi0 = uniform_state(prm.grid, prm.hbar);
  req.params = prm;
  req.n_periods = 20;
  const RotorRunResult run = run_rotor(req);
  for (double s : run.entropy.entropy) CHECK(std::abs(s - std::log(2.0 * kPi)) <= 1e-10);
  CHECK(std::abs(run.entropy.growth_rate) <= 1e-10);
}

TEST_CASE("entropy series: kicked packet develops structure, bound respected") {
  RotorParams prm;
  prm.kick_strength = 5.0;
  prm.grid = 1024;
  prm.substeps = 1;
  RotorRunRequest req;
  req.psi0 = gaussian_state(prm.grid, prm.hbar, kPi, 0.4);
  req.params = prm;
  req.n_periods = 20;
  const RotorRunResult run = run_rotor(req);
  CHECK(run.entropy.entropy.back() > run.entropy.entropy.front());
  CHECK(run.entropy.growth_rate > 0.0);
  for (double s : run.entropy.entropy) CHECK(s <= std::log(2.0 * kPi) + 1e-10);
}

TEST_CASE("hybrid_ks: K = 0 plane wave over the uniform classical orbit is zero") {
  RotorParams prm;
  prm.kick_strength = 0.0;
  prm.grid = 256;
  prm.substeps = 1;
  WaveState psi = plane_wave(prm.grid, prm.hbar, 1);
  const HybridEstimate h = hybrid_ks(psi, prm, 0.3, 0.7, 50);
  CHECK(std::abs(h.k) <= 1e-10);
  CHECK(h.masked_fraction == 0.0);
  CHECK(!h.low_confidence);
}

TEST_CASE("hybrid_ks: sampling the MB orbit itself reproduces quantum_ks") {
  // In the regular regime lap S T << 1 the log expansion factor reduces to
  // lap S, so feeding the hybrid sampler the MB trajectory must reproduce
  // the per-orbit invariant.
  RotorParams prm;
  prm.kick_strength = 0.0;
  prm.hbar = 0.05;
  prm.period = 0.1;
  prm.grid = 1024;
  prm.substeps = 8;
  WaveState psi = gaussian_state(prm.grid, prm.hbar, kPi, 0.3);
  const long periods = 200;
  const MbOrbit orbit = trace_mb_orbit(psi, prm, kPi, periods);
  REQUIRE(!orbit.aborted);

  // replay the MB positions through the kick-synchronized sampler
  WaveState cur = psi;
  double sum = 0.0;
  long count = 0;
  for (long n = 0; n < periods; ++n) {
    const SpectralWave w = analyze(cur);
    // orbit sample at t = n * period (substeps samples per period + start)
    const size_t idx = static_cast<size_t>(n * prm.substeps);
    const FieldPoint f = madelung_at(w, orbit.q[idx]);
    REQUIRE(!f.node);
    sum += std::log(std::abs(1.0 + f.lap_s * prm.period));
    ++count;
    split_step(cur, prm);
  }
  const double k_replayed = sum / (static_cast<double>(count) * prm.period);
  CHECK(std::abs(k_replayed - quantum_ks(orbit, prm.period)) <= 5e-3);
}

TEST_CASE("evolution record: re-tracing reproduces the in-run orbit") {
  RotorParams prm;
  prm.kick_strength = 5.0;
  prm.grid = 512;
  prm.substeps = 16;
  RotorRunRequest req;
  req.psi0 = gaussian_state(prm.grid, prm.hbar, kPi, 0.4);
  req.params = prm;
  req.n_periods = 15;
  req.mb_starts = {2.0};
  req.record_path = "test_record.bin";
  const RotorRunResult run = run_rotor(req);
  REQUIRE(run.orbits.size() == 1);
  REQUIRE(!run.orbits[0].aborted);

  const RecordReader reader("test_record.bin");
  CHECK(reader.params.grid == prm.grid);
  CHECK(reader.params.substeps == prm.substeps);
  CHECK(reader.params.kick_strength == prm.kick_strength);

  const std::vector<MbOrbit> replayed = trace_from_record("test_record.bin", {2.0});
  REQUIRE(replayed.size() == 1);
  REQUIRE(replayed[0].times.size() == run.orbits[0].times.size());
  for (size_t i = 0; i < replayed[0].times.size(); ++i)
    CHECK(std::abs(replayed[0].q_unwrapped[i] - run.orbits[0].q_unwrapped[i]) <= 1e-9);
  std::remove("test_record.bin");
}

TEST_CASE("sample_positions: deterministic, in range, density-weighted") {
  WaveState psi = gaussian_state(1024, 1.0, kPi, 0.3);
  const std::vector<double> a = sample_positions(psi, 200, 99);
  const std::vector<double> b = sample_positions(psi, 200, 99);
  REQUIRE(a.size() == 200);
  CHECK(a == b);
  int near = 0;
  for (double q : a) {
    CHECK(q >= 0.0);
    CHECK(q < 2.0 * kPi);
    if (std::abs(q - kPi) < 1.0) ++near;
  }
  CHECK(near > 180);  // 0.3-width Gaussian: essentially all mass within +-1
}
