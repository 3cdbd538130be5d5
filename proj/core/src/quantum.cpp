#include "ksent/quantum.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <stdexcept>

namespace ksent {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Cached FFTW plans per grid size. Evolution is sequential per run, so no
// locking here; plans are reused through fftw_execute_dft.
struct FftPlans {
  fftw_complex* buf = nullptr;
  fftw_plan fwd = nullptr, bwd = nullptr;
  int n = 0;

  explicit FftPlans(int size) : n(size) {
    buf = fftw_alloc_complex(static_cast<size_t>(n));
    fwd = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_1d(n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~FftPlans() {
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
    fftw_free(buf);
  }
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;
};

FftPlans& plans_for(int n) {
  static std::map<int, std::unique_ptr<FftPlans>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, std::make_unique<FftPlans>(n)).first;
  return *it->second;
}

void fft(std::vector<std::complex<double>>& data, bool forward) {
  FftPlans& pl = plans_for(static_cast<int>(data.size()));
  auto* raw = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(forward ? pl.fwd : pl.bwd, raw, raw);
  (void)raw;
}

}  // namespace

double WaveState::dq() const { return kTwoPi / grid; }

double WaveState::norm() const {
  double s = 0.0;
  for (const auto& a : amp) s += std::norm(a);
  return s * dq();
}

double WaveState::entropy() const {
  double s = 0.0;
  const double h = dq();
  for (const auto& a : amp) {
    const double rho = std::norm(a);
    if (rho > 0.0) s -= rho * std::log(rho) * h;
  }
  return s;
}

WaveState uniform_state(int grid, double hbar) {
  if (!power_of_two(grid)) throw std::invalid_argument("grid must be a power of two");
  WaveState w;
  w.grid = grid;
  w.hbar = hbar;
  w.amp.assign(static_cast<size_t>(grid), std::complex<double>(1.0 / std::sqrt(kTwoPi), 0.0));
  return w;
}

WaveState plane_wave(int grid, double hbar, int wavenumber) {
  WaveState w = uniform_state(grid, hbar);
  for (int j = 0; j < grid; ++j) {
    const double q = kTwoPi * j / grid;
    w.amp[static_cast<size_t>(j)] *= std::polar(1.0, wavenumber * q);
  }
  return w;
}

WaveState gaussian_state(int grid, double hbar, double center, double width) {
  if (!power_of_two(grid)) throw std::invalid_argument("grid must be a power of two");
  WaveState w;
  w.grid = grid;
  w.hbar = hbar;
  w.amp.resize(static_cast<size_t>(grid));
  for (int j = 0; j < grid; ++j) {
    const double q = kTwoPi * j / grid;
    double a = 0.0;
    for (int n = -4; n <= 4; ++n) {
      const double d = q - center + kTwoPi * n;
      a += std::exp(-d * d / (4.0 * width * width));
    }
    w.amp[static_cast<size_t>(j)] = a;
  }
  const double n0 = std::sqrt(w.norm());
  for (auto& a : w.amp) a /= n0;
  return w;
}

void apply_kick(WaveState& psi, double kick_strength) {
  for (int j = 0; j < psi.grid; ++j) {
    const double q = kTwoPi * j / psi.grid;
    psi.amp[static_cast<size_t>(j)] *= std::polar(1.0, -kick_strength * std::cos(q) / psi.hbar);
  }
}

void free_flight(WaveState& psi, double tau) {
  const int m = psi.grid;
  fft(psi.amp, true);
  for (int k = 0; k < m; ++k) {
    const int wn = k < m / 2 ? k : k - m;
    psi.amp[static_cast<size_t>(k)] *=
        std::polar(1.0 / m, -0.5 * psi.hbar * static_cast<double>(wn) * wn * tau);
  }
  fft(psi.amp, false);
  psi.t += tau;
}

void split_step(WaveState& psi, const RotorParams& params,
                const std::function<void(int, const WaveState&)>& on_substep) {
  const double tau = params.period / params.substeps;
  for (int j = 1; j <= params.substeps; ++j) {
    free_flight(psi, tau);
    if (on_substep) on_substep(j, psi);
  }
  apply_kick(psi, params.kick_strength);
}

SpectralWave analyze(const WaveState& psi, double band_cut) {
  const int m = psi.grid;
  std::vector<std::complex<double>> c = psi.amp;
  fft(c, true);
  for (auto& x : c) x /= static_cast<double>(m);

  double max_c = 0.0;
  for (const auto& x : c) max_c = std::max(max_c, std::abs(x));
  const double cut = band_cut * max_c;

  // contiguous significant band in wavenumber order [-m/2, m/2)
  int lo = m / 2 - 1, hi = -m / 2;
  for (int k = 0; k < m; ++k) {
    const int wn = k < m / 2 ? k : k - m;
    if (std::abs(c[static_cast<size_t>(k)]) > cut) {
      lo = std::min(lo, wn);
      hi = std::max(hi, wn);
    }
  }
  if (hi < lo) { lo = 0; hi = 0; }

  SpectralWave w;
  w.grid = m;
  w.hbar = psi.hbar;
  w.t = psi.t;
  w.m_lo = lo;
  w.coef.resize(static_cast<size_t>(hi - lo + 1));
  for (int wn = lo; wn <= hi; ++wn)
    w.coef[static_cast<size_t>(wn - lo)] = c[static_cast<size_t>(wn >= 0 ? wn : wn + m)];
  for (const auto& a : psi.amp) w.peak_density = std::max(w.peak_density, std::norm(a));
  return w;
}

void SpectralWave::eval(double q, std::complex<double>& psi, std::complex<double>& dpsi,
                        std::complex<double>& d2psi) const {
  const std::complex<double> z = std::polar(1.0, q);
  std::complex<double> w = std::polar(1.0, m_lo * q);
  psi = dpsi = d2psi = 0.0;
  for (size_t i = 0; i < coef.size(); ++i) {
    const double m = static_cast<double>(m_lo) + static_cast<double>(i);
    const std::complex<double> term = coef[i] * w;
    psi += term;
    dpsi += std::complex<double>(0.0, m) * term;
    d2psi -= m * m * term;
    w *= z;
  }
}

void SpectralWave::eval_at(double q, double dt, std::complex<double>& psi,
                           std::complex<double>& dpsi, std::complex<double>& d2psi) const {
  if (dt == 0.0) {
    eval(q, psi, dpsi, d2psi);
    return;
  }
  // Free flight rotates each mode by exp(-i alpha m^2), alpha = hbar dt/2.
  // The combined phase m q - alpha m^2 is quadratic in m, so consecutive
  // modes differ by a geometric factor: w_{m+1} = w_m g_m, g_{m+1} = g_m r.
  const double alpha = 0.5 * hbar * dt;
  const double m0 = static_cast<double>(m_lo);
  std::complex<double> w = std::polar(1.0, m0 * q - alpha * m0 * m0);
  std::complex<double> g = std::polar(1.0, q - alpha * (2.0 * m0 + 1.0));
  const std::complex<double> r = std::polar(1.0, -2.0 * alpha);
  psi = dpsi = d2psi = 0.0;
  for (size_t i = 0; i < coef.size(); ++i) {
    const double m = m0 + static_cast<double>(i);
    const std::complex<double> term = coef[i] * w;
    psi += term;
    dpsi += std::complex<double>(0.0, m) * term;
    d2psi -= m * m * term;
    w *= g;
    g *= r;
  }
}

namespace {

FieldPoint fields_from(const SpectralWave& w, const std::complex<double>& psi,
                       const std::complex<double>& dpsi, const std::complex<double>& d2psi,
                       double node_epsilon) {
  FieldPoint f;
  const double rho = std::norm(psi);
  if (rho < node_epsilon * w.peak_density || rho == 0.0) {
    f.node = true;
    f.logdens = rho > 0.0 ? std::log(rho) : -std::numeric_limits<double>::infinity();
    return f;
  }
  const std::complex<double> r = dpsi / psi;
  f.v = w.hbar * r.imag();
  f.lap_s = w.hbar * (d2psi / psi - r * r).imag();
  f.logdens = std::log(rho);
  return f;
}

}  // namespace

FieldPoint madelung_at_time(const SpectralWave& w, double q, double dt, double node_epsilon) {
  std::complex<double> psi, dpsi, d2psi;
  w.eval_at(q, dt, psi, dpsi, d2psi);
  return fields_from(w, psi, dpsi, d2psi, node_epsilon);
}

FieldPoint madelung_at(const SpectralWave& w, double q, double node_epsilon) {
  std::complex<double> psi, dpsi, d2psi;
  w.eval(q, psi, dpsi, d2psi);
  return fields_from(w, psi, dpsi, d2psi, node_epsilon);
}

MadelungFields madelung_fields(const WaveState& psi, double node_epsilon) {
  const int m = psi.grid;
  std::vector<std::complex<double>> c = psi.amp, d1, d2;
  fft(c, true);
  for (auto& x : c) x /= static_cast<double>(m);
  d1.resize(c.size());
  d2.resize(c.size());
  for (int k = 0; k < m; ++k) {
    const int wn = k < m / 2 ? k : k - m;
    d1[static_cast<size_t>(k)] = std::complex<double>(0.0, wn) * c[static_cast<size_t>(k)];
    d2[static_cast<size_t>(k)] = -static_cast<double>(wn) * wn * c[static_cast<size_t>(k)];
  }
  fft(d1, false);
  fft(d2, false);

  double peak = 0.0;
  for (const auto& a : psi.amp) peak = std::max(peak, std::norm(a));

  MadelungFields f;
  f.v.resize(static_cast<size_t>(m));
  f.lap_s.resize(static_cast<size_t>(m));
  f.logdens.resize(static_cast<size_t>(m));
  f.node.resize(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j) {
    const std::complex<double> psi_j = psi.amp[static_cast<size_t>(j)];
    const double rho = std::norm(psi_j);
    const bool node = rho < node_epsilon * peak || rho == 0.0;
    f.node[static_cast<size_t>(j)] = node;
    f.logdens[static_cast<size_t>(j)] = rho > 0.0 ? std::log(rho) : -std::numeric_limits<double>::infinity();
    if (node) {
      f.v[static_cast<size_t>(j)] = 0.0;
      f.lap_s[static_cast<size_t>(j)] = 0.0;
      continue;
    }
    const std::complex<double> r = d1[static_cast<size_t>(j)] / psi_j;
    f.v[static_cast<size_t>(j)] = psi.hbar * r.imag();
    f.lap_s[static_cast<size_t>(j)] =
        psi.hbar * (d2[static_cast<size_t>(j)] / psi_j - r * r).imag();
  }
  return f;
}

double quantum_ks(const MbOrbit& orbit, double period) {
  if (orbit.duration() < 10.0 * period)
    throw std::invalid_argument("quantum_ks: averaging window shorter than 10 kick periods");
  for (bool n : orbit.node_flags)
    if (n) throw std::invalid_argument("quantum_ks: orbit has node-flagged samples in the window");
  return orbit.lap_s_integral.back() / orbit.duration();
}

std::vector<std::pair<double, double>> quantum_ks_series(const MbOrbit& orbit) {
  std::vector<std::pair<double, double>> out;
  for (size_t i = 1; i < orbit.times.size(); ++i) {
    const double dt = orbit.times[i] - orbit.times.front();
    if (dt > 0.0) out.emplace_back(orbit.times[i], orbit.lap_s_integral[i] / dt);
  }
  return out;
}

double density_decay_ks(const MbOrbit& orbit) {
  if (orbit.times.size() < 2) throw std::invalid_argument("density_decay_ks: empty orbit");
  if (orbit.node_flags.front())
    throw std::runtime_error("density_decay_ks: start point at node, t=" +
                             std::to_string(orbit.times.front()));
  if (orbit.node_flags.back())
    throw std::runtime_error("density_decay_ks: endpoint at node, t=" +
                             std::to_string(orbit.times.back()));
  return -(orbit.logdens.back() - orbit.logdens.front()) / orbit.duration();
}

ClassicalOrbit classical_rotor_orbit(double q0, double p0, double kick_strength, double period,
                                     long n_steps) {
  ClassicalOrbit o;
  o.q_wrapped.reserve(static_cast<size_t>(n_steps) + 1);
  o.q_unwrapped.reserve(static_cast<size_t>(n_steps) + 1);
  o.p.reserve(static_cast<size_t>(n_steps) + 1);
  double q = q0, p = p0;
  auto wrap = [](double x) {
    double w = std::fmod(x, kTwoPi);
    return w < 0.0 ? w + kTwoPi : w;
  };
  o.q_wrapped.push_back(wrap(q));
  o.q_unwrapped.push_back(q);
  o.p.push_back(p);
  for (long n = 0; n < n_steps; ++n) {
    q += p * period;
    p += kick_strength * std::sin(q);
    o.q_wrapped.push_back(wrap(q));
    o.q_unwrapped.push_back(q);
    o.p.push_back(p);
  }
  return o;
}

namespace {

struct OrbitState {
  double q = 0.0;        // unwrapped
  double lap_int = 0.0;  // accumulated integral of lap S
  double h_guess = 0.0;  // adaptive step carried across periods
  bool frozen = false;
};

double wrap_2pi(double x) {
  double w = std::fmod(x, kTwoPi);
  return w < 0.0 ? w + kTwoPi : w;
}

void sample_orbit(MbOrbit& orbit, const OrbitState& st, const SpectralWave& view,
                  double t_local, double t, double eps) {
  const FieldPoint f = madelung_at_time(view, wrap_2pi(st.q), t_local, eps);
  orbit.times.push_back(t);
  orbit.q.push_back(wrap_2pi(st.q));
  orbit.q_unwrapped.push_back(st.q);
  orbit.lap_s.push_back(f.lap_s);
  orbit.logdens.push_back(f.logdens);
  orbit.lap_s_integral.push_back(st.lap_int);
  orbit.node_flags.push_back(f.node);
}

// Dormand-Prince 5(4) on (q, int lap S) against the exact in-flight field.
// Advances from local time t0 to t1 within one free flight; returns false
// on a node encounter that survives step shrinking.
bool orbit_advance(OrbitState& st, const SpectralWave& view, double t0, double t1,
                   const TraceOptions& opt, double period) {
  static constexpr double c[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static constexpr double a[7][6] = {
      {},
      {1.0 / 5},
      {3.0 / 40, 9.0 / 40},
      {44.0 / 45, -56.0 / 15, 32.0 / 9},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
      {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
  static constexpr double b4[7] = {5179.0 / 57600, 0.0,           7571.0 / 16695, 393.0 / 640,
                                   -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

  const double h_min = opt.min_step_fraction * period;
  double tl = t0;
  double h = st.h_guess > 0.0 ? st.h_guess : (t1 - t0) / 16.0;

  while (tl < t1) {
    h = std::min(h, t1 - tl);
    double kq[7], kl[7];
    bool node = false;
    for (int s = 0; s < 7; ++s) {
      double q = st.q;
      for (int j = 0; j < s; ++j) q += h * a[s][j] * kq[j];
      const FieldPoint f = madelung_at_time(view, wrap_2pi(q), tl + c[s] * h, opt.node_epsilon);
      if (f.node || !std::isfinite(f.v) || !std::isfinite(f.lap_s)) {
        node = true;
        break;
      }
      kq[s] = f.v;
      kl[s] = f.lap_s;
    }
    if (node) {
      h *= 0.5;
      if (h < h_min) return false;
      continue;
    }
    // 5th-order solution uses the a[6] row; the embedded 4th order uses b4
    double dq5 = 0.0, dl5 = 0.0, dq4 = 0.0, dl4 = 0.0;
    for (int s = 0; s < 6; ++s) {
      dq5 += a[6][s] * kq[s];
      dl5 += a[6][s] * kl[s];
    }
    for (int s = 0; s < 7; ++s) {
      dq4 += b4[s] * kq[s];
      dl4 += b4[s] * kl[s];
    }
    const double eq = h * std::abs(dq5 - dq4);
    const double el = h * std::abs(dl5 - dl4);
    const double sq = opt.atol + opt.rtol * std::max(std::abs(st.q), std::abs(st.q + h * dq5));
    const double sl = opt.atol + opt.rtol * std::max(1.0, std::abs(st.lap_int));
    const double err = std::sqrt(0.5 * ((eq / sq) * (eq / sq) + (el / sl) * (el / sl)));

    if (err <= 1.0) {
      st.q += h * dq5;
      st.lap_int += h * dl5;
      tl += h;
      const double grow = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
      h *= std::clamp(grow, 0.2, 5.0);
    } else {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      if (h < h_min) return false;
    }
    st.h_guess = h;
  }
  return true;
}

void write_snapshot(std::ofstream& out, const WaveState& psi) {
  for (const auto& a : psi.amp) {
    const double re = a.real(), im = a.imag();
    out.write(reinterpret_cast<const char*>(&re), sizeof re);
    out.write(reinterpret_cast<const char*>(&im), sizeof im);
  }
}

// Kick-synchronized hybrid samples: the per-kick log expansion factor
// ln|1 + lap S T|, the discrete entropy increment with the quantum field
// in place of the classical curvature. The log tames the near-node
// spikes of lap S (raw time-averaging of the samples is conditionally
// convergent and never settles); in the regular regime lap S T << 1 it
// reduces to the plain time-average of lap S, so on an MB orbit the
// estimate coincides with the per-orbit invariant.
struct HybridAccum {
  double sum = 0.0;
  double sum_first = 0.0, sum_second = 0.0;
  long count = 0, count_first = 0, count_second = 0;
  long masked = 0, total = 0;

  void add(double log_expansion, bool first_half) {
    sum += log_expansion;
    ++count;
    if (first_half) {
      sum_first += log_expansion;
      ++count_first;
    } else {
      sum_second += log_expansion;
      ++count_second;
    }
  }
};

}  // namespace

void write_record_header(std::ostream& out, const RotorParams& params) {
  const int64_t grid = params.grid, substeps = params.substeps;
  out.write(reinterpret_cast<const char*>(&grid), sizeof grid);
  out.write(reinterpret_cast<const char*>(&params.hbar), sizeof(double));
  out.write(reinterpret_cast<const char*>(&params.kick_strength), sizeof(double));
  out.write(reinterpret_cast<const char*>(&params.period), sizeof(double));
  out.write(reinterpret_cast<const char*>(&substeps), sizeof substeps);
}

RotorRunResult run_rotor(const RotorRunRequest& req) {
  if (req.n_periods < 1) throw std::invalid_argument("run_rotor: n_periods must be >= 1");
  if (!power_of_two(req.params.grid))
    throw std::invalid_argument("run_rotor: grid must be a power of two");
  if (req.params.hbar <= 0.0) throw std::invalid_argument("run_rotor: hbar must be positive");

  const RotorParams& prm = req.params;
  const double tau = prm.period / prm.substeps;
  const double eps = req.trace.node_epsilon;

  WaveState psi = req.psi0;
  psi.grid = prm.grid;
  psi.hbar = prm.hbar;

  RotorRunResult res;
  res.orbits.resize(req.mb_starts.size());
  std::vector<OrbitState> ost(req.mb_starts.size());
  for (size_t i = 0; i < req.mb_starts.size(); ++i) ost[i].q = req.mb_starts[i];

  std::vector<ClassicalOrbit> classical;
  std::vector<HybridAccum> hacc(req.classical_starts.size());
  for (const auto& [q0, p0] : req.classical_starts)
    classical.push_back(classical_rotor_orbit(q0, p0, prm.kick_strength, prm.period, req.n_periods));

  std::ofstream record;
  if (!req.record_path.empty()) {
    record.open(req.record_path, std::ios::binary);
    if (!record) throw std::runtime_error("run_rotor: cannot open record " + req.record_path);
    write_record_header(record, prm);
    write_snapshot(record, psi);
  }

  SpectralWave cur = analyze(psi, req.trace.band_cut);
  for (size_t i = 0; i < ost.size(); ++i) sample_orbit(res.orbits[i], ost[i], cur, 0.0, 0.0, eps);

  res.entropy.t.push_back(0.0);
  res.entropy.entropy.push_back(psi.entropy());
  const double s0 = res.entropy.entropy.front();

  for (long n = 0; n < req.n_periods; ++n) {
    // MB orbits against the exact in-flight field of this period's view,
    // sampled at substep boundaries (the last one pre-kick)
    for (size_t i = 0; i < ost.size(); ++i) {
      if (ost[i].frozen) continue;
      for (int j = 1; j <= prm.substeps; ++j) {
        if (!orbit_advance(ost[i], cur, (j - 1) * tau, j * tau, req.trace, prm.period)) {
          ost[i].frozen = true;
          res.orbits[i].aborted = true;
          res.orbits[i].abort_time = n * prm.period + j * tau;
          break;
        }
        sample_orbit(res.orbits[i], ost[i], cur, j * tau, n * prm.period + j * tau, eps);
      }
    }

    // hybrid: log expansion factor at this period's classical position
    for (size_t c = 0; c < classical.size(); ++c) {
      ++hacc[c].total;
      const FieldPoint f = madelung_at(cur, classical[c].q_wrapped[static_cast<size_t>(n)], eps);
      const double det = 1.0 + f.lap_s * prm.period;
      if (f.node || det == 0.0) {
        ++hacc[c].masked;
        continue;
      }
      hacc[c].add(std::log(std::abs(det)), n < req.n_periods / 2);
    }

    for (int j = 1; j <= prm.substeps; ++j) {
      free_flight(psi, tau);
      if (record.is_open()) write_snapshot(record, psi);
    }

    apply_kick(psi, prm.kick_strength);
    cur = analyze(psi, req.trace.band_cut);
    res.norm_drift = std::max(res.norm_drift, std::abs(psi.norm() - 1.0));

    if ((n + 1) % std::max(1, req.entropy_every) == 0 || n + 1 == req.n_periods) {
      res.entropy.t.push_back((n + 1) * prm.period);
      res.entropy.entropy.push_back(psi.entropy());
    }
  }

  // entropy rates
  const size_t ns = res.entropy.t.size();
  res.entropy.kbar_slope.assign(ns, 0.0);
  res.entropy.kbar_over_t.assign(ns, 0.0);
  for (size_t i = 1; i < ns; ++i) {
    res.entropy.kbar_over_t[i] = res.entropy.entropy[i] / res.entropy.t[i];
    // least-squares slope over the trailing half of samples up to i
    const size_t lo = i / 2;
    double mt = 0.0, ms = 0.0;
    const size_t cnt = i - lo + 1;
    for (size_t k = lo; k <= i; ++k) { mt += res.entropy.t[k]; ms += res.entropy.entropy[k]; }
    mt /= cnt; ms /= cnt;
    double num = 0.0, den = 0.0;
    for (size_t k = lo; k <= i; ++k) {
      num += (res.entropy.t[k] - mt) * (res.entropy.entropy[k] - ms);
      den += (res.entropy.t[k] - mt) * (res.entropy.t[k] - mt);
    }
    res.entropy.kbar_slope[i] = den > 0.0 ? num / den : 0.0;
  }
  if (ns >= 2 && res.entropy.t.back() > 0.0)
    res.entropy.growth_rate = (res.entropy.entropy.back() - s0) / res.entropy.t.back();

  res.hybrid.resize(hacc.size());
  for (size_t c = 0; c < hacc.size(); ++c) {
    const HybridAccum& h = hacc[c];
    HybridEstimate& e = res.hybrid[c];
    e.k = h.count > 0 ? h.sum / (h.count * prm.period) : 0.0;
    e.first_half = h.count_first > 0 ? h.sum_first / (h.count_first * prm.period) : 0.0;
    e.second_half = h.count_second > 0 ? h.sum_second / (h.count_second * prm.period) : 0.0;
    e.masked_fraction = h.total > 0 ? static_cast<double>(h.masked) / h.total : 0.0;
    e.low_confidence = e.masked_fraction > 0.10;
  }

  res.final_state = psi;
  return res;
}

MbOrbit trace_mb_orbit(const WaveState& psi0, const RotorParams& params, double q0,
                       long n_periods, const TraceOptions& opt) {
  RotorRunRequest req;
  req.psi0 = psi0;
  req.params = params;
  req.n_periods = n_periods;
  req.mb_starts = {q0};
  req.trace = opt;
  return run_rotor(req).orbits.front();
}

HybridEstimate hybrid_ks(const WaveState& psi0, const RotorParams& params, double q0, double p0,
                         long n_periods, const TraceOptions& opt) {
  RotorRunRequest req;
  req.psi0 = psi0;
  req.params = params;
  req.n_periods = n_periods;
  req.classical_starts = {{q0, p0}};
  req.trace = opt;
  return run_rotor(req).hybrid.front();
}

RecordReader::RecordReader(const std::string& path) : path_(path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("RecordReader: cannot open " + path);
  const std::streamoff size = in.tellg();
  in.seekg(0);
  int64_t grid = 0, substeps = 0;
  in.read(reinterpret_cast<char*>(&grid), sizeof grid);
  in.read(reinterpret_cast<char*>(&params.hbar), sizeof(double));
  in.read(reinterpret_cast<char*>(&params.kick_strength), sizeof(double));
  in.read(reinterpret_cast<char*>(&params.period), sizeof(double));
  in.read(reinterpret_cast<char*>(&substeps), sizeof substeps);
  if (!in) throw std::runtime_error("RecordReader: truncated header in " + path);
  params.grid = static_cast<int>(grid);
  params.substeps = static_cast<int>(substeps);
  payload_start_ = static_cast<std::streamoff>(sizeof(int64_t) * 2 + sizeof(double) * 3);
  const std::streamoff snap_bytes = static_cast<std::streamoff>(params.grid) * 2 * sizeof(double);
  n_snapshots = (size - payload_start_) / snap_bytes;
}

WaveState RecordReader::snapshot(long index) const {
  if (index < 0 || index >= n_snapshots) throw std::out_of_range("RecordReader::snapshot");
  std::ifstream in(path_, std::ios::binary);
  const std::streamoff snap_bytes = static_cast<std::streamoff>(params.grid) * 2 * sizeof(double);
  in.seekg(payload_start_ + index * snap_bytes);
  WaveState w;
  w.grid = params.grid;
  w.hbar = params.hbar;
  w.t = index * params.period / params.substeps;
  w.amp.resize(static_cast<size_t>(params.grid));
  for (auto& a : w.amp) {
    double re = 0.0, im = 0.0;
    in.read(reinterpret_cast<char*>(&re), sizeof re);
    in.read(reinterpret_cast<char*>(&im), sizeof im);
    a = {re, im};
  }
  if (!in) throw std::runtime_error("RecordReader: truncated snapshot in " + path_);
  return w;
}

std::vector<MbOrbit> trace_from_record(const std::string& path, const std::vector<double>& q0s,
                                       const TraceOptions& opt) {
  RecordReader rec(path);
  const RotorParams& prm = rec.params;
  const double tau = prm.period / prm.substeps;
  const double eps = opt.node_epsilon;

  std::vector<MbOrbit> orbits(q0s.size());
  std::vector<OrbitState> ost(q0s.size());
  for (size_t i = 0; i < q0s.size(); ++i) ost[i].q = q0s[i];

  WaveState state = rec.snapshot(0);
  SpectralWave cur = analyze(state, opt.band_cut);
  for (size_t i = 0; i < ost.size(); ++i) sample_orbit(orbits[i], ost[i], cur, 0.0, 0.0, eps);

  const long n_periods = (rec.n_snapshots - 1) / prm.substeps;
  for (long n = 0; n < n_periods; ++n) {
    if (n > 0) {
      // period-boundary snapshots are pre-kick: re-apply the kick
      state = rec.snapshot(n * prm.substeps);
      apply_kick(state, prm.kick_strength);
      cur = analyze(state, opt.band_cut);
    }
    for (size_t i = 0; i < ost.size(); ++i) {
      if (ost[i].frozen) continue;
      for (int j = 1; j <= prm.substeps; ++j) {
        if (!orbit_advance(ost[i], cur, (j - 1) * tau, j * tau, opt, prm.period)) {
          ost[i].frozen = true;
          orbits[i].aborted = true;
          orbits[i].abort_time = n * prm.period + j * tau;
          break;
        }
        sample_orbit(orbits[i], ost[i], cur, j * tau, n * prm.period + j * tau, eps);
      }
    }
  }
  return orbits;
}

std::vector<double> sample_positions(const WaveState& psi, int count, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int m = psi.grid;
  const double h = psi.dq();
  Vec cdf(static_cast<size_t>(m) + 1, 0.0);
  for (int j = 0; j < m; ++j)
    cdf[static_cast<size_t>(j) + 1] = cdf[static_cast<size_t>(j)] + std::norm(psi.amp[static_cast<size_t>(j)]) * h;
  const double total = cdf.back();
  std::vector<double> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double u = unit(rng) * total;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const size_t cell = std::min(static_cast<size_t>(it - cdf.begin()) - 1, static_cast<size_t>(m - 1));
    const double frac = (u - cdf[cell]) / std::max(cdf[cell + 1] - cdf[cell], 1e-300);
    out.push_back((static_cast<double>(cell) + frac) * h);
  }
  return out;
}

}  // namespace ksent
