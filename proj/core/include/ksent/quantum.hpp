#pragma once

// Quantum KS engine for the kicked rotor: split-operator evolution on a
// periodic grid, Madelung field extraction, Madelung-Bohm orbit tracing,
// per-orbit and ensemble invariants, the hybrid invariant along classical
// orbits, and the position-entropy growth rate.

#include <complex>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ksent/matkernel.hpp"

namespace ksent {

struct RotorParams {
  double kick_strength = 5.0;
  double period = 1.0;
  double hbar = 1.0;
  int grid = 2048;    // power of two
  int substeps = 32;  // free-flight slices per period exposed to tracers
};

struct WaveState {
  int grid = 0;
  double hbar = 1.0;
  double t = 0.0;
  std::vector<std::complex<double>> amp;  // psi on q_j = 2 pi j / grid

  double dq() const;
  double norm() const;     // sum |psi|^2 dq
  double entropy() const;  // -sum |psi|^2 ln|psi|^2 dq  (0 ln 0 := 0)
};

WaveState uniform_state(int grid, double hbar);
WaveState plane_wave(int grid, double hbar, int wavenumber);
/// Periodized Gaussian centered at `center` with position width `width`.
WaveState gaussian_state(int grid, double hbar, double center, double width);

/// Kick operator: psi *= exp(-i K cos q / hbar). Unitary, diagonal in q.
void apply_kick(WaveState& psi, double kick_strength);

/// Exact free flight over time tau: multiply exp(-i hbar m^2 tau / 2) in
/// the momentum representation (integer wavenumbers m, p = hbar m).
void free_flight(WaveState& psi, double tau);

/// One full kick period: `substeps` equal free-flight slices, then the
/// kick. on_substep (optional) sees psi at t = t0 + j tau for
/// j = 1..substeps, the last one pre-kick.
void split_step(WaveState& psi, const RotorParams& params,
                const std::function<void(int substep, const WaveState&)>& on_substep = {});

/// Band-limited view of psi: Fourier coefficients, exact off-grid
/// evaluation of psi and its first two derivatives. During a free flight
/// the coefficients only rotate, so eval_at gives the exact field at any
/// in-flight time offset dt >= 0 from the analysis time.
struct SpectralWave {
  int grid = 0;
  double hbar = 1.0;
  double t = 0.0;
  std::vector<std::complex<double>> coef;  // coef[i] multiplies e^{i m q}, m = m_lo + i
  int m_lo = 0;                            // truncation band of significant modes
  double peak_density = 0.0;

  void eval(double q, std::complex<double>& psi, std::complex<double>& dpsi,
            std::complex<double>& d2psi) const;
  void eval_at(double q, double dt, std::complex<double>& psi, std::complex<double>& dpsi,
               std::complex<double>& d2psi) const;
};

/// band_cut: modes below band_cut * max|coef| are dropped from the view.
SpectralWave analyze(const WaveState& psi, double band_cut = 1e-16);

struct FieldPoint {
  double v = 0.0;        // grad S (velocity, mass 1)
  double lap_s = 0.0;    // laplacian of S
  double logdens = 0.0;  // ln |psi|^2
  bool node = false;     // |psi|^2 below node_epsilon * peak
};

FieldPoint madelung_at(const SpectralWave& w, double q, double node_epsilon = 1e-12);
/// Fields at in-flight time offset dt from the analysis time.
FieldPoint madelung_at_time(const SpectralWave& w, double q, double dt,
                            double node_epsilon = 1e-12);

/// Grid Madelung fields with node masking (spec op; spectral derivatives).
struct MadelungFields {
  Vec v, lap_s, logdens;
  std::vector<bool> node;
};
MadelungFields madelung_fields(const WaveState& psi, double node_epsilon = 1e-12);

struct MbOrbit {
  std::vector<double> times;
  std::vector<double> q;            // wrapped to [0, 2 pi)
  std::vector<double> q_unwrapped;  // continuous lift
  std::vector<double> lap_s;
  std::vector<double> logdens;
  std::vector<double> lap_s_integral;  // running integral of lap S along the orbit
  std::vector<bool> node_flags;
  bool aborted = false;  // entered a masked node region; samples above are partial
  double abort_time = 0.0;

  double duration() const { return times.empty() ? 0.0 : times.back() - times.front(); }
};

/// <lap S> over the orbit. Rejects windows shorter than ten kick periods.
double quantum_ks(const MbOrbit& orbit, double period);

/// Windowed running series (t, <lap S> over [0, t]).
std::vector<std::pair<double, double>> quantum_ks_series(const MbOrbit& orbit);

/// Endpoint telescoping estimate -(logdens(t) - logdens(0)) / t.
/// Throws if an endpoint is node-flagged.
double density_decay_ks(const MbOrbit& orbit);

struct ClassicalOrbit {
  std::vector<double> q_wrapped, q_unwrapped, p;  // index n = just after nth kick
};

/// Standard-map orbit, identical to the kicked engine's map in 1D:
/// q' = q + p T, p' = p + K sin q'.
ClassicalOrbit classical_rotor_orbit(double q0, double p0, double kick_strength, double period,
                                     long n_steps);

/// Quantum lap S sampled at the classical orbit, kick-synchronized, fed
/// through the per-kick log expansion factor ln|1 + lap S T| / T (the
/// discrete entropy increment; reduces to the plain time-average of
/// lap S when lap S T << 1, i.e. on MB orbits).
struct HybridEstimate {
  double k = 0.0;
  double first_half = 0.0, second_half = 0.0;  // disjoint half-window averages
  double masked_fraction = 0.0;
  bool low_confidence = false;  // more than 10% of samples node-masked
};

struct EntropySeries {
  std::vector<double> t;
  std::vector<double> entropy;
  std::vector<double> kbar_slope;   // trailing-window least-squares slope
  std::vector<double> kbar_over_t;  // entropy(t) / t
  double growth_rate = 0.0;         // (entropy(t_end) - entropy(0)) / t_end
};

/// Orbit integration: adaptive embedded Runge-Kutta against the exact
/// in-flight field, one kick period at a time.
struct TraceOptions {
  double node_epsilon = 1e-12;
  double rtol = 1e-9;
  double atol = 1e-10;
  double min_step_fraction = 1e-10;  // of the kick period; below this -> node abort
  double band_cut = 1e-16;           // spectral truncation of the traced view
};

/// One evolution pass serving every consumer: MB orbits traced in
/// lockstep, hybrid sampling along classical orbits, the entropy series,
/// and an optional binary record of the evolution.
struct RotorRunRequest {
  WaveState psi0;
  RotorParams params;
  long n_periods = 0;
  std::vector<double> mb_starts;
  std::vector<std::pair<double, double>> classical_starts;  // (q0, p0)
  int entropy_every = 1;                                    // periods between entropy samples
  std::string record_path;                                  // empty: no persistence
  TraceOptions trace;
};

struct RotorRunResult {
  std::vector<MbOrbit> orbits;
  std::vector<HybridEstimate> hybrid;
  EntropySeries entropy;
  double norm_drift = 0.0;  // max |norm - 1| seen
  WaveState final_state;
};

RotorRunResult run_rotor(const RotorRunRequest& req);

/// Convenience single-orbit wrappers.
MbOrbit trace_mb_orbit(const WaveState& psi0, const RotorParams& params, double q0,
                       long n_periods, const TraceOptions& opt = {});
HybridEstimate hybrid_ks(const WaveState& psi0, const RotorParams& params, double q0, double p0,
                         long n_periods, const TraceOptions& opt = {});

/// Flat binary evolution record. Header: int64 grid, double hbar, double
/// kick_strength, double period, int64 substeps; payload: interleaved
/// re/im doubles per snapshot, one snapshot per substep boundary
/// (pre-kick at period ends; kicks are re-applied on read).
void write_record_header(std::ostream& out, const RotorParams& params);
struct RecordReader {
  explicit RecordReader(const std::string& path);
  RotorParams params;
  long n_snapshots = 0;
  WaveState snapshot(long index) const;  // pre-kick states as stored

 private:
  std::string path_;
  std::streamoff payload_start_ = 0;
};

/// Re-trace MB orbits from a recorded evolution without re-evolving.
std::vector<MbOrbit> trace_from_record(const std::string& path, const std::vector<double>& q0s,
                                       const TraceOptions& opt = {});

/// Ensemble sampling of q0 from |psi0|^2 by inverse CDF on the grid.
std::vector<double> sample_positions(const WaveState& psi, int count, uint64_t seed);

}  // namespace ksent
