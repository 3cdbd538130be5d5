#pragma once

// Continuous-time KS engine: joint RK4 integration of the orbit, the
// matrix Riccati equation for sigma, and the bounded entropy integrand.
// Simple poles of sigma are crossed by switching to the inverted
// representation tau = sigma^-1, which passes smoothly through zero.

#include <string>
#include <vector>

#include "ksent/matkernel.hpp"
#include "ksent/systems.hpp"

namespace ksent {

enum class SigmaRep { direct, inverted };

struct SwitchEvent {
  double t = 0.0;
  SigmaRep to = SigmaRep::inverted;
};

struct PoleEvent {
  double t = 0.0;       // crossing time, linearly interpolated
  int direction = 0;    // index of the sorted eigen-direction that crossed
  int sign = 0;         // sign of d(tau_eig)/dt at the crossing
};

struct SigmaState {
  SigmaRep rep = SigmaRep::direct;
  SymMatrix matrix;  // sigma if direct, tau = sigma^-1 if inverted
  std::vector<int> pole_count;
  std::vector<SwitchEvent> switch_log;
  std::vector<PoleEvent> pole_log;

  static SigmaState initial(int dim) {
    SigmaState s;
    s.matrix = SymMatrix(dim);  // sigma(0) = 0
    s.pole_count.assign(static_cast<size_t>(dim), 0);
    return s;
  }
  int total_poles() const {
    int n = 0;
    for (int c : pole_count) n += c;
    return n;
  }
};

struct TrajectoryState {
  Vec q;
  Vec p;
  double t = 0.0;
};

struct KsSample {
  double t = 0.0;
  double k_running = 0.0;
  double integrand = 0.0;
  double energy_drift = 0.0;
  int pole_count = 0;
  SigmaRep rep = SigmaRep::direct;
};

struct KsEstimate {
  double elapsed = 0.0;
  double integral = 0.0;
  double k = 0.0;         // integral / elapsed
  double k_window = 0.0;  // trailing-half slope, discounts the start-up transient
  double energy_drift = 0.0;
  std::vector<KsSample> samples;
  std::vector<std::pair<double, double>> sigma_trace;  // (t, sigma), 1-DOF models only
  std::vector<int> pole_count;
  std::vector<SwitchEvent> switches;
  std::vector<PoleEvent> poles;
  TrajectoryState final_state;
  bool failed = false;
  std::string error;
};

struct RiccatiOptions {
  double dt = 1e-3;
  double t_max = 1e4;
  double sample_every = 1.0;      // <= 0 disables the sample series
  double switch_threshold = 1e3;  // leave direct rep when ||sigma||_2 exceeds this
  double hysteresis = 10.0;       // return when ||sigma||_2 < threshold / hysteresis
  double escape_bound = 1e6;
  int sigma_substeps = 1;    // refine the sigma/integrand update without touching the orbit step
  bool trace_sigma = false;  // per-step (t, sigma) trace for 1-DOF models
};

/// Riccati right-hand side in the direct representation:
/// -(K11 + K12 s + s K21 + s K22 s), symmetrized.
SymMatrix sigma_rhs(const SymMatrix& sigma, const HessianBlocks& k);

/// Inverted representation: t K11 t + t K12 + K21 t + K22, symmetrized.
/// Regular at tau = 0 (standard form reduces to tau' = I + tau K11 tau).
SymMatrix tau_rhs(const SymMatrix& tau, const HessianBlocks& k);

/// Bounded entropy integrand
/// tr[(K11 - K22)/2 sin 2T + (K12 + K21)/2 cos 2T],
/// continuous across representation switches.
double ks_integrand(SigmaRep rep, const SymMatrix& m, const HessianBlocks& k);

/// Representation switching with hysteresis. Records switch events at
/// time t; pole crossings are detected separately from tau eigenvalue
/// sign changes during integration.
void maybe_switch(SigmaState& state, double t, const RiccatiOptions& opt);

/// Joint integration of orbit + Riccati + KS integral. On orbit escape or
/// a non-finite state, returns partial results with failed = true.
KsEstimate evolve_ks(const HamiltonianModel& model, const TrajectoryState& xi0,
                     const RiccatiOptions& opt);

/// Direct-representation sigma (for diagnostics/tests); inverts tau when
/// the state is in the inverted representation.
SymMatrix current_sigma(const SigmaState& state);

}  // namespace ksent
