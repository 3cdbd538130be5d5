#pragma once

// Discrete-time KS engine for kicked systems: free flight between kicks
// solved in closed form, the rational sigma iteration map, and the
// log-determinant entropy sum.

#include <string>
#include <vector>

#include "ksent/matkernel.hpp"
#include "ksent/riccati.hpp"
#include "ksent/systems.hpp"

namespace ksent {

struct KickedState {
  long n = 0;
  Vec q, p;          // values just after the nth kick
  SymMatrix sigma;
  double ks_sum = 0.0;
  double ks_comp = 0.0;  // Kahan compensation for the many-tiny-increments regime
  long det_sign_flips = 0;  // pole crossings inside free-flight intervals
  bool degenerate = false;  // det(I + sigma T) hit exactly zero
  long degenerate_at = -1;

  static KickedState initial(const Vec& q0, const Vec& p0) {
    KickedState s;
    s.q = q0;
    s.p = p0;
    s.sigma = SymMatrix(static_cast<int>(q0.size()));  // sigma(0) = 0
    return s;
  }
};

struct KickedSample {
  long n = 0;
  double t = 0.0;
  double k_running = 0.0;
  double log_det_increment = 0.0;
};

struct KickedEstimate {
  long n_steps = 0;
  double elapsed = 0.0;
  double ks_sum = 0.0;
  double k = 0.0;         // ks_sum / (N T)
  double k_window = 0.0;  // trailing-half estimate
  long det_sign_flips = 0;
  std::vector<KickedSample> samples;
  KickedState final_state;
  bool failed = false;
  std::string error;
};

/// One kick period: free flight, kick, and the sigma update
/// sigma' = sigma (I + T sigma)^-1 - hess f(q'), with the entropy
/// increment ln|det(I + sigma T)| accumulated before the update.
/// Returns false on the measure-zero event det(I + sigma T) == 0.
bool kick_step(KickedState& state, const KickedModel& model);

struct KickedOptions {
  long n_steps = 0;
  long sample_every = 0;  // 0 disables the series
  double escape_bound = 1e6;
};

KickedEstimate run_kicked(const KickedModel& model, const Vec& q0, const Vec& p0,
                          const KickedOptions& opt);

}  // namespace ksent
