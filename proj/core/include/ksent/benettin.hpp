#pragma once

// Conventional tangent-space Lyapunov spectrum (Benettin method with
// modified Gram-Schmidt renormalization). Serves as the independent
// oracle for the Riccati and kicked engines: the KS invariant is the sum
// of positive exponents.

#include <string>
#include <vector>

#include "ksent/kicked.hpp"
#include "ksent/riccati.hpp"
#include "ksent/systems.hpp"

namespace ksent {

/// 2N tangent vectors, orthonormalized in place; accumulates per-vector
/// log stretches.
struct TangentFrame {
  int dim2 = 0;                      // 2N
  std::vector<Vec> basis;            // basis[k] is the kth tangent vector
  Vec log_norms;
  long renorm_count = 0;

  static TangentFrame identity(int dim2);

  /// Modified Gram-Schmidt; returns the largest stretch factor removed.
  double renormalize();

  double gram_residual() const;  // max |<v_i, v_j> - delta_ij|
};

/// Linearized Hamilton's equations: delta' = J K(xi, t) delta.
Vec tangent_rhs(const HamiltonianModel& model, const Vec& q, const Vec& p, double t,
                const Vec& delta);

struct SpectrumSample {
  double t = 0.0;
  Vec exponents;
  double k_oracle = 0.0;
};

struct SpectrumResult {
  Vec exponents;  // descending
  double k_oracle = 0.0;          // sum of positive exponents
  double k_stderr = 0.0;          // block-averaged statistical error
  double elapsed = 0.0;
  long renorms = 0;
  std::vector<SpectrumSample> samples;
  bool failed = false;
  std::string error;
};

struct BenettinOptions {
  double t_max = 1e4;
  double dt = 1e-3;
  double renorm_interval = 1.0;  // auto-shrunk to keep stretches below the cap
  double stretch_cap = 1e6;
  double sample_every = 0.0;
  double escape_bound = 1e6;
};

/// Continuous-flow spectrum along the orbit of the same RK4 stepper used
/// by the Riccati engine.
SpectrumResult spectrum_continuous(const HamiltonianModel& model, const TrajectoryState& xi0,
                                   const BenettinOptions& opt);

struct KickedBenettinOptions {
  long n_steps = 0;
  long renorm_every = 1;
  long sample_every = 0;
  double escape_bound = 1e6;
};

/// Spectrum of the kick-to-kick tangent map.
SpectrumResult spectrum_kicked(const KickedModel& model, const Vec& q0, const Vec& p0,
                               const KickedBenettinOptions& opt);

}  // namespace ksent
