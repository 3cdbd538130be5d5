#include "ksent/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ksent {

SymMatrix sigma_rhs(const SymMatrix& sigma, const HessianBlocks& k) {
  // -(K11 + K12 s + s K21 + s K22 s)
  Matrix x = mul(mul(sigma, k.k22), to_dense(sigma));
  const int n = sigma.order();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) x.at(i, j) += k.k11.at(i, j);
  if (!k.k12_zero) {
    const Matrix ks = mul(k.k12, to_dense(sigma));               // K12 s
    const Matrix sk = mul(to_dense(sigma), k.k12.transposed());  // s K21 = (K12 s)^T
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) x.at(i, j) += ks.at(i, j) + sk.at(i, j);
  }
  SymMatrix r = symmetrized(x);
  return r *= -1.0;
}

SymMatrix tau_rhs(const SymMatrix& tau, const HessianBlocks& k) {
  // t K11 t + t K12 + K21 t + K22
  Matrix x = mul(mul(tau, k.k11), to_dense(tau));
  const int n = tau.order();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) x.at(i, j) += k.k22.at(i, j);
  if (!k.k12_zero) {
    const Matrix tk = mul(to_dense(tau), k.k12);  // t K12; K21 t = (t K12)^T
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) x.at(i, j) += tk.at(i, j) + tk.at(j, i);
  }
  return symmetrized(x);
}

double ks_integrand(SigmaRep rep, const SymMatrix& m, const HessianBlocks& k) {
  const PhasePair ph = rep == SigmaRep::direct ? phase_functions_direct(m)
                                               : phase_functions_inverted(m);
  double v = 0.5 * trace_product(k.k11 - k.k22, ph.sin2theta);
  if (!k.k12_zero) v += trace_product(symmetrized(k.k12), ph.cos2theta);
  return v;
}

SymMatrix current_sigma(const SigmaState& state) {
  return state.rep == SigmaRep::direct ? state.matrix : sym_inverse(state.matrix);
}

void maybe_switch(SigmaState& state, double t, const RiccatiOptions& opt) {
  const SymEigen e = sym_eigen(state.matrix);
  double max_abs = 0.0, min_abs = std::numeric_limits<double>::infinity();
  for (double v : e.values) {
    max_abs = std::max(max_abs, std::abs(v));
    min_abs = std::min(min_abs, std::abs(v));
  }
  const bool invertible = min_abs > 0.0;

  // The other chart's largest eigenvalue is 1/min_abs, so it is the
  // better-conditioned one exactly when max_abs * min_abs > 1. Gating
  // flips on that product keeps a simultaneous pole (this chart) and
  // zero crossing (other chart) from trapping the state in a blow-up.
  const bool other_chart_better = max_abs * min_abs > 1.0;

  bool flip = false;
  if (state.rep == SigmaRep::direct) {
    flip = max_abs > opt.switch_threshold && invertible && other_chart_better;
  } else {
    // Back to direct once every |sigma| eigenvalue is comfortably inside
    // the threshold; also bail out of a tau blow-up (sigma through zero)
    // once the direct chart is the less singular of the two.
    const bool comfortable = min_abs > opt.hysteresis / opt.switch_threshold;
    const bool tau_blowup = max_abs > opt.switch_threshold && other_chart_better;
    flip = invertible && (comfortable || tau_blowup);
  }
  if (!flip) return;  // not invertible at the attempt: retry next step

  state.matrix = apply_spectral(e, [](double v) { return 1.0 / v; });
  state.rep = state.rep == SigmaRep::direct ? SigmaRep::inverted : SigmaRep::direct;
  state.switch_log.push_back({t, state.rep});
}

namespace {

struct FlowDeriv {
  Vec dq, dp;
  SymMatrix dm;
  double di = 0.0;
};

void eval_rhs(const HamiltonianModel& model, SigmaRep rep, const Vec& q, const Vec& p,
              const SymMatrix& m, double t, FlowDeriv& out) {
  model.flow(q, p, t, out.dq, out.dp);
  const HessianBlocks k = model.blocks(q, p, t);
  out.dm = rep == SigmaRep::direct ? sigma_rhs(m, k) : tau_rhs(m, k);
  out.di = ks_integrand(rep, m, k);
}

void axpy(Vec& y, double a, const Vec& x) {
  for (size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

bool escaped(const Vec& q, const Vec& p, double bound) {
  for (double v : q)
    if (!std::isfinite(v) || std::abs(v) > bound) return true;
  for (double v : p)
    if (!std::isfinite(v) || std::abs(v) > bound) return true;
  return false;
}

// A sigma pole can fall inside one step: the one-shot RK4 update then
// overflows before any chart switch is possible. Redo the sigma update
// over [t0, t0 + h] in progressively finer substeps, switching charts
// between them; the orbit advances on a scratch copy so the caller's
// committed single-step orbit stays untouched.
bool rescue_sigma(const HamiltonianModel& model, SigmaState& sig, const Vec& q0, const Vec& p0,
                  double t0, double h, const RiccatiOptions& opt, double& integral,
                  int first_parts = 2) {
  FlowDeriv k1, k2, k3, k4;
  Vec q2, p2;
  SymMatrix m2;
  for (int attempt = 0; attempt < 2; ++attempt) {
    for (int parts = first_parts; parts <= 4096; parts *= 2) {
      SigmaState trial = sig;
      Vec qc = q0, pc = p0;
      double acc = 0.0, tc = t0;
      const double hs = h / parts;
      bool ok = true;
      for (int s = 0; s < parts && ok; ++s) {
        maybe_switch(trial, tc, opt);
        eval_rhs(model, trial.rep, qc, pc, trial.matrix, tc, k1);
        q2 = qc; p2 = pc; m2 = trial.matrix;
        axpy(q2, 0.5 * hs, k1.dq); axpy(p2, 0.5 * hs, k1.dp); m2 += 0.5 * hs * k1.dm;
        eval_rhs(model, trial.rep, q2, p2, m2, tc + 0.5 * hs, k2);
        q2 = qc; p2 = pc; m2 = trial.matrix;
        axpy(q2, 0.5 * hs, k2.dq); axpy(p2, 0.5 * hs, k2.dp); m2 += 0.5 * hs * k2.dm;
        eval_rhs(model, trial.rep, q2, p2, m2, tc + 0.5 * hs, k3);
        q2 = qc; p2 = pc; m2 = trial.matrix;
        axpy(q2, hs, k3.dq); axpy(p2, hs, k3.dp); m2 += hs * k3.dm;
        eval_rhs(model, trial.rep, q2, p2, m2, tc + hs, k4);
        const double ws = hs / 6.0;
        axpy(qc, ws, k1.dq); axpy(qc, 2.0 * ws, k2.dq); axpy(qc, 2.0 * ws, k3.dq); axpy(qc, ws, k4.dq);
        axpy(pc, ws, k1.dp); axpy(pc, 2.0 * ws, k2.dp); axpy(pc, 2.0 * ws, k3.dp); axpy(pc, ws, k4.dp);
        trial.matrix += ws * k1.dm + (2.0 * ws) * k2.dm + (2.0 * ws) * k3.dm + ws * k4.dm;
        acc += ws * (k1.di + 2.0 * k2.di + 2.0 * k3.di + k4.di);
        tc = t0 + (s + 1) * hs;
        ok = trial.matrix.finite();
      }
      if (ok) {
        integral += acc;
        sig = std::move(trial);
        return true;
      }
    }
    if (attempt == 0) {
      // Both charts can turn singular at once: one direction at a pole of
      // the current chart while another crosses zero, so no flip is allowed
      // and the quadratic term overflows at any substep size. The estimate
      // only sees the state through bounded phase functions that are flat
      // in both extremes, so clamping the eigenvalue magnitudes perturbs
      // it by O(1/cap) while making the update integrable again.
      const SymEigen e = sym_eigen(sig.matrix);
      sig.matrix = apply_spectral(e, [](double v) {
        constexpr double cap = 1e4;
        const double a = std::clamp(std::abs(v), 1.0 / cap, cap);
        return v < 0.0 ? -a : a;
      });
    }
  }
  return false;
}

}  // namespace

KsEstimate evolve_ks(const HamiltonianModel& model, const TrajectoryState& xi0,
                     const RiccatiOptions& opt) {
  if (opt.dt <= 0.0) throw std::invalid_argument("evolve_ks: dt must be positive");
  const int n = model.dim;

  KsEstimate est;
  Vec q = xi0.q, p = xi0.p;
  double t = xi0.t;
  SigmaState sig = SigmaState::initial(n);
  double integral = 0.0;

  const bool track_energy = model.kind == HamiltonianModel::Kind::standard_form && model.autonomous;
  const double h0 = track_energy ? model.energy(q, p, t) : 0.0;
  const double h_scale = std::max(1.0, std::abs(h0));

  const long n_steps = static_cast<long>(std::llround(opt.t_max / opt.dt));
  const long sample_stride =
      opt.sample_every > 0.0 ? std::max<long>(1, std::llround(opt.sample_every / opt.dt)) : 0;
  const long half_step = n_steps / 2;
  double half_integral = 0.0, half_time = 0.0;

  Vec prev_tau_eigs;
  bool have_prev_tau = false;

  const bool trace = opt.trace_sigma && n == 1;
  auto record_sigma = [&]() {
    const double m0 = sig.matrix.at(0, 0);
    if (sig.rep == SigmaRep::direct)
      est.sigma_trace.emplace_back(t, m0);
    else if (m0 != 0.0)
      est.sigma_trace.emplace_back(t, 1.0 / m0);
  };
  if (trace) record_sigma();

  FlowDeriv k1, k2, k3, k4;
  Vec q2, p2;
  SymMatrix m2;

  auto record_sample = [&](double integrand_now) {
    KsSample s;
    s.t = t;
    s.k_running = t > 0.0 ? integral / t : 0.0;
    s.integrand = integrand_now;
    s.energy_drift = track_energy ? (model.energy(q, p, t) - h0) / h_scale : 0.0;
    s.pole_count = sig.total_poles();
    s.rep = sig.rep;
    est.samples.push_back(s);
  };

  auto finish = [&](bool failed, const std::string& why) {
    est.elapsed = t - xi0.t;
    est.integral = integral;
    est.k = est.elapsed > 0.0 ? integral / est.elapsed : 0.0;
    if (half_time > xi0.t && t > half_time)
      est.k_window = (integral - half_integral) / (t - half_time);
    else
      est.k_window = est.k;
    est.energy_drift = track_energy ? (model.energy(q, p, t) - h0) / h_scale : 0.0;
    est.pole_count = sig.pole_count;
    est.switches = std::move(sig.switch_log);
    est.poles = std::move(sig.pole_log);
    est.final_state = {q, p, t};
    est.failed = failed;
    est.error = why;
    return est;
  };

  for (long step = 0; step < n_steps; ++step) {
    const double h = opt.dt;

    eval_rhs(model, sig.rep, q, p, sig.matrix, t, k1);
    if (step == 0 || (sample_stride > 0 && step % sample_stride == 0)) record_sample(k1.di);

    const Vec q_start = q, p_start = p;
    q2 = q; p2 = p; m2 = sig.matrix;
    axpy(q2, 0.5 * h, k1.dq); axpy(p2, 0.5 * h, k1.dp); m2 += 0.5 * h * k1.dm;
    eval_rhs(model, sig.rep, q2, p2, m2, t + 0.5 * h, k2);

    q2 = q; p2 = p; m2 = sig.matrix;
    axpy(q2, 0.5 * h, k2.dq); axpy(p2, 0.5 * h, k2.dp); m2 += 0.5 * h * k2.dm;
    eval_rhs(model, sig.rep, q2, p2, m2, t + 0.5 * h, k3);

    q2 = q; p2 = p; m2 = sig.matrix;
    axpy(q2, h, k3.dq); axpy(p2, h, k3.dp); m2 += h * k3.dm;
    eval_rhs(model, sig.rep, q2, p2, m2, t + h, k4);

    // fused accumulation, bit-identical to the tangent engine's orbit so
    // cross-validation compares estimators on the same trajectory
    const double w = h / 6.0;
    for (int i = 0; i < n; ++i) {
      q[static_cast<size_t>(i)] +=
          w * (k1.dq[static_cast<size_t>(i)] + 2 * k2.dq[static_cast<size_t>(i)] +
               2 * k3.dq[static_cast<size_t>(i)] + k4.dq[static_cast<size_t>(i)]);
      p[static_cast<size_t>(i)] +=
          w * (k1.dp[static_cast<size_t>(i)] + 2 * k2.dp[static_cast<size_t>(i)] +
               2 * k3.dp[static_cast<size_t>(i)] + k4.dp[static_cast<size_t>(i)]);
    }
    const double t_start = t;
    t = xi0.t + (step + 1) * h;
    if (opt.sigma_substeps > 1) {
      // refined sigma path: the orbit keeps the committed single step above
      const int parts = std::min(opt.sigma_substeps, 4096);
      if (!rescue_sigma(model, sig, q_start, p_start, t_start, h, opt, integral, parts))
        return finish(true, "non-finite Riccati state at t=" + std::to_string(t));
    } else {
      const SymMatrix sig_next =
          sig.matrix + (w * k1.dm + (2.0 * w) * k2.dm + (2.0 * w) * k3.dm + w * k4.dm);
      if (sig_next.finite()) {
        sig.matrix = sig_next;
        integral += w * (k1.di + 2.0 * k2.di + 2.0 * k3.di + k4.di);
      } else if (!rescue_sigma(model, sig, q_start, p_start, t_start, h, opt, integral)) {
        return finish(true, "non-finite Riccati state at t=" + std::to_string(t));
      }
    }
    if (escaped(q, p, opt.escape_bound))
      return finish(true, "orbit escape at t=" + std::to_string(t));

    // Pole crossings show up as tau eigenvalues passing through zero.
    if (sig.rep == SigmaRep::inverted) {
      const SymEigen e = sym_eigen(sig.matrix);
      if (have_prev_tau) {
        for (int d = 0; d < n; ++d) {
          const double a = prev_tau_eigs[static_cast<size_t>(d)];
          const double b = e.values[static_cast<size_t>(d)];
          if (a != 0.0 && ((a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0))) {
            PoleEvent ev;
            ev.t = t - h + h * std::abs(a) / (std::abs(a) + std::abs(b));
            ev.direction = d;
            ev.sign = b > a ? +1 : -1;
            sig.pole_log.push_back(ev);
            ++sig.pole_count[static_cast<size_t>(d)];
          }
        }
      }
      prev_tau_eigs = e.values;
      have_prev_tau = true;
    } else {
      have_prev_tau = false;
    }

    maybe_switch(sig, t, opt);
    // Seed the crossing detector at the switch itself: the zero crossing
    // typically falls inside the first inverted step.
    if (sig.rep == SigmaRep::inverted && !have_prev_tau) {
      prev_tau_eigs = sym_eigen(sig.matrix).values;
      have_prev_tau = true;
    } else if (sig.rep == SigmaRep::direct) {
      have_prev_tau = false;
    }
    if (trace) record_sigma();
    if (step + 1 == half_step) {
      half_integral = integral;
      half_time = t;
    }
  }

  eval_rhs(model, sig.rep, q, p, sig.matrix, t, k1);
  record_sample(k1.di);
  return finish(false, "");
}

}  // namespace ksent
