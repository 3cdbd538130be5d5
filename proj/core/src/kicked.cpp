#include "ksent/kicked.hpp"

#include <cmath>

namespace ksent {

namespace {

void kahan_add(double& sum, double& comp, double x) {
  const double y = x - comp;
  const double t = sum + y;
  comp = (t - sum) - y;
  sum = t;
}

}  // namespace

bool kick_step(KickedState& state, const KickedModel& model) {
  const int n = model.dim;
  const double T = model.period;

  // entropy increment of the nth free flight, from sigma_n
  Matrix a = Matrix::identity(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a.at(i, j) += T * state.sigma.at(i, j);
  const LogAbsDet ld = log_abs_det(a);
  if (ld.singular()) {
    state.degenerate = true;
    state.degenerate_at = state.n;
    return false;
  }
  if (ld.sign < 0) ++state.det_sign_flips;
  kahan_add(state.ks_sum, state.ks_comp, ld.value);

  // orbit map
  for (int i = 0; i < n; ++i) state.q[static_cast<size_t>(i)] += T * state.p[static_cast<size_t>(i)];
  const KickValue kv = model.kick(state.q);
  for (int i = 0; i < n; ++i) state.p[static_cast<size_t>(i)] -= kv.grad[static_cast<size_t>(i)];

  // sigma' = sigma (I + T sigma)^-1 - hess f(q'); the rational form is
  // well defined at sigma = 0. Solve (I + sigma T) X = sigma, which has
  // the same solution symmetrized.
  Matrix x;
  if (!lu_solve(a, to_dense(state.sigma), x)) {
    state.degenerate = true;
    state.degenerate_at = state.n;
    return false;
  }
  state.sigma = symmetrized(x);
  state.sigma -= kv.hess;
  ++state.n;
  return true;
}

KickedEstimate run_kicked(const KickedModel& model, const Vec& q0, const Vec& p0,
                          const KickedOptions& opt) {
  if (opt.n_steps < 1) throw std::invalid_argument("run_kicked: n_steps must be >= 1");

  KickedEstimate est;
  KickedState st = KickedState::initial(q0, p0);
  const double T = model.period;
  const long half = opt.n_steps / 2;
  double half_sum = 0.0;

  auto finish = [&](bool failed, const std::string& why) {
    est.n_steps = st.n;
    est.elapsed = st.n * T;
    est.ks_sum = st.ks_sum;
    est.k = st.n > 0 ? st.ks_sum / (st.n * T) : 0.0;
    est.k_window = st.n > half && half > 0 ? (st.ks_sum - half_sum) / ((st.n - half) * T) : est.k;
    est.det_sign_flips = st.det_sign_flips;
    est.final_state = st;
    est.failed = failed;
    est.error = why;
    return est;
  };

  for (long i = 0; i < opt.n_steps; ++i) {
    const double prev_sum = st.ks_sum;
    if (!kick_step(st, model))
      return finish(true, "degenerate free-flight pole exactly at kick n=" + std::to_string(st.n));
    for (double v : st.q)
      if (!std::isfinite(v) || std::abs(v) > opt.escape_bound)
        return finish(true, "orbit escape at kick n=" + std::to_string(st.n));
    for (double v : st.p)
      if (!std::isfinite(v) || std::abs(v) > opt.escape_bound)
        return finish(true, "orbit escape at kick n=" + std::to_string(st.n));

    if (opt.sample_every > 0 && st.n % opt.sample_every == 0) {
      KickedSample s;
      s.n = st.n;
      s.t = st.n * T;
      s.k_running = st.ks_sum / (st.n * T);
      s.log_det_increment = st.ks_sum - prev_sum;
      est.samples.push_back(s);
    }
    if (st.n == half) half_sum = st.ks_sum;
  }
  return finish(false, "");
}

}  // namespace ksent
