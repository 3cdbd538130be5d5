#include "ksent/benettin.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ksent {

TangentFrame TangentFrame::identity(int dim2) {
  TangentFrame f;
  f.dim2 = dim2;
  f.basis.assign(static_cast<size_t>(dim2), Vec(static_cast<size_t>(dim2), 0.0));
  for (int k = 0; k < dim2; ++k) f.basis[static_cast<size_t>(k)][static_cast<size_t>(k)] = 1.0;
  f.log_norms.assign(static_cast<size_t>(dim2), 0.0);
  return f;
}

double TangentFrame::renormalize() {
  double max_stretch = 0.0;
  for (size_t k = 0; k < basis.size(); ++k) {
    Vec& v = basis[k];
    for (size_t j = 0; j < k; ++j) {
      const Vec& u = basis[j];
      double proj = 0.0;
      for (size_t i = 0; i < v.size(); ++i) proj += v[i] * u[i];
      for (size_t i = 0; i < v.size(); ++i) v[i] -= proj * u[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    log_norms[k] += std::log(norm);
    max_stretch = std::max(max_stretch, norm);
    for (double& x : v) x /= norm;
  }
  ++renorm_count;
  return max_stretch;
}

double TangentFrame::gram_residual() const {
  double r = 0.0;
  for (size_t i = 0; i < basis.size(); ++i)
    for (size_t j = 0; j <= i; ++j) {
      double dot = 0.0;
      for (size_t k = 0; k < basis[i].size(); ++k) dot += basis[i][k] * basis[j][k];
      r = std::max(r, std::abs(dot - (i == j ? 1.0 : 0.0)));
    }
  return r;
}

Vec tangent_rhs(const HamiltonianModel& model, const Vec& q, const Vec& p, double t,
                const Vec& delta) {
  const int n = model.dim;
  const HessianBlocks k = model.blocks(q, p, t);
  Vec out(static_cast<size_t>(2 * n), 0.0);
  // delta' = J K delta with J = (0, I, -I, 0)
  for (int i = 0; i < n; ++i) {
    double dq = 0.0, dp = 0.0;
    for (int j = 0; j < n; ++j) {
      const double dqj = delta[static_cast<size_t>(j)];
      const double dpj = delta[static_cast<size_t>(n + j)];
      // row i of K21 dq + K22 dp  (K21 = K12^T)
      dq += (k.k12_zero ? 0.0 : k.k12.at(j, i)) * dqj + k.k22.at(i, j) * dpj;
      // row i of K11 dq + K12 dp
      dp += k.k11.at(i, j) * dqj + (k.k12_zero ? 0.0 : k.k12.at(i, j)) * dpj;
    }
    out[static_cast<size_t>(i)] = dq;
    out[static_cast<size_t>(n + i)] = -dp;
  }
  return out;
}

namespace {

struct BlockStats {
  // per-renorm increments of the positive-exponent log-stretch sum
  std::vector<double> increments;
  std::vector<double> times;
};

double finalize_stderr(const BlockStats& st, const std::vector<size_t>& pos, double elapsed,
                       const std::vector<Vec>& per_renorm_logs) {
  // block-average the summed positive-direction stretch rates
  const size_t n = per_renorm_logs.size();
  if (n < 4 || elapsed <= 0.0) return 0.0;
  const size_t n_blocks = std::min<size_t>(20, n / 2);
  const size_t per = n / n_blocks;
  std::vector<double> rates;
  for (size_t b = 0; b < n_blocks; ++b) {
    double sum = 0.0, dt = 0.0;
    for (size_t i = b * per; i < (b + 1) * per && i < n; ++i) {
      for (size_t k : pos) sum += per_renorm_logs[i][k];
      dt += st.times[i];
    }
    if (dt > 0.0) rates.push_back(sum / dt);
  }
  if (rates.size() < 2) return 0.0;
  const double mean = std::accumulate(rates.begin(), rates.end(), 0.0) / rates.size();
  double var = 0.0;
  for (double r : rates) var += (r - mean) * (r - mean);
  var /= (rates.size() - 1);
  return std::sqrt(var / rates.size());
}

SpectrumResult finalize(const TangentFrame& frame, double elapsed, const BlockStats& st,
                        const std::vector<Vec>& per_renorm_logs,
                        std::vector<SpectrumSample> samples, bool failed, std::string error) {
  SpectrumResult r;
  r.elapsed = elapsed;
  r.renorms = frame.renorm_count;
  r.exponents.resize(frame.log_norms.size());
  for (size_t k = 0; k < frame.log_norms.size(); ++k)
    r.exponents[k] = elapsed > 0.0 ? frame.log_norms[k] / elapsed : 0.0;
  std::sort(r.exponents.rbegin(), r.exponents.rend());

  std::vector<size_t> pos;
  for (size_t k = 0; k < frame.log_norms.size(); ++k)
    if (frame.log_norms[k] > 0.0) pos.push_back(k);
  for (size_t k : pos) r.k_oracle += frame.log_norms[k] / std::max(elapsed, 1e-300);
  r.k_stderr = finalize_stderr(st, pos, elapsed, per_renorm_logs);
  r.samples = std::move(samples);
  r.failed = failed;
  r.error = std::move(error);
  return r;
}

bool frame_finite(const TangentFrame& f) {
  for (const Vec& v : f.basis)
    for (double x : v)
      if (!std::isfinite(x)) return false;
  return true;
}

void sample_now(std::vector<SpectrumSample>& out, const TangentFrame& f, double t) {
  if (t <= 0.0) return;
  SpectrumSample s;
  s.t = t;
  s.exponents.resize(f.log_norms.size());
  for (size_t k = 0; k < f.log_norms.size(); ++k) s.exponents[k] = f.log_norms[k] / t;
  std::sort(s.exponents.rbegin(), s.exponents.rend());
  for (double e : s.exponents) s.k_oracle += e > 0.0 ? e : 0.0;
  out.push_back(s);
}

}  // namespace

SpectrumResult spectrum_continuous(const HamiltonianModel& model, const TrajectoryState& xi0,
                                   const BenettinOptions& opt) {
  if (opt.dt <= 0.0) throw std::invalid_argument("spectrum_continuous: dt must be positive");
  const int n = model.dim;
  TangentFrame frame = TangentFrame::identity(2 * n);

  Vec q = xi0.q, p = xi0.p;
  double t = xi0.t;
  double renorm_interval = opt.renorm_interval;
  const long n_steps = static_cast<long>(std::llround(opt.t_max / opt.dt));

  BlockStats stats;
  std::vector<Vec> per_renorm_logs;
  std::vector<SpectrumSample> samples;
  Vec prev_logs = frame.log_norms;
  double last_renorm_t = t;

  const long sample_stride =
      opt.sample_every > 0.0 ? std::max<long>(1, std::llround(opt.sample_every / opt.dt)) : 0;

  Vec dq1, dp1, dq2, dp2, dq3, dp3, dq4, dp4, qt, pt;
  std::vector<Vec> f1(frame.basis.size()), f2(frame.basis.size()), f3(frame.basis.size()),
      f4(frame.basis.size());

  auto tangent_all = [&](const Vec& qq, const Vec& pp, double tt, const std::vector<Vec>& in,
                         std::vector<Vec>& out) {
    const HessianBlocks k = model.blocks(qq, pp, tt);
    for (size_t v = 0; v < in.size(); ++v) {
      Vec& o = out[v];
      o.assign(static_cast<size_t>(2 * n), 0.0);
      const Vec& d = in[v];
      for (int i = 0; i < n; ++i) {
        double a = 0.0, b = 0.0;
        for (int j = 0; j < n; ++j) {
          const double dqj = d[static_cast<size_t>(j)];
          const double dpj = d[static_cast<size_t>(n + j)];
          a += (k.k12_zero ? 0.0 : k.k12.at(j, i)) * dqj + k.k22.at(i, j) * dpj;
          b += k.k11.at(i, j) * dqj + (k.k12_zero ? 0.0 : k.k12.at(i, j)) * dpj;
        }
        o[static_cast<size_t>(i)] = a;
        o[static_cast<size_t>(n + i)] = -b;
      }
    }
  };

  std::vector<Vec> stage(frame.basis.size());
  for (long step = 0; step < n_steps; ++step) {
    const double h = opt.dt;
    model.flow(q, p, t, dq1, dp1);
    tangent_all(q, p, t, frame.basis, f1);

    qt = q; pt = p;
    for (int i = 0; i < n; ++i) { qt[static_cast<size_t>(i)] += 0.5 * h * dq1[static_cast<size_t>(i)]; pt[static_cast<size_t>(i)] += 0.5 * h * dp1[static_cast<size_t>(i)]; }
    for (size_t v = 0; v < stage.size(); ++v) {
      stage[v] = frame.basis[v];
      for (size_t i = 0; i < stage[v].size(); ++i) stage[v][i] += 0.5 * h * f1[v][i];
    }
    model.flow(qt, pt, t + 0.5 * h, dq2, dp2);
    tangent_all(qt, pt, t + 0.5 * h, stage, f2);

    qt = q; pt = p;
    for (int i = 0; i < n; ++i) { qt[static_cast<size_t>(i)] += 0.5 * h * dq2[static_cast<size_t>(i)]; pt[static_cast<size_t>(i)] += 0.5 * h * dp2[static_cast<size_t>(i)]; }
    for (size_t v = 0; v < stage.size(); ++v) {
      stage[v] = frame.basis[v];
      for (size_t i = 0; i < stage[v].size(); ++i) stage[v][i] += 0.5 * h * f2[v][i];
    }
    model.flow(qt, pt, t + 0.5 * h, dq3, dp3);
    tangent_all(qt, pt, t + 0.5 * h, stage, f3);

    qt = q; pt = p;
    for (int i = 0; i < n; ++i) { qt[static_cast<size_t>(i)] += h * dq3[static_cast<size_t>(i)]; pt[static_cast<size_t>(i)] += h * dp3[static_cast<size_t>(i)]; }
    for (size_t v = 0; v < stage.size(); ++v) {
      stage[v] = frame.basis[v];
      for (size_t i = 0; i < stage[v].size(); ++i) stage[v][i] += h * f3[v][i];
    }
    model.flow(qt, pt, t + h, dq4, dp4);
    tangent_all(qt, pt, t + h, stage, f4);

    const double w = h / 6.0;
    for (int i = 0; i < n; ++i) {
      q[static_cast<size_t>(i)] += w * (dq1[static_cast<size_t>(i)] + 2 * dq2[static_cast<size_t>(i)] + 2 * dq3[static_cast<size_t>(i)] + dq4[static_cast<size_t>(i)]);
      p[static_cast<size_t>(i)] += w * (dp1[static_cast<size_t>(i)] + 2 * dp2[static_cast<size_t>(i)] + 2 * dp3[static_cast<size_t>(i)] + dp4[static_cast<size_t>(i)]);
    }
    for (size_t v = 0; v < frame.basis.size(); ++v)
      for (size_t i = 0; i < frame.basis[v].size(); ++i)
        frame.basis[v][i] += w * (f1[v][i] + 2 * f2[v][i] + 2 * f3[v][i] + f4[v][i]);
    t = xi0.t + (step + 1) * h;

    if (!frame_finite(frame)) {
      if (frame.renorm_count == 0)
        return finalize(frame, t - xi0.t, stats, per_renorm_logs, std::move(samples), true,
                        "tangent overflow before first renormalization; use a smaller renorm_interval");
      return finalize(frame, t - xi0.t, stats, per_renorm_logs, std::move(samples), true,
                      "non-finite tangent frame at t=" + std::to_string(t));
    }
    for (double x : q)
      if (!std::isfinite(x) || std::abs(x) > opt.escape_bound)
        return finalize(frame, t - xi0.t, stats, per_renorm_logs, std::move(samples), true,
                        "orbit escape at t=" + std::to_string(t));

    double cur_max = 0.0;
    for (const Vec& v : frame.basis) {
      double s = 0.0;
      for (double x : v) s += x * x;
      cur_max = std::max(cur_max, s);
    }
    const bool due = t - last_renorm_t >= renorm_interval - 0.5 * h;
    if (due || cur_max > opt.stretch_cap * opt.stretch_cap) {
      const double stretch = frame.renormalize();
      if (stretch > opt.stretch_cap) renorm_interval = std::max(opt.dt, 0.5 * renorm_interval);
      Vec inc(frame.log_norms.size());
      for (size_t k = 0; k < inc.size(); ++k) inc[k] = frame.log_norms[k] - prev_logs[k];
      per_renorm_logs.push_back(inc);
      stats.times.push_back(t - last_renorm_t);
      prev_logs = frame.log_norms;
      last_renorm_t = t;
    }
    if (sample_stride > 0 && (step + 1) % sample_stride == 0) sample_now(samples, frame, t - xi0.t);
  }
  frame.renormalize();
  return finalize(frame, t - xi0.t, stats, per_renorm_logs, std::move(samples), false, "");
}

SpectrumResult spectrum_kicked(const KickedModel& model, const Vec& q0, const Vec& p0,
                               const KickedBenettinOptions& opt) {
  if (opt.n_steps < 1) throw std::invalid_argument("spectrum_kicked: n_steps must be >= 1");
  const int n = model.dim;
  const double T = model.period;
  TangentFrame frame = TangentFrame::identity(2 * n);

  Vec q = q0, p = p0;
  BlockStats stats;
  std::vector<Vec> per_renorm_logs;
  std::vector<SpectrumSample> samples;
  Vec prev_logs = frame.log_norms;
  long last_renorm = 0;
  const long renorm_every = std::max<long>(1, opt.renorm_every);

  for (long step = 1; step <= opt.n_steps; ++step) {
    for (int i = 0; i < n; ++i) q[static_cast<size_t>(i)] += T * p[static_cast<size_t>(i)];
    const KickValue kv = model.kick(q);
    for (int i = 0; i < n; ++i) p[static_cast<size_t>(i)] -= kv.grad[static_cast<size_t>(i)];

    for (Vec& d : frame.basis) {
      for (int i = 0; i < n; ++i) d[static_cast<size_t>(i)] += T * d[static_cast<size_t>(n + i)];
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += kv.hess.at(i, j) * d[static_cast<size_t>(j)];
        d[static_cast<size_t>(n + i)] -= s;
      }
    }

    for (double x : q)
      if (!std::isfinite(x) || std::abs(x) > opt.escape_bound)
        return finalize(frame, step * T, stats, per_renorm_logs, std::move(samples), true,
                        "orbit escape at kick n=" + std::to_string(step));

    if (step - last_renorm >= renorm_every || step == opt.n_steps) {
      frame.renormalize();
      Vec inc(frame.log_norms.size());
      for (size_t k = 0; k < inc.size(); ++k) inc[k] = frame.log_norms[k] - prev_logs[k];
      per_renorm_logs.push_back(inc);
      stats.times.push_back((step - last_renorm) * T);
      prev_logs = frame.log_norms;
      last_renorm = step;
    }
    if (opt.sample_every > 0 && step % opt.sample_every == 0)
      sample_now(samples, frame, step * T);
  }
  return finalize(frame, opt.n_steps * T, stats, per_renorm_logs, std::move(samples), false, "");
}

}  // namespace ksent
