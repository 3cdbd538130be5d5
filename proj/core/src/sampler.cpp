#include "ksent/sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace ksent {

Vec sample_direction(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec v(static_cast<size_t>(n));
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = gauss(rng);
      norm += x * x;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

TrajectoryState sample_energy_surface(const HamiltonianModel& model, double energy,
                                      uint64_t seed, double q_radius) {
  if (model.kind != HamiltonianModel::Kind::standard_form)
    throw std::invalid_argument("sample_energy_surface: standard-form model required");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = model.dim;

  for (int attempt = 0; attempt < 10000; ++attempt) {
    Vec q = sample_direction(rng, n);
    const double r = q_radius * std::pow(unit(rng), 1.0 / n);
    for (double& x : q) x *= r;
    const double v = model.potential(q, 0.0).v;
    if (v >= energy) continue;
    Vec p = sample_direction(rng, n);
    const double ps = std::sqrt(2.0 * (energy - v));
    for (double& x : p) x *= ps;
    return {q, p, 0.0};
  }
  throw std::runtime_error("sample_energy_surface: could not reach the requested energy surface");
}

void sample_kicked_ic(const KickedModel& model, uint64_t seed, double f_scale, double p_scale,
                      Vec& q0, Vec& p0) {
  std::mt19937_64 rng(seed);
  const int n = model.dim;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Vec dir = sample_direction(rng, n);
    // bisect the radius so |f(r dir)| = f_scale; the quartic term wins at
    // large r, so f grows without bound along almost every ray.
    double lo = 0.0, hi = 1.0;
    auto fabs_at = [&](double r) {
      Vec q(dir);
      for (double& x : q) x *= r;
      return std::abs(model.kick(q).f);
    };
    int grow = 0;
    while (fabs_at(hi) < f_scale && grow++ < 60) hi *= 2.0;
    if (fabs_at(hi) < f_scale) continue;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (fabs_at(mid) < f_scale ? lo : hi) = mid;
    }
    q0 = dir;
    for (double& x : q0) x *= 0.5 * (lo + hi);
    p0 = sample_direction(rng, n);
    for (double& x : p0) x *= p_scale;
    return;
  }
  throw std::runtime_error("sample_kicked_ic: kick scale not reachable");
}

void sample_kicked_saddle(const KickedModel& model, uint64_t seed, Vec& q0, Vec& p0,
                          double start_radius) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = model.dim;

  for (int attempt = 0; attempt < 200; ++attempt) {
    Vec q = sample_direction(rng, n);
    const double r = start_radius * std::pow(unit(rng), 1.0 / n);
    for (double& x : q) x *= r;

    bool converged = false;
    for (int it = 0; it < 100; ++it) {
      const KickValue kv = model.kick(q);
      double gn = 0.0;
      for (double g : kv.grad) gn = std::max(gn, std::abs(g));
      if (gn < 1e-13) {
        converged = true;
        break;
      }
      Matrix rhs(n, 1), step(n, 1);
      for (int i = 0; i < n; ++i) rhs.at(i, 0) = kv.grad[static_cast<size_t>(i)];
      if (!lu_solve(to_dense(kv.hess), rhs, step)) break;
      for (int i = 0; i < n; ++i) q[static_cast<size_t>(i)] -= step.at(i, 0);
    }
    if (!converged) continue;

    const SymEigen e = sym_eigen(model.kick(q).hess);
    int negatives = 0;
    for (double v : e.values)
      if (v < -1e-8) ++negatives;
    if (negatives != 1) continue;

    // Snap to the symmetric representative (exact zeros, exactly paired
    // magnitudes) so the equilibrium holds bit-exactly: the gradient then
    // cancels to zero along soft coordinates instead of leaving a rounding
    // residue that slowly pushes the orbit off the saddle.
    Vec snapped = q;
    for (double& x : snapped)
      if (std::abs(x) < 1e-10) x = 0.0;
    for (size_t i = 0; i < snapped.size(); ++i)
      for (size_t j = i + 1; j < snapped.size(); ++j) {
        const double ai = std::abs(snapped[i]), aj = std::abs(snapped[j]);
        if (ai > 0.0 && std::abs(ai - aj) < 1e-10) {
          const double mag = 0.5 * (ai + aj);
          snapped[i] = std::copysign(mag, snapped[i]);
          snapped[j] = std::copysign(mag, snapped[j]);
        }
      }
    double snap_gn = 0.0;
    for (double g : model.kick(snapped).grad) snap_gn = std::max(snap_gn, std::abs(g));
    if (snap_gn < 1e-12) q = snapped;

    q0 = q;
    p0.assign(static_cast<size_t>(n), 0.0);
    return;
  }
  throw std::runtime_error("sample_kicked_saddle: no index-1 stationary point found");
}

}  // namespace ksent
