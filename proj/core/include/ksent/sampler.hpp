#pragma once

// Seeded initial-condition samplers. Every sampled IC records its seed so
// runs are reproducible.

#include <cstdint>
#include <random>

#include "ksent/riccati.hpp"
#include "ksent/systems.hpp"

namespace ksent {

/// Samples (q0, p0) on the energy surface H(q, p) = energy of a
/// standard-form model: q uniform in a ball (rejecting V(q) >= energy),
/// p isotropic with |p| = sqrt(2 (energy - V)). Throws if the surface is
/// never hit within the attempt cap.
TrajectoryState sample_energy_surface(const HamiltonianModel& model, double energy,
                                      uint64_t seed, double q_radius = 0.7);

/// Kicked-system IC: q on the sphere scaled so the kick action is
/// |f(q)| = f_scale, p isotropic with |p| = p_scale.
void sample_kicked_ic(const KickedModel& model, uint64_t seed, double f_scale, double p_scale,
                      Vec& q0, Vec& p0);

/// Kicked-system IC at an index-1 stationary point of the kick potential:
/// seeded random starts refined by Newton on grad f = 0, keeping only
/// solutions whose Hessian has exactly one negative eigenvalue. p0 = 0, so
/// the orbit sits on the unstable equilibrium and sigma relaxes to the
/// fixed point set by the local Hessian. Throws if no saddle is found.
void sample_kicked_saddle(const KickedModel& model, uint64_t seed, Vec& q0, Vec& p0,
                          double start_radius = 1.5);

/// Uniform direction on the unit sphere in n dimensions.
Vec sample_direction(std::mt19937_64& rng, int n);

}  // namespace ksent
