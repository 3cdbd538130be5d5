#pragma once

// Catalog of dynamical systems: potentials with analytic gradient and
// Hessian, general Hamiltonian Hessian blocks, and kick functions for
// kicked systems. Everything here is a pure evaluator.

#include <functional>
#include <optional>
#include <string>

#include "ksent/matkernel.hpp"

namespace ksent {

struct PotentialValue {
  double v = 0.0;
  Vec grad;
  SymMatrix hess;
};

/// The four Hessian blocks of the Hamiltonian in phase space;
/// K21 = K12^T is implied by storing K12 only.
struct HessianBlocks {
  SymMatrix k11;
  Matrix k12;  // zero for standard-form Hamiltonians
  SymMatrix k22;
  bool k12_zero = true;
};

class HamiltonianModel {
 public:
  enum class Kind { standard_form, general };

  std::string name;
  int dim = 0;
  Kind kind = Kind::standard_form;
  bool autonomous = true;

  /// q, t -> (V, grad V, hess V). Required for standard-form models.
  std::function<PotentialValue(const Vec& q, double t)> potential;

  /// Full Hessian blocks of H along the orbit. Defaults to the
  /// standard-form specialization (K11 = hess V, K12 = 0, K22 = I).
  std::function<HessianBlocks(const Vec& q, const Vec& p, double t)> blocks;

  /// Phase-space velocity (dq/dt, dp/dt). Defaults to q' = p, p' = -grad V.
  std::function<void(const Vec& q, const Vec& p, double t, Vec& dq, Vec& dp)> flow;

  double energy(const Vec& q, const Vec& p, double t = 0.0) const;
};

struct KickValue {
  double f = 0.0;
  Vec grad;
  SymMatrix hess;
};

struct KickedModel {
  std::string name;
  int dim = 0;
  double period = 1.0;
  std::function<KickValue(const Vec& q)> kick;
};

// Paper examples and analytic fixtures.
PotentialValue quartic3(const Vec& q);
KickValue kicked_quartic(const Vec& q);
KickValue rotor_kick(double q, double strength);

/// V = q^T Omega2 q / 2 with Omega2 positive definite; throws otherwise.
HamiltonianModel quadratic_model(const SymMatrix& omega2);

/// Standard-form model from a potential evaluator.
HamiltonianModel standard_form_model(std::string name, int dim,
                                     std::function<PotentialValue(const Vec&, double)> pot);

struct ModelParams {
  double omega = 1.0;          // "quadratic" (isotropic frequency)
  double kick_strength = 5.0;  // "rotor"
  double period = 1.0;         // kicked models
};

/// Lookup by catalog name: "quartic3", "quadratic", "inverted-1d", "free".
/// Throws std::invalid_argument for unknown names.
HamiltonianModel make_model(const std::string& name, const ModelParams& p = {});

/// Lookup by name: "kicked-quartic", "rotor".
KickedModel make_kicked_model(const std::string& name, const ModelParams& p = {});

}  // namespace ksent
