#include "ksent/systems.hpp"

#include <cmath>
#include <stdexcept>

namespace ksent {

double HamiltonianModel::energy(const Vec& q, const Vec& p, double t) const {
  if (kind != Kind::standard_form || !potential)
    throw std::logic_error("energy: only defined for standard-form models");
  double kin = 0.0;
  for (double pi : p) kin += pi * pi;
  return 0.5 * kin + potential(q, t).v;
}

namespace {

// Shared quadratic part of the two paper examples:
// -1/2 [(q1-q2)^2 + (q2-q3)^2 + (q3-q1)^2].
double coupling_value(const Vec& q) {
  const double d12 = q[0] - q[1], d23 = q[1] - q[2], d31 = q[2] - q[0];
  return -0.5 * (d12 * d12 + d23 * d23 + d31 * d31);
}

void coupling_grad(const Vec& q, Vec& g) {
  g[0] = -(2.0 * q[0] - q[1] - q[2]);
  g[1] = -(2.0 * q[1] - q[0] - q[2]);
  g[2] = -(2.0 * q[2] - q[0] - q[1]);
}

SymMatrix coupling_hess() {
  SymMatrix h(3);
  h.at(0, 0) = h.at(1, 1) = h.at(2, 2) = -2.0;
  h.at(1, 0) = h.at(2, 0) = h.at(2, 1) = 1.0;
  return h;
}

}  // namespace

PotentialValue quartic3(const Vec& q) {
  PotentialValue r;
  r.grad.resize(3);
  r.v = coupling_value(q) +
        q[0] * q[0] * q[0] * q[0] + 2.0 * q[1] * q[1] * q[1] * q[1] +
        3.0 * q[2] * q[2] * q[2] * q[2];
  coupling_grad(q, r.grad);
  r.grad[0] += 4.0 * q[0] * q[0] * q[0];
  r.grad[1] += 8.0 * q[1] * q[1] * q[1];
  r.grad[2] += 12.0 * q[2] * q[2] * q[2];
  r.hess = coupling_hess();
  r.hess.at(0, 0) += 12.0 * q[0] * q[0];
  r.hess.at(1, 1) += 24.0 * q[1] * q[1];
  r.hess.at(2, 2) += 36.0 * q[2] * q[2];
  return r;
}

KickValue kicked_quartic(const Vec& q) {
  KickValue r;
  r.grad.resize(3);
  r.f = coupling_value(q) +
        q[0] * q[0] * q[0] * q[0] + q[1] * q[1] * q[1] * q[1] +
        q[2] * q[2] * q[2] * q[2];
  coupling_grad(q, r.grad);
  for (int i = 0; i < 3; ++i) r.grad[static_cast<size_t>(i)] += 4.0 * std::pow(q[static_cast<size_t>(i)], 3);
  r.hess = coupling_hess();
  for (int i = 0; i < 3; ++i) r.hess.at(i, i) += 12.0 * q[static_cast<size_t>(i)] * q[static_cast<size_t>(i)];
  return r;
}

KickValue rotor_kick(double q, double strength) {
  KickValue r;
  r.f = strength * std::cos(q);
  r.grad = {-strength * std::sin(q)};
  r.hess = SymMatrix(1);
  r.hess.at(0, 0) = -strength * std::cos(q);
  return r;
}

HamiltonianModel standard_form_model(std::string name, int dim,
                                     std::function<PotentialValue(const Vec&, double)> pot) {
  HamiltonianModel m;
  m.name = std::move(name);
  m.dim = dim;
  m.kind = HamiltonianModel::Kind::standard_form;
  m.potential = std::move(pot);
  m.blocks = [pot = m.potential, dim](const Vec& q, const Vec&, double t) {
    HessianBlocks b;
    b.k11 = pot(q, t).hess;
    b.k12 = Matrix(dim, dim);
    b.k22 = SymMatrix::identity(dim);
    b.k12_zero = true;
    return b;
  };
  m.flow = [pot = m.potential, dim](const Vec& q, const Vec& p, double t, Vec& dq, Vec& dp) {
    const PotentialValue v = pot(q, t);
    dq.resize(static_cast<size_t>(dim));
    dp.resize(static_cast<size_t>(dim));
    for (int i = 0; i < dim; ++i) {
      dq[static_cast<size_t>(i)] = p[static_cast<size_t>(i)];
      dp[static_cast<size_t>(i)] = -v.grad[static_cast<size_t>(i)];
    }
  };
  return m;
}

HamiltonianModel quadratic_model(const SymMatrix& omega2) {
  const SymEigen e = sym_eigen(omega2);
  for (double v : e.values)
    if (v <= 0.0) throw std::invalid_argument("quadratic_model: Omega^2 must be positive definite");
  const int n = omega2.order();
  return standard_form_model("quadratic", n, [omega2](const Vec& q, double) {
    PotentialValue r;
    r.grad = mul(omega2, q);
    double v = 0.0;
    for (size_t i = 0; i < q.size(); ++i) v += q[i] * r.grad[i];
    r.v = 0.5 * v;
    r.hess = omega2;
    return r;
  });
}

HamiltonianModel make_model(const std::string& name, const ModelParams& p) {
  if (name == "quartic3")
    return standard_form_model("quartic3", 3, [](const Vec& q, double) { return quartic3(q); });
  if (name == "quadratic") {
    SymMatrix omega2(1);
    omega2.at(0, 0) = p.omega * p.omega;
    return quadratic_model(omega2);
  }
  if (name == "inverted-1d")
    return standard_form_model("inverted-1d", 1, [](const Vec& q, double) {
      PotentialValue r;
      r.v = -0.5 * q[0] * q[0];
      r.grad = {-q[0]};
      r.hess = SymMatrix(1);
      r.hess.at(0, 0) = -1.0;
      return r;
    });
  if (name == "free")
    return standard_form_model("free", 1, [](const Vec&, double) {
      PotentialValue r;
      r.v = 0.0;
      r.grad = {0.0};
      r.hess = SymMatrix(1);
      return r;
    });
  throw std::invalid_argument("make_model: unknown model '" + name + "'");
}

KickedModel make_kicked_model(const std::string& name, const ModelParams& p) {
  KickedModel m;
  m.name = name;
  m.period = p.period;
  if (name == "kicked-quartic") {
    m.dim = 3;
    m.kick = [](const Vec& q) { return kicked_quartic(q); };
    return m;
  }
  if (name == "rotor") {
    m.dim = 1;
    m.kick = [k = p.kick_strength](const Vec& q) { return rotor_kick(q[0], k); };
    return m;
  }
  throw std::invalid_argument("make_kicked_model: unknown model '" + name + "'");
}

}  // namespace ksent
