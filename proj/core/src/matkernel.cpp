#include "ksent/matkernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ksent {

SymMatrix& SymMatrix::operator+=(const SymMatrix& o) {
  for (size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
  return *this;
}
SymMatrix& SymMatrix::operator-=(const SymMatrix& o) {
  for (size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
  return *this;
}
SymMatrix& SymMatrix::operator*=(double s) {
  for (double& v : a_) v *= s;
  return *this;
}

double SymMatrix::trace() const {
  double t = 0.0;
  for (int i = 0; i < n_; ++i) t += at(i, i);
  return t;
}

double SymMatrix::frobenius() const {
  double s = 0.0;
  for (int i = 0; i < n_; ++i) {
    s += at(i, i) * at(i, i);
    for (int j = 0; j < i; ++j) s += 2.0 * at(i, j) * at(i, j);
  }
  return std::sqrt(s);
}

double SymMatrix::max_abs() const {
  double m = 0.0;
  for (double v : a_) m = std::max(m, std::abs(v));
  return m;
}

bool SymMatrix::finite() const {
  return std::all_of(a_.begin(), a_.end(), [](double v) { return std::isfinite(v); });
}

Matrix Matrix::transposed() const {
  Matrix t(c_, r_);
  for (int i = 0; i < r_; ++i)
    for (int j = 0; j < c_; ++j) t.at(j, i) = at(i, j);
  return t;
}

Matrix to_dense(const SymMatrix& s) {
  const int n = s.order();
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m.at(i, j) = s.at(i, j);
  return m;
}

SymMatrix symmetrized(const Matrix& m) {
  const int n = m.rows();
  SymMatrix s(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) s.at(i, j) = 0.5 * (m.at(i, j) + m.at(j, i));
  return s;
}

Matrix mul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) c.at(i, j) += aik * b.at(k, j);
    }
  return c;
}

Matrix mul(const SymMatrix& a, const SymMatrix& b) {
  const int n = a.order();
  Matrix c(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      const double aik = a.at(i, k);
      for (int j = 0; j < n; ++j) c.at(i, j) += aik * b.at(k, j);
    }
  return c;
}

Vec mul(const SymMatrix& a, const Vec& x) {
  const int n = a.order();
  Vec y(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += a.at(i, j) * x[static_cast<size_t>(j)];
    y[static_cast<size_t>(i)] = s;
  }
  return y;
}

double trace_product(const SymMatrix& a, const SymMatrix& b) {
  const int n = a.order();
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    s += a.at(i, i) * b.at(i, i);
    for (int j = 0; j < i; ++j) s += 2.0 * a.at(i, j) * b.at(i, j);
  }
  return s;
}

namespace {

double offdiag_norm(const Matrix& m) {
  double s = 0.0;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (i != j) s += m.at(i, j) * m.at(i, j);
  return std::sqrt(s);
}

}  // namespace

SymEigen sym_eigen(const SymMatrix& sm) {
  const int n = sm.order();
  if (!sm.finite()) throw std::runtime_error("sym_eigen: non-finite input");
  Matrix a = to_dense(sm);
  Matrix q = Matrix::identity(n);

  // Work on a unit-scaled copy: entries near the overflow threshold make
  // theta^2 in the rotation blow up to inf and stall the sweep.
  const double scale = std::max(sm.max_abs(), 1e-300);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a.at(i, j) /= scale;
  const double tol = 1e-15 * n;
  constexpr int kMaxSweeps = 100;

  int sweep = 0;
  for (; sweep < kMaxSweeps; ++sweep) {
    if (offdiag_norm(a) <= tol) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int qq = p + 1; qq < n; ++qq) {
        const double apq = a.at(p, qq);
        if (std::abs(apq) <= 1e-300) continue;
        const double app = a.at(p, p), aqq2 = a.at(qq, qq);
        const double theta = (aqq2 - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // rotate rows/cols p and qq
        for (int k = 0; k < n; ++k) {
          const double akp = a.at(k, p), akq = a.at(k, qq);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, qq) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a.at(p, k), aqk = a.at(qq, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(qq, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double qkp = q.at(k, p), qkq = q.at(k, qq);
          q.at(k, p) = c * qkp - s * qkq;
          q.at(k, qq) = s * qkp + c * qkq;
        }
      }
    }
  }
  if (sweep == kMaxSweeps && offdiag_norm(a) > tol)
    throw std::runtime_error("sym_eigen: Jacobi sweeps did not converge");

  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return a.at(i, i) > a.at(j, j); });

  SymEigen e;
  e.values.resize(static_cast<size_t>(n));
  e.vectors = Matrix(n, n);
  for (int k = 0; k < n; ++k) {
    e.values[static_cast<size_t>(k)] =
        scale * a.at(order[static_cast<size_t>(k)], order[static_cast<size_t>(k)]);
    for (int i = 0; i < n; ++i) e.vectors.at(i, k) = q.at(i, order[static_cast<size_t>(k)]);
  }
  return e;
}

SymMatrix apply_spectral(const SymEigen& e, const std::function<double(double)>& f) {
  const int n = static_cast<int>(e.values.size());
  SymMatrix m(n);
  Vec fv(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) fv[static_cast<size_t>(k)] = f(e.values[static_cast<size_t>(k)]);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k)
        s += e.vectors.at(i, k) * fv[static_cast<size_t>(k)] * e.vectors.at(j, k);
      m.at(i, j) = s;
    }
  return m;
}

double spectral_norm(const SymMatrix& m) {
  const SymEigen e = sym_eigen(m);
  double s = 0.0;
  for (double v : e.values) s = std::max(s, std::abs(v));
  return s;
}

SymMatrix sym_inverse(const SymMatrix& m) {
  const SymEigen e = sym_eigen(m);
  for (double v : e.values)
    if (v == 0.0) throw std::runtime_error("sym_inverse: exactly singular matrix");
  return apply_spectral(e, [](double x) { return 1.0 / x; });
}

PhasePair phase_functions_direct(const SymMatrix& sigma) {
  const SymEigen e = sym_eigen(sigma);
  PhasePair p;
  p.sin2theta = apply_spectral(e, [](double s) { return -2.0 * s / (1.0 + s * s); });
  p.cos2theta = apply_spectral(e, [](double s) { return (1.0 - s * s) / (1.0 + s * s); });
  return p;
}

PhasePair phase_functions_inverted(const SymMatrix& tau) {
  const SymEigen e = sym_eigen(tau);
  PhasePair p;
  p.sin2theta = apply_spectral(e, [](double t) { return -2.0 * t / (1.0 + t * t); });
  p.cos2theta = apply_spectral(e, [](double t) { return (t * t - 1.0) / (t * t + 1.0); });
  return p;
}

LogAbsDet log_abs_det(Matrix m) {
  const int n = m.rows();
  if (n != m.cols()) throw std::invalid_argument("log_abs_det: matrix not square");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (!std::isfinite(m.at(i, j))) throw std::runtime_error("log_abs_det: non-finite input");

  LogAbsDet r;
  r.sign = 1;
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(m.at(i, k)) > std::abs(m.at(piv, k))) piv = i;
    if (m.at(piv, k) == 0.0) {
      r.sign = 0;
      r.value = -std::numeric_limits<double>::infinity();
      return r;
    }
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(m.at(k, j), m.at(piv, j));
      r.sign = -r.sign;
    }
    const double pivot = m.at(k, k);
    if (pivot < 0.0) r.sign = -r.sign;
    r.value += std::log(std::abs(pivot));
    for (int i = k + 1; i < n; ++i) {
      const double f = m.at(i, k) / pivot;
      if (f == 0.0) continue;
      for (int j = k + 1; j < n; ++j) m.at(i, j) -= f * m.at(k, j);
    }
  }
  return r;
}

bool lu_solve(Matrix a, const Matrix& b, Matrix& x) {
  const int n = a.rows();
  x = b;
  std::vector<int> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(a.at(i, k)) > std::abs(a.at(piv, k))) piv = i;
    if (a.at(piv, k) == 0.0) return false;
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(a.at(k, j), a.at(piv, j));
      for (int j = 0; j < x.cols(); ++j) std::swap(x.at(k, j), x.at(piv, j));
    }
    for (int i = k + 1; i < n; ++i) {
      const double f = a.at(i, k) / a.at(k, k);
      a.at(i, k) = f;
      if (f == 0.0) continue;
      for (int j = k + 1; j < n; ++j) a.at(i, j) -= f * a.at(k, j);
      for (int j = 0; j < x.cols(); ++j) x.at(i, j) -= f * x.at(k, j);
    }
  }
  for (int k = n - 1; k >= 0; --k) {
    for (int j = 0; j < x.cols(); ++j) {
      double s = x.at(k, j);
      for (int i = k + 1; i < n; ++i) s -= a.at(k, i) * x.at(i, j);
      x.at(k, j) = s / a.at(k, k);
    }
  }
  return true;
}

}  // namespace ksent
