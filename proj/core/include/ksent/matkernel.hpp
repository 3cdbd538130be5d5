#pragma once

// Small dense symmetric-matrix kernel: packed symmetric storage,
// Jacobi eigendecomposition, pivoted LU determinants/solves, and the
// bounded trigonometric matrix functions used by the entropy engines.

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace ksent {

using Vec = std::vector<double>;

/// Symmetric N x N matrix with packed lower-triangular storage, so
/// symmetry is structural rather than asserted.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(int n) : n_(n), a_(static_cast<size_t>(n) * (n + 1) / 2, 0.0) {
    if (n < 1) throw std::invalid_argument("SymMatrix: order must be >= 1");
  }

  static SymMatrix identity(int n) {
    SymMatrix m(n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }
  static SymMatrix diagonal(const Vec& d) {
    SymMatrix m(static_cast<int>(d.size()));
    for (int i = 0; i < m.n_; ++i) m.at(i, i) = d[static_cast<size_t>(i)];
    return m;
  }

  int order() const { return n_; }

  double& at(int i, int j) { return a_[idx(i, j)]; }
  double at(int i, int j) const { return a_[idx(i, j)]; }
  double operator()(int i, int j) const { return a_[idx(i, j)]; }

  SymMatrix& operator+=(const SymMatrix& o);
  SymMatrix& operator-=(const SymMatrix& o);
  SymMatrix& operator*=(double s);
  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
  friend SymMatrix operator*(SymMatrix a, double s) { return a *= s; }
  friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }

  double trace() const;
  double frobenius() const;
  double max_abs() const;
  bool finite() const;

 private:
  size_t idx(int i, int j) const {
    if (i < j) std::swap(i, j);
    return static_cast<size_t>(i) * (i + 1) / 2 + j;
  }
  int n_ = 0;
  Vec a_;
};

/// General dense matrix, row-major. Workhorse for the few places where a
/// product or factorization leaves the symmetric cone.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols) : r_(rows), c_(cols), a_(static_cast<size_t>(rows) * cols, 0.0) {}
  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }

  int rows() const { return r_; }
  int cols() const { return c_; }
  double& at(int i, int j) { return a_[static_cast<size_t>(i) * c_ + j]; }
  double at(int i, int j) const { return a_[static_cast<size_t>(i) * c_ + j]; }

  Matrix transposed() const;

 private:
  int r_ = 0, c_ = 0;
  Vec a_;
};

Matrix to_dense(const SymMatrix& s);
SymMatrix symmetrized(const Matrix& m);  // (M + M^T) / 2
Matrix mul(const Matrix& a, const Matrix& b);
Matrix mul(const SymMatrix& a, const SymMatrix& b);
Vec mul(const SymMatrix& a, const Vec& x);

/// tr(A B) for symmetric A, B.
double trace_product(const SymMatrix& a, const SymMatrix& b);

struct SymEigen {
  Vec values;      // descending
  Matrix vectors;  // column k is the eigenvector of values[k]
};

/// Cyclic Jacobi eigendecomposition. Throws std::runtime_error if the
/// off-diagonal norm fails to converge within the sweep cap.
SymEigen sym_eigen(const SymMatrix& m);

/// Q f(Lambda) Q^T for a scalar function applied to the spectrum.
SymMatrix apply_spectral(const SymEigen& e, const std::function<double(double)>& f);

/// Largest |eigenvalue| (spectral norm of a symmetric matrix).
double spectral_norm(const SymMatrix& m);

/// Inverse through the spectrum; throws if an eigenvalue is exactly zero.
SymMatrix sym_inverse(const SymMatrix& m);

struct PhasePair {
  SymMatrix sin2theta;
  SymMatrix cos2theta;
};

// Bounded rational forms of the symplectic phase functions, evaluated
// spectrally so every eigenvalue stays in [-1, 1]:
//   direct   (sigma):  sin2T = -2 s/(1+s^2),  cos2T = (1-s^2)/(1+s^2)
//   inverted (tau):    sin2T = -2 t/(1+t^2),  cos2T = (t^2-1)/(1+t^2)
PhasePair phase_functions_direct(const SymMatrix& sigma);
PhasePair phase_functions_inverted(const SymMatrix& tau);

struct LogAbsDet {
  double value = 0.0;  // ln |det M|
  int sign = 0;        // sign of det; 0 marks an exactly singular factor
  bool singular() const { return sign == 0; }
};

/// ln|det M| via LU with partial pivoting. An exactly zero pivot is
/// reported as singular, distinct from a numerical failure (non-finite
/// input throws).
LogAbsDet log_abs_det(Matrix m);

/// Solves A X = B by pivoted LU. Returns false (and leaves X unspecified)
/// when A is singular.
bool lu_solve(Matrix a, const Matrix& b, Matrix& x);

}  // namespace ksent
