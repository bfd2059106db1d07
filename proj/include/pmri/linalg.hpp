#pragma once

#include <functional>
#include <vector>

#include "pmri/common.hpp"

namespace pmri {

/// Dense complex matrix, column-major. Sized for the small per-patch
/// factorizations (tens of rows, a handful of columns).
struct CMat {
  int rows = 0;
  int cols = 0;
  std::vector<cplx> a;

  CMat() = default;
  CMat(int r, int c) : rows(r), cols(c), a(size_t(r) * c, cplx(0, 0)) {}

  cplx& at(int i, int j) { return a[size_t(j) * rows + i]; }
  cplx at(int i, int j) const { return a[size_t(j) * rows + i]; }
  cplx* col(int j) { return a.data() + size_t(j) * rows; }
  const cplx* col(int j) const { return a.data() + size_t(j) * rows; }

  static CMat identity(int n) {
    CMat m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }

  bool finite() const;
};

CMat matmul(const CMat& x, const CMat& y);
CMat adjoint(const CMat& x);
/// x^H x (Hermitian, cols x cols).
CMat gram(const CMat& x);
double fro_norm(const CMat& x);

/// Thin SVD, singular values descending. Computed by one-sided Jacobi
/// rotations on the columns; suited to the tall, narrow matrices this
/// project produces. For rows < cols the problem is transposed
/// internally. u is rows x k, v is cols x k with k = min(rows, cols);
/// exact zero singular values get orthonormal completion vectors.
struct SvdResult {
  CMat u;
  std::vector<double> sigma;
  CMat v;
};
SvdResult svd(const CMat& m);

/// Sum of singular values.
double nuclear_norm(const CMat& m);

/// Hermitian eigen-decomposition by cyclic Jacobi, eigenvalues
/// descending. Input must be Hermitian; only the lower triangle is
/// trusted.
struct EigResult {
  std::vector<double> values;
  CMat vectors;
};
EigResult hermitian_eig(const CMat& m);

/// Conjugate gradient for Hermitian positive definite operators on
/// flat complex vectors. Stops at |r| <= tol * |b| or max_iters.
struct CgResult {
  std::vector<cplx> x;
  int iters = 0;
  double rel_residual = 0.0;
  bool converged = false;
};
CgResult conjugate_gradient(
    const std::function<void(const std::vector<cplx>&, std::vector<cplx>&)>&
        apply,
    const std::vector<cplx>& b, const std::vector<cplx>& x0, double tol,
    int max_iters);

}  // namespace pmri
