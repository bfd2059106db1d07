#include "pmri/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pmri {

bool CMat::finite() const {
  for (const cplx& z : a)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

CMat matmul(const CMat& x, const CMat& y) {
  if (x.cols != y.rows) throw numeric_error("matmul: shape mismatch");
  CMat out(x.rows, y.cols);
  for (int j = 0; j < y.cols; ++j)
    for (int k = 0; k < x.cols; ++k) {
      cplx f = y.at(k, j);
      if (f == cplx(0, 0)) continue;
      const cplx* xc = x.col(k);
      cplx* oc = out.col(j);
      for (int i = 0; i < x.rows; ++i) oc[i] += xc[i] * f;
    }
  return out;
}

CMat adjoint(const CMat& x) {
  CMat out(x.cols, x.rows);
  for (int j = 0; j < x.cols; ++j)
    for (int i = 0; i < x.rows; ++i) out.at(j, i) = std::conj(x.at(i, j));
  return out;
}

CMat gram(const CMat& x) {
  CMat out(x.cols, x.cols);
  for (int j = 0; j < x.cols; ++j)
    for (int i = 0; i <= j; ++i) {
      cplx s(0, 0);
      const cplx* ci = x.col(i);
      const cplx* cj = x.col(j);
      for (int r = 0; r < x.rows; ++r) s += std::conj(ci[r]) * cj[r];
      out.at(i, j) = s;
      out.at(j, i) = std::conj(s);
    }
  return out;
}

double fro_norm(const CMat& x) {
  double s = 0.0;
  for (const cplx& z : x.a) s += std::norm(z);
  return std::sqrt(s);
}

namespace {

// Unitary 2x2 acting on columns (p, q):
//   [bp' bq'] = [bp bq] * [[c, s*e^{i phi}], [-s*e^{-i phi}, c]]
// chosen so the rotated columns are orthogonal.
struct Rotation {
  double c, s;
  cplx phase;  // e^{i phi} of the original inner product
};

Rotation make_rotation(double alpha, double beta, cplx g) {
  double ag = std::abs(g);
  Rotation rot;
  rot.phase = g / ag;
  double tau = (beta - alpha) / (2.0 * ag);
  double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
  rot.c = 1.0 / std::sqrt(1.0 + t * t);
  rot.s = rot.c * t;
  return rot;
}

void apply_rotation_cols(CMat& m, int p, int q, const Rotation& r) {
  cplx ph = r.phase;
  cplx phc = std::conj(ph);
  cplx* cp = m.col(p);
  cplx* cq = m.col(q);
  for (int i = 0; i < m.rows; ++i) {
    cplx bp = cp[i];
    cplx bq = cq[i];
    cp[i] = r.c * bp - r.s * phc * bq;
    cq[i] = r.s * ph * bp + r.c * bq;
  }
}

// Gram-Schmidt completion for exactly zero singular directions.
void complete_column(CMat& u, int j) {
  for (int cand = 0; cand < u.rows; ++cand) {
    std::vector<cplx> v(u.rows, cplx(0, 0));
    v[cand] = 1.0;
    for (int k = 0; k < u.cols; ++k) {
      if (k == j) continue;
      const cplx* ck = u.col(k);
      cplx dot(0, 0);
      for (int i = 0; i < u.rows; ++i) dot += std::conj(ck[i]) * v[i];
      for (int i = 0; i < u.rows; ++i) v[i] -= dot * ck[i];
    }
    double n = 0.0;
    for (const cplx& z : v) n += std::norm(z);
    n = std::sqrt(n);
    if (n > 0.5) {
      for (int i = 0; i < u.rows; ++i) u.at(i, j) = v[i] / n;
      return;
    }
  }
  throw numeric_error("svd: failed to complete orthonormal basis");
}

SvdResult svd_tall(const CMat& m) {
  const int n = m.cols;
  CMat b = m;
  CMat v = CMat::identity(n);
  const double tol = 1e-14;
  const int max_sweeps = 60;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0;
        cplx g(0, 0);
        const cplx* cp = b.col(p);
        const cplx* cq = b.col(q);
        for (int i = 0; i < b.rows; ++i) {
          alpha += std::norm(cp[i]);
          beta += std::norm(cq[i]);
          g += std::conj(cp[i]) * cq[i];
        }
        if (std::abs(g) <= tol * std::sqrt(alpha * beta) || alpha == 0.0 ||
            beta == 0.0)
          continue;
        Rotation rot = make_rotation(alpha, beta, g);
        apply_rotation_cols(b, p, q, rot);
        apply_rotation_cols(v, p, q, rot);
        rotated = true;
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sig(n);
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    const cplx* cj = b.col(j);
    for (int i = 0; i < b.rows; ++i) s += std::norm(cj[i]);
    sig[j] = std::sqrt(s);
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return sig[i] > sig[j]; });

  SvdResult res;
  res.sigma.resize(n);
  res.u = CMat(m.rows, n);
  res.v = CMat(n, n);
  // Columns at rounding level carry no usable direction: normalizing
  // them gives vectors that are not orthogonal to the numerical range.
  // Leave them zero here and complete an orthonormal basis below.
  double sig_floor = 4e-14 * (sig[order[0]] > 0.0 ? sig[order[0]] : 1.0);
  for (int j = 0; j < n; ++j) {
    int src = order[j];
    res.sigma[j] = sig[src];
    for (int i = 0; i < n; ++i) res.v.at(i, j) = v.at(i, src);
    if (sig[src] > sig_floor) {
      const cplx* cj = b.col(src);
      for (int i = 0; i < m.rows; ++i) res.u.at(i, j) = cj[i] / sig[src];
    }
  }
  for (int j = 0; j < n; ++j)
    if (res.sigma[j] <= sig_floor) complete_column(res.u, j);
  return res;
}

}  // namespace

SvdResult svd(const CMat& m) {
  if (!m.finite()) throw numeric_error("svd: non-finite input");
  if (m.rows >= m.cols) return svd_tall(m);
  SvdResult t = svd_tall(adjoint(m));
  SvdResult res;
  res.sigma = std::move(t.sigma);
  res.u = std::move(t.v);
  res.v = std::move(t.u);
  return res;
}

double nuclear_norm(const CMat& m) {
  if (!m.finite()) throw numeric_error("nuclear_norm: non-finite input");
  SvdResult s = svd(m);
  double sum = 0.0;
  for (double v : s.sigma) sum += v;
  return sum;
}

EigResult hermitian_eig(const CMat& m) {
  if (m.rows != m.cols) throw numeric_error("hermitian_eig: not square");
  if (!m.finite()) throw numeric_error("hermitian_eig: non-finite input");
  const int n = m.rows;
  CMat s = m;
  // Enforce exact Hermitian structure from the lower triangle.
  for (int j = 0; j < n; ++j) {
    s.at(j, j) = cplx(s.at(j, j).real(), 0.0);
    for (int i = j + 1; i < n; ++i) s.at(j, i) = std::conj(s.at(i, j));
  }
  CMat v = CMat::identity(n);
  const double tol = 1e-15;
  const int max_sweeps = 60;
  double scale = 0.0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(s.at(i, i).real()));
  for (const cplx& z : s.a) scale = std::max(scale, std::abs(z));
  if (scale == 0.0) scale = 1.0;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        cplx g = s.at(p, q);
        if (std::abs(g) <= tol * scale) continue;
        Rotation rot =
            make_rotation(s.at(p, p).real(), s.at(q, q).real(), g);
        // s <- J^H s J, applied as column then row update.
        apply_rotation_cols(s, p, q, rot);
        // Row update is the column update on the adjoint.
        cplx ph = rot.phase;
        cplx phc = std::conj(ph);
        for (int j = 0; j < n; ++j) {
          cplx rp = s.at(p, j);
          cplx rq = s.at(q, j);
          s.at(p, j) = rot.c * rp - rot.s * ph * rq;
          s.at(q, j) = rot.s * phc * rp + rot.c * rq;
        }
        apply_rotation_cols(v, p, q, rot);
        rotated = true;
      }
    }
    if (!rotated) break;
  }

  std::vector<double> ev(n);
  for (int i = 0; i < n; ++i) ev[i] = s.at(i, i).real();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return ev[i] > ev[j]; });
  EigResult res;
  res.values.resize(n);
  res.vectors = CMat(n, n);
  for (int j = 0; j < n; ++j) {
    res.values[j] = ev[order[j]];
    for (int i = 0; i < n; ++i) res.vectors.at(i, j) = v.at(i, order[j]);
  }
  return res;
}

CgResult conjugate_gradient(
    const std::function<void(const std::vector<cplx>&, std::vector<cplx>&)>&
        apply,
    const std::vector<cplx>& b, const std::vector<cplx>& x0, double tol,
    int max_iters) {
  const size_t n = b.size();
  CgResult res;
  res.x = x0;
  res.x.resize(n, cplx(0, 0));

  auto dot_re = [](const std::vector<cplx>& u, const std::vector<cplx>& v) {
    double s = 0.0;
    for (size_t i = 0; i < u.size(); ++i)
      s += u[i].real() * v[i].real() + u[i].imag() * v[i].imag();
    return s;
  };

  std::vector<cplx> r(n), p(n), ap(n);
  apply(res.x, ap);
  for (size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
  p = r;
  double bnorm = std::sqrt(dot_re(b, b));
  if (bnorm == 0.0) {
    std::fill(res.x.begin(), res.x.end(), cplx(0, 0));
    res.converged = true;
    return res;
  }
  double rr = dot_re(r, r);
  std::vector<cplx> best = res.x;
  double best_rr = rr;
  int it = 0;
  for (; it < max_iters; ++it) {
    if (std::sqrt(rr) <= tol * bnorm) break;
    apply(p, ap);
    double pap = dot_re(p, ap);
    if (pap <= 0.0) break;  // operator not PD at this point, bail out
    double alpha = rr / pap;
    for (size_t i = 0; i < n; ++i) res.x[i] += alpha * p[i];
    for (size_t i = 0; i < n; ++i) r[i] -= alpha * ap[i];
    double rr_new = dot_re(r, r);
    if (rr_new < best_rr) {
      best_rr = rr_new;
      best = res.x;
    }
    double beta = rr_new / rr;
    rr = rr_new;
    for (size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  res.iters = it;
  res.rel_residual = std::sqrt(rr) / bnorm;
  res.converged = res.rel_residual <= tol;
  if (!res.converged && best_rr < rr) {
    res.x = best;
    res.rel_residual = std::sqrt(best_rr) / bnorm;
  }
  return res;
}

}  // namespace pmri
