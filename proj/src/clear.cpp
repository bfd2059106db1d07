#include "pmri/clear.hpp"

#include <algorithm>
#include <cmath>

#include "pmri/fourier.hpp"

namespace pmri {

void PatchConfig::validate(int height, int width, int coils) const {
  if (patch_size < 1 || patch_size > std::min(height, width))
    throw numeric_error("PatchConfig: patch_size out of range");
  if (stride < 1 || stride > patch_size)
    throw numeric_error("PatchConfig: stride out of range");
  if (coils >= patch_size * patch_size)
    throw numeric_error("PatchConfig: needs coils < patch_size^2");
}

namespace {

inline int wrap(int v, int n) {
  v %= n;
  return v < 0 ? v + n : v;
}

}  // namespace

std::vector<PatchMatrix> extract_patches(const MultiCoilImage& img,
                                         const PatchConfig& cfg) {
  cfg.validate(img.height, img.width, img.coils);
  const int m = cfg.patch_size;
  const int off = m / 2;
  const int ny = cfg.centers_y(img.height);
  const int nx = cfg.centers_x(img.width);
  std::vector<PatchMatrix> out;
  out.reserve(size_t(ny) * nx);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      PatchMatrix pm;
      pm.center_y = iy * cfg.stride;
      pm.center_x = ix * cfg.stride;
      pm.m = CMat(m * m, img.coils);
      for (int c = 0; c < img.coils; ++c) {
        cplx* col = pm.m.col(c);
        for (int ty = 0; ty < m; ++ty) {
          int y = wrap(pm.center_y - off + ty, img.height);
          for (int tx = 0; tx < m; ++tx) {
            int x = wrap(pm.center_x - off + tx, img.width);
            col[ty * m + tx] = img.at(c, y, x);
          }
        }
      }
      out.push_back(std::move(pm));
    }
  }
  return out;
}

MultiCoilImage patch_adjoint(const std::vector<PatchMatrix>& patches,
                             const PatchConfig& cfg, int coils, int height,
                             int width) {
  cfg.validate(height, width, coils);
  const int m = cfg.patch_size;
  const int off = m / 2;
  const size_t expect = size_t(cfg.centers_y(height)) * cfg.centers_x(width);
  if (patches.size() != expect)
    throw numeric_error("patch_adjoint: lattice mismatch");
  MultiCoilImage out(coils, height, width);
  for (const PatchMatrix& pm : patches) {
    if (pm.m.rows != m * m || pm.m.cols != coils)
      throw numeric_error("patch_adjoint: patch shape mismatch");
    for (int c = 0; c < coils; ++c) {
      const cplx* col = pm.m.col(c);
      for (int ty = 0; ty < m; ++ty) {
        int y = wrap(pm.center_y - off + ty, height);
        for (int tx = 0; tx < m; ++tx) {
          int x = wrap(pm.center_x - off + tx, width);
          out.at(c, y, x) += col[ty * m + tx];
        }
      }
    }
  }
  return out;
}

double clear_objective(const MultiCoilImage& img, const KSpaceData& b,
                       const SamplingMask& mask, double lambda,
                       const PatchConfig& cfg) {
  if (lambda < 0.0) throw numeric_error("clear_objective: lambda < 0");
  if (img.coils != b.coils || img.height != b.height || img.width != b.width)
    throw numeric_error("clear_objective: shape mismatch");
  KSpaceData pred = apply_forward(img, mask);
  double fidelity = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i)
    fidelity += std::norm(pred.data[i] - b.data[i]);
  double reg = 0.0;
  if (lambda > 0.0)
    for (const PatchMatrix& pm : extract_patches(img, cfg))
      reg += nuclear_norm(pm.m);
  return fidelity + lambda * reg;
}

CMat irls_weights(const CMat& patch, double eps) {
  if (eps <= 0.0) throw numeric_error("irls_weights: eps must be > 0");
  EigResult eig = hermitian_eig(gram(patch));
  const int n = patch.cols;
  CMat w(n, n);
  for (int k = 0; k < n; ++k) {
    double lam = std::max(eig.values[k], 0.0);
    double f = 1.0 / std::sqrt(lam + eps);
    const cplx* vk = eig.vectors.col(k);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        w.at(i, j) += f * vk[i] * std::conj(vk[j]);
  }
  // Force exact Hermitian structure against rounding drift.
  for (int j = 0; j < n; ++j) {
    w.at(j, j) = cplx(w.at(j, j).real(), 0.0);
    for (int i = j + 1; i < n; ++i) {
      cplx avg = 0.5 * (w.at(i, j) + std::conj(w.at(j, i)));
      w.at(i, j) = avg;
      w.at(j, i) = std::conj(avg);
    }
  }
  return w;
}

NullSpaceBasis null_space_filters(const CMat& patch, double tau_rank) {
  if (tau_rank <= 0.0 || tau_rank >= 1.0)
    throw numeric_error("null_space_filters: tau_rank must be in (0, 1)");
  SvdResult s = svd(patch);
  NullSpaceBasis basis;
  basis.sigma = s.sigma;
  double s1 = s.sigma.empty() ? 0.0 : s.sigma[0];
  int n = patch.cols;
  int r = 0;
  for (int k = 0; k < n; ++k)
    if (s.sigma[k] >= tau_rank * s1 && s.sigma[k] > 0.0) ++r;
  basis.rank = r;
  int null_dim = n - r;
  basis.left = CMat(patch.rows, null_dim);
  basis.right = CMat(n, null_dim);
  for (int j = 0; j < null_dim; ++j) {
    for (int i = 0; i < patch.rows; ++i)
      basis.left.at(i, j) = s.u.at(i, r + j);
    for (int i = 0; i < n; ++i) basis.right.at(i, j) = s.v.at(i, r + j);
  }
  return basis;
}

CMat annihilation_operator(const NullSpaceBasis& basis, int patch_size,
                           int coils, int j) {
  const int m2 = patch_size * patch_size;
  if (basis.left.rows != m2 || basis.right.rows != coils)
    throw numeric_error("annihilation_operator: basis shape mismatch");
  if (j < 0 || j >= basis.left.cols)
    throw numeric_error("annihilation_operator: null index out of range");
  CMat q(coils + m2, coils * m2);
  // Intra-coil rows: the left filter applied to each coil's patch.
  for (int c = 0; c < coils; ++c)
    for (int t = 0; t < m2; ++t)
      q.at(c, c * m2 + t) = std::conj(basis.left.at(t, j));
  // Inter-coil rows: the right vector combining coils per pixel.
  for (int t = 0; t < m2; ++t)
    for (int c = 0; c < coils; ++c)
      q.at(coils + t, c * m2 + t) = basis.right.at(c, j);
  return q;
}

std::vector<cplx> annihilation_responses(const MultiCoilImage& img,
                                         const PatchConfig& cfg,
                                         const NullSpaceBasis& basis, int j) {
  cfg.validate(img.height, img.width, img.coils);
  const int m = cfg.patch_size;
  const int off = m / 2;
  const int n = img.coils;
  std::vector<cplx> out(size_t(n) + size_t(m) * m, cplx(0, 0));
  // Intra-coil responses: correlate each coil with the left filter,
  // evaluated at the basis center.
  for (int c = 0; c < n; ++c) {
    cplx acc(0, 0);
    for (int ty = 0; ty < m; ++ty) {
      int y = wrap(basis.center_y - off + ty, img.height);
      for (int tx = 0; tx < m; ++tx) {
        int x = wrap(basis.center_x - off + tx, img.width);
        acc += std::conj(basis.left.at(ty * m + tx, j)) * img.at(c, y, x);
      }
    }
    out[c] = acc;
  }
  // Inter-coil responses: combine coils with the right vector at each
  // patch offset.
  for (int ty = 0; ty < m; ++ty) {
    int y = wrap(basis.center_y - off + ty, img.height);
    for (int tx = 0; tx < m; ++tx) {
      int x = wrap(basis.center_x - off + tx, img.width);
      cplx acc(0, 0);
      for (int c = 0; c < n; ++c)
        acc += basis.right.at(c, j) * img.at(c, y, x);
      out[size_t(n) + ty * m + tx] = acc;
    }
  }
  return out;
}

namespace {

// Weighted regularization term applied in image space:
//   v -> 0.5 * sum_c P_c^T(P_c(v) W_c).
// The 0.5 pairs the weight definition with the smoothed objective so
// the quadratic solve majorize-minimizes it.
MultiCoilImage apply_weighted_patches(const MultiCoilImage& v,
                                      const PatchConfig& cfg,
                                      const std::vector<CMat>& weights) {
  std::vector<PatchMatrix> patches = extract_patches(v, cfg);
  for (size_t p = 0; p < patches.size(); ++p)
    patches[p].m = matmul(patches[p].m, weights[p]);
  MultiCoilImage out =
      patch_adjoint(patches, cfg, v.coils, v.height, v.width);
  for (cplx& z : out.data) z *= 0.5;
  return out;
}

// Smoothed surrogate of the nuclear norm term evaluated from the
// eigenvalues of the patch Gram matrices.
double smoothed_objective(const MultiCoilImage& img, const KSpaceData& b,
                          const SamplingMask& mask, double lambda,
                          const PatchConfig& cfg, double eps) {
  KSpaceData pred = apply_forward(img, mask);
  double fidelity = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i)
    fidelity += std::norm(pred.data[i] - b.data[i]);
  double reg = 0.0;
  for (const PatchMatrix& pm : extract_patches(img, cfg)) {
    EigResult eig = hermitian_eig(gram(pm.m));
    for (double lam : eig.values) reg += std::sqrt(std::max(lam, 0.0) + eps);
  }
  return fidelity + lambda * reg;
}

}  // namespace

std::pair<MultiCoilImage, IrlsState> clear_reconstruct(
    const KSpaceData& b, const SamplingMask& mask, double lambda,
    const PatchConfig& cfg, int outer_iters, const IrlsOptions& opts) {
  if (lambda <= 0.0)
    throw numeric_error("clear_reconstruct: lambda must be > 0");
  if (outer_iters < 1)
    throw numeric_error("clear_reconstruct: needs at least 1 iteration");
  cfg.validate(b.height, b.width, b.coils);

  const int n = b.coils, h = b.height, w = b.width;
  MultiCoilImage img = apply_adjoint(b, mask);
  IrlsState state;

  // eps0 from the largest patch spectrum of the zero-filled start.
  double sigma1_sq = 0.0;
  for (const PatchMatrix& pm : extract_patches(img, cfg)) {
    EigResult eig = hermitian_eig(gram(pm.m));
    sigma1_sq = std::max(sigma1_sq, eig.values.empty() ? 0.0 : eig.values[0]);
  }
  if (sigma1_sq <= 0.0) sigma1_sq = 1.0;
  double eps0 = opts.eps_initial_scale * sigma1_sq;
  double eps_min = opts.eps_min_scale * eps0;
  double eps = eps0;

  MultiCoilImage rhs = apply_adjoint(b, mask);

  for (int outer = 0; outer < outer_iters; ++outer) {
    std::vector<PatchMatrix> patches = extract_patches(img, cfg);
    state.weights.clear();
    state.weights.reserve(patches.size());
    for (const PatchMatrix& pm : patches)
      state.weights.push_back(irls_weights(pm.m, eps));
    state.eps = eps;

    state.objective_before.push_back(
        smoothed_objective(img, b, mask, lambda, cfg, eps));

    auto apply = [&](const std::vector<cplx>& x, std::vector<cplx>& y) {
      MultiCoilImage v(n, h, w);
      std::copy(x.begin(), x.end(), v.data.begin());
      MultiCoilImage reg = apply_weighted_patches(v, cfg, state.weights);
      // A^H A in k-space: transform, mask, transform back.
      for (int c = 0; c < n; ++c) {
        cplx* p = v.plane(c);
        fft2c_plane(p, h, w);
        for (size_t i = 0; i < v.plane_size(); ++i)
          if (!mask.keep[i]) p[i] = cplx(0, 0);
        ifft2c_plane(p, h, w);
      }
      y.resize(x.size());
      for (size_t i = 0; i < y.size(); ++i)
        y[i] = v.data[i] + lambda * reg.data[i];
    };

    CgResult cg = conjugate_gradient(apply, rhs.data, img.data, opts.cg_tol,
                                     opts.cg_max_iters);
    state.cg_iters.push_back(cg.iters);
    if (!cg.converged) state.cg_all_converged = false;
    std::copy(cg.x.begin(), cg.x.end(), img.data.begin());

    state.objective_after.push_back(
        smoothed_objective(img, b, mask, lambda, cfg, eps));

    eps = std::max(eps * 0.5, eps_min);
  }
  return {std::move(img), std::move(state)};
}

}  // namespace pmri
