#pragma once

#include <vector>

#include "pmri/linalg.hpp"
#include "pmri/tensor.hpp"

namespace pmri {

/// Patch lattice description. Patches wrap periodically at the image
/// boundary and centers sit on a row-major stride lattice.
struct PatchConfig {
  int patch_size = 8;  // side length M
  int stride = 4;

  void validate(int height, int width, int coils) const;
  int centers_y(int height) const { return (height + stride - 1) / stride; }
  int centers_x(int width) const { return (width + stride - 1) / stride; }
};

/// Co-located multi-coil patch matrix: column i holds the vectorized
/// M x M patch of coil i around the center, so the matrix is M^2 x N.
struct PatchMatrix {
  int center_y = 0;
  int center_x = 0;
  CMat m;
};

/// Trailing singular directions of a patch matrix. Row vectors
/// annihilate the matrix from the left, column vectors from the right;
/// both families are orthonormal.
struct NullSpaceBasis {
  int center_y = 0;
  int center_x = 0;
  int rank = 0;
  CMat left;   // M^2 x (N - rank), column j conjugated gives the row filter
  CMat right;  // N x (N - rank)
  std::vector<double> sigma;  // all singular values, descending
};

/// Options of the iteratively re-weighted solver.
struct IrlsOptions {
  double cg_tol = 1e-8;
  int cg_max_iters = 200;
  double eps_initial_scale = 0.01;  // eps0 = scale * max sigma1^2
  double eps_min_scale = 1e-8;      // floor = scale * eps0
};

/// Solver state after clear_reconstruct: final weights, smoothing value
/// and the smoothed objective trace (value before and after each
/// quadratic solve, both evaluated at that iteration's eps).
struct IrlsState {
  std::vector<CMat> weights;
  double eps = 0.0;
  std::vector<double> objective_before;
  std::vector<double> objective_after;
  std::vector<int> cg_iters;
  bool cg_all_converged = true;
};

/// Extracts one patch matrix per lattice center, row-major center order,
/// periodic boundary.
std::vector<PatchMatrix> extract_patches(const MultiCoilImage& img,
                                         const PatchConfig& cfg);

/// Transpose of extract_patches: sums patch re-insertions. With a full
/// periodic cover the composition with extract_patches multiplies each
/// pixel by its cover count.
MultiCoilImage patch_adjoint(const std::vector<PatchMatrix>& patches,
                             const PatchConfig& cfg, int coils, int height,
                             int width);

/// Value of the locally-low-rank objective
///   |A(g) - b|^2 + lambda * sum_c nuclear_norm(patch_c(g)).
double clear_objective(const MultiCoilImage& img, const KSpaceData& b,
                       const SamplingMask& mask, double lambda,
                       const PatchConfig& cfg);

/// IRLS weight matrix W = (G^H G + eps I)^{-1/2} via Hermitian
/// eigen-decomposition. tr(G W G^H) approaches the nuclear norm of G as
/// eps goes to zero.
CMat irls_weights(const CMat& patch, double eps);

/// Null-space basis of a patch matrix at a relative singular value
/// threshold: rank r counts sigma_k >= tau * sigma_1 and the trailing
/// thin-SVD directions form the annihilating families.
NullSpaceBasis null_space_filters(const CMat& patch, double tau_rank);

/// Stacked annihilation operator of one null direction j: N intra-coil
/// rows (the left vector applied per coil) followed by M^2 inter-coil
/// rows (the right vector combining coils per pixel). Width is N * M^2,
/// matching the vertical concatenation of the coil patches.
CMat annihilation_operator(const NullSpaceBasis& basis, int patch_size,
                           int coils, int j);

/// Evaluates the annihilation responses of null direction j directly on
/// the image as spatially varying correlations at the basis center,
/// without forming the patch matrix. Length N + M^2.
std::vector<cplx> annihilation_responses(const MultiCoilImage& img,
                                         const PatchConfig& cfg,
                                         const NullSpaceBasis& basis, int j);

/// Locally-low-rank reconstruction: alternates IRLS weight updates with
/// a conjugate-gradient solve of the weighted quadratic subproblem,
/// halving the smoothing value each outer iteration. Returns the final
/// image and the solver state (objective trace, weights, CG flags).
std::pair<MultiCoilImage, IrlsState> clear_reconstruct(
    const KSpaceData& b, const SamplingMask& mask, double lambda,
    const PatchConfig& cfg, int outer_iters, const IrlsOptions& opts = {});

}  // namespace pmri
