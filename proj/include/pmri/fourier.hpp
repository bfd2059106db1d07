#pragma once

#include "pmri/tensor.hpp"

namespace pmri {

/// Centered unitary 2-D FFT: the image origin sits at the array center
/// (floor(H/2), floor(W/2)) in both domains and the scaling is
/// 1/sqrt(H*W), so the transform preserves the l2 norm exactly.
ComplexImage fft2c(const ComplexImage& x);
ComplexImage ifft2c(const ComplexImage& x);

// In-place plane variants used by the multi-coil operators.
void fft2c_plane(cplx* data, int h, int w);
void ifft2c_plane(cplx* data, int h, int w);

/// Multi-coil forward operator: per coil, centered unitary FFT followed
/// by zeroing of unsampled locations. Coil sensitivities live inside
/// the coil images themselves, so the operator is diagonal in k-space.
KSpaceData apply_forward(const MultiCoilImage& img, const SamplingMask& mask);

/// Adjoint of apply_forward: per coil, zero unsampled then inverse FFT.
MultiCoilImage apply_adjoint(const KSpaceData& k, const SamplingMask& mask);

/// The sampling operator bundled with its geometry. Linear, and
/// idempotent on the sampled support: A A^H A = A.
struct ForwardOp {
  SamplingMask mask;
  int coils = 1;

  KSpaceData forward(const MultiCoilImage& img) const {
    return apply_forward(img, mask);
  }
  MultiCoilImage adjoint(const KSpaceData& k) const {
    return apply_adjoint(k, mask);
  }
};

/// Data-consistency solve: returns the minimizer of
///   |A(g) - b|^2 + lambda |g - z|^2,
/// computed per coil and k-space location in closed form (sampled
/// entries blend measurement and prior, unsampled entries copy the
/// prior). Requires lambda > 0.
MultiCoilImage dc_solve(const MultiCoilImage& z, const KSpaceData& b,
                        const SamplingMask& mask, double lambda);

/// Jacobian-transpose of dc_solve with respect to z. The map is linear
/// with a real diagonal in k-space (lambda/(1+lambda) on sampled
/// entries, 1 on unsampled), and it is its own transpose in the real
/// view, so the same routine serves forward and backward.
MultiCoilImage dc_backward(const MultiCoilImage& grad, const SamplingMask& mask,
                           double lambda);

/// Relative residual of the normal equations at g:
///   |(A^H A + lambda I) g - (A^H b + lambda z)| / |A^H b + lambda z|.
double dc_normal_residual(const MultiCoilImage& g, const MultiCoilImage& z,
                          const KSpaceData& b, const SamplingMask& mask,
                          double lambda);

}  // namespace pmri
