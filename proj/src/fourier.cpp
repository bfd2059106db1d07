#include "pmri/fourier.hpp"

#include <cmath>

namespace pmri {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, in place, unnormalized.
void fft_pow2(cplx* a, int n, bool inverse) {
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * kPi / len * (inverse ? 1.0 : -1.0);
    cplx wl(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (int j = 0; j < len / 2; ++j) {
        cplx u = a[i + j];
        cplx v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// Bluestein's algorithm for arbitrary n, expressed as a circular
// convolution of length m = next power of two >= 2n-1.
void fft_bluestein(cplx* a, int n, bool inverse) {
  int m = 1;
  while (m < 2 * n - 1) m <<= 1;
  double sgn = inverse ? 1.0 : -1.0;
  std::vector<cplx> w(n);
  for (int k = 0; k < n; ++k) {
    // w[k] = exp(sgn * i * pi * k^2 / n), k^2 reduced mod 2n to keep
    // the angle argument small.
    long long k2 = (long long)k * k % (2LL * n);
    double ang = sgn * kPi * double(k2) / double(n);
    w[k] = cplx(std::cos(ang), std::sin(ang));
  }
  std::vector<cplx> u(m, cplx(0, 0)), v(m, cplx(0, 0));
  for (int k = 0; k < n; ++k) u[k] = a[k] * w[k];
  for (int k = 0; k < n; ++k) {
    v[k] = std::conj(w[k]);
    if (k) v[m - k] = std::conj(w[k]);
  }
  fft_pow2(u.data(), m, false);
  fft_pow2(v.data(), m, false);
  for (int k = 0; k < m; ++k) u[k] *= v[k];
  fft_pow2(u.data(), m, true);
  double scale = 1.0 / double(m);
  for (int k = 0; k < n; ++k) a[k] = u[k] * w[k] * scale;
}

void fft_1d(cplx* a, int n, bool inverse) {
  if (n == 1) return;
  if (is_pow2(n))
    fft_pow2(a, n, inverse);
  else
    fft_bluestein(a, n, inverse);
}

// Unnormalized 2-D transform over a row-major plane.
void fft_2d(cplx* data, int h, int w, bool inverse) {
  for (int y = 0; y < h; ++y) fft_1d(data + size_t(y) * w, w, inverse);
  std::vector<cplx> col(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col[y] = data[size_t(y) * w + x];
    fft_1d(col.data(), h, inverse);
    for (int y = 0; y < h; ++y) data[size_t(y) * w + x] = col[y];
  }
}

// Circular shift by (dy, dx).
void circshift(cplx* data, int h, int w, int dy, int dx) {
  std::vector<cplx> tmp(size_t(h) * w);
  for (int y = 0; y < h; ++y) {
    int ty = (y + dy) % h;
    for (int x = 0; x < w; ++x) {
      int tx = (x + dx) % w;
      tmp[size_t(ty) * w + tx] = data[size_t(y) * w + x];
    }
  }
  std::copy(tmp.begin(), tmp.end(), data);
}

}  // namespace

void fft2c_plane(cplx* data, int h, int w) {
  // ifftshift, transform, fftshift, unitary scale
  circshift(data, h, w, (h + 1) / 2, (w + 1) / 2);  // inverse shift
  fft_2d(data, h, w, false);
  circshift(data, h, w, h / 2, w / 2);  // forward shift
  double s = 1.0 / std::sqrt(double(h) * double(w));
  for (size_t i = 0; i < size_t(h) * w; ++i) data[i] *= s;
}

void ifft2c_plane(cplx* data, int h, int w) {
  circshift(data, h, w, (h + 1) / 2, (w + 1) / 2);
  fft_2d(data, h, w, true);
  circshift(data, h, w, h / 2, w / 2);
  double s = 1.0 / std::sqrt(double(h) * double(w));
  for (size_t i = 0; i < size_t(h) * w; ++i) data[i] *= s;
}

ComplexImage fft2c(const ComplexImage& x) {
  ComplexImage out = x;
  fft2c_plane(out.data.data(), out.height, out.width);
  return out;
}

ComplexImage ifft2c(const ComplexImage& x) {
  ComplexImage out = x;
  ifft2c_plane(out.data.data(), out.height, out.width);
  return out;
}

namespace {

void check_mask_shape(int h, int w, const SamplingMask& mask,
                      const char* what) {
  if (mask.height != h || mask.width != w)
    throw numeric_error(std::string(what) + ": mask shape mismatch");
}

}  // namespace

KSpaceData apply_forward(const MultiCoilImage& img, const SamplingMask& mask) {
  check_mask_shape(img.height, img.width, mask, "apply_forward");
  KSpaceData out(img.coils, img.height, img.width);
  std::copy(img.data.begin(), img.data.end(), out.data.begin());
  for (int c = 0; c < img.coils; ++c) {
    cplx* p = out.plane(c);
    fft2c_plane(p, img.height, img.width);
    for (size_t i = 0; i < out.plane_size(); ++i)
      if (!mask.keep[i]) p[i] = cplx(0, 0);
  }
  return out;
}

MultiCoilImage apply_adjoint(const KSpaceData& k, const SamplingMask& mask) {
  check_mask_shape(k.height, k.width, mask, "apply_adjoint");
  MultiCoilImage out(k.coils, k.height, k.width);
  std::copy(k.data.begin(), k.data.end(), out.data.begin());
  for (int c = 0; c < k.coils; ++c) {
    cplx* p = out.plane(c);
    for (size_t i = 0; i < out.plane_size(); ++i)
      if (!mask.keep[i]) p[i] = cplx(0, 0);
    ifft2c_plane(p, k.height, k.width);
  }
  return out;
}

MultiCoilImage dc_solve(const MultiCoilImage& z, const KSpaceData& b,
                        const SamplingMask& mask, double lambda) {
  if (lambda <= 0.0) throw numeric_error("dc_solve: lambda must be > 0");
  if (z.coils != b.coils || z.height != b.height || z.width != b.width)
    throw numeric_error("dc_solve: shape mismatch");
  check_mask_shape(z.height, z.width, mask, "dc_solve");
  MultiCoilImage out(z.coils, z.height, z.width);
  double inv = 1.0 / (1.0 + lambda);
  for (int c = 0; c < z.coils; ++c) {
    cplx* p = out.plane(c);
    const cplx* zp = z.plane(c);
    const cplx* bp = b.plane(c);
    std::copy(zp, zp + z.plane_size(), p);
    fft2c_plane(p, z.height, z.width);
    for (size_t i = 0; i < z.plane_size(); ++i)
      if (mask.keep[i]) p[i] = (bp[i] + lambda * p[i]) * inv;
    ifft2c_plane(p, z.height, z.width);
  }
  return out;
}

MultiCoilImage dc_backward(const MultiCoilImage& grad,
                           const SamplingMask& mask, double lambda) {
  if (lambda <= 0.0) throw numeric_error("dc_backward: lambda must be > 0");
  check_mask_shape(grad.height, grad.width, mask, "dc_backward");
  MultiCoilImage out = grad;
  double g = lambda / (1.0 + lambda);
  for (int c = 0; c < grad.coils; ++c) {
    cplx* p = out.plane(c);
    fft2c_plane(p, grad.height, grad.width);
    for (size_t i = 0; i < grad.plane_size(); ++i)
      if (mask.keep[i]) p[i] *= g;
    ifft2c_plane(p, grad.height, grad.width);
  }
  return out;
}

double dc_normal_residual(const MultiCoilImage& g, const MultiCoilImage& z,
                          const KSpaceData& b, const SamplingMask& mask,
                          double lambda) {
  // Work in k-space where the normal operator is diagonal.
  double num = 0.0, den = 0.0;
  for (int c = 0; c < g.coils; ++c) {
    ComplexImage gh(g.height, g.width), zh(g.height, g.width);
    std::copy(g.plane(c), g.plane(c) + g.plane_size(), gh.data.begin());
    std::copy(z.plane(c), z.plane(c) + z.plane_size(), zh.data.begin());
    fft2c_plane(gh.data.data(), g.height, g.width);
    fft2c_plane(zh.data.data(), g.height, g.width);
    const cplx* bp = b.plane(c);
    for (size_t i = 0; i < g.plane_size(); ++i) {
      double m = mask.keep[i] ? 1.0 : 0.0;
      cplx rhs = m * bp[i] + lambda * zh.data[i];
      cplx lhs = (m + lambda) * gh.data[i];
      num += std::norm(lhs - rhs);
      den += std::norm(rhs);
    }
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace pmri
