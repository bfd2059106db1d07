#pragma once

#include <cmath>
#include <complex>
#include <filesystem>
#include <string>
#include <vector>

#include "pmri/common.hpp"
#include "pmri/linalg.hpp"
#include "pmri/tensor.hpp"
#include "pmri/unrolled.hpp"

namespace pmri::test {

/// Random complex image with float32-representable entries.
inline ComplexImage random_image(int h, int w, uint64_t seed) {
  Rng rng(seed, 7);
  ComplexImage img(h, w);
  for (cplx& v : img.data)
    v = to_f32(cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)));
  return img;
}

inline MultiCoilImage random_multicoil(int n, int h, int w, uint64_t seed) {
  Rng rng(seed, 8);
  MultiCoilImage img(n, h, w);
  for (cplx& v : img.data)
    v = to_f32(cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)));
  return img;
}

inline KSpaceData random_kspace(int n, int h, int w, uint64_t seed) {
  Rng rng(seed, 9);
  KSpaceData k(n, h, w);
  for (cplx& v : k.data)
    v = to_f32(cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)));
  return k;
}

inline CMat random_cmat(int rows, int cols, uint64_t seed) {
  Rng rng(seed, 10);
  CMat m(rows, cols);
  for (cplx& v : m.a) v = cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
  return m;
}

inline double rel_err(double got, double want) {
  double d = std::abs(got - want);
  double s = std::abs(want);
  return s > 0 ? d / s : d;
}

/// Central-difference gradient comparison at the 1e-4 relative level.
/// The absolute allowance covers the roundoff floor of the difference
/// oracle itself (cancellation of two O(loss) evaluations at step h),
/// so only the implementation under test is judged, not the oracle.
inline bool fd_matches(double analytic, double fd, double loss_scale,
                       double step, double rel_tol = 1e-4) {
  double noise = 50.0 * 2.3e-16 * std::abs(loss_scale) / step;
  double err = std::abs(fd - analytic);
  return err <= rel_tol * std::max(std::abs(fd), std::abs(analytic)) + noise;
}

inline double norm2(const std::vector<cplx>& v) {
  double s = 0.0;
  for (const cplx& z : v) s += std::norm(z);
  return std::sqrt(s);
}

inline double rel_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

inline cplx inner(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  cplx s(0, 0);
  for (size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

/// Brute-force centered unitary DFT used as the FFT oracle.
inline ComplexImage naive_fft2c(const ComplexImage& x) {
  const int h = x.height, w = x.width;
  const double tau = 6.283185307179586476925286766559;
  ComplexImage out(h, w);
  int cy = h / 2, cx = w / 2;
  for (int ky = 0; ky < h; ++ky) {
    for (int kx = 0; kx < w; ++kx) {
      cplx acc(0, 0);
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          double ph = -tau * (double(ky - cy) * (y - cy) / h +
                              double(kx - cx) * (xx - cx) / w);
          acc += x.at(y, xx) * cplx(std::cos(ph), std::sin(ph));
        }
      out.at(ky, kx) = acc / std::sqrt(double(h) * w);
    }
  }
  return out;
}

/// Eigenvalue oracle for small Hermitian PSD matrices: power iteration
/// with deflation, independent of the Jacobi code under test.
inline std::vector<double> power_eigvals(CMat s, int iters = 4000) {
  const int n = s.rows;
  std::vector<double> vals;
  Rng rng(1234, 5);
  for (int k = 0; k < n; ++k) {
    std::vector<cplx> v(n);
    for (cplx& z : v) z = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
    double lam = 0.0;
    for (int it = 0; it < iters; ++it) {
      std::vector<cplx> nv(n, cplx(0, 0));
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) nv[i] += s.at(i, j) * v[j];
      double nn = 0.0;
      for (const cplx& z : nv) nn += std::norm(z);
      nn = std::sqrt(nn);
      if (nn == 0.0) break;
      for (cplx& z : nv) z /= nn;
      lam = nn;
      v = nv;
    }
    // Rayleigh quotient for the converged direction.
    std::vector<cplx> sv(n, cplx(0, 0));
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) sv[i] += s.at(i, j) * v[j];
    cplx rq(0, 0);
    for (int i = 0; i < n; ++i) rq += std::conj(v[i]) * sv[i];
    lam = rq.real();
    vals.push_back(lam);
    // Deflate.
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        s.at(i, j) -= lam * v[i] * std::conj(v[j]);
  }
  std::sort(vals.begin(), vals.end(), std::greater<double>());
  return vals;
}

/// Activation-pattern signature of a forward pass: which units were
/// active and which pooling corners won. A central difference is a
/// valid derivative oracle only when both perturbed passes share the
/// same pattern; parameters whose step crosses a kink are resampled.
template <typename T, typename ActsT>
void append_encoder_signature(const ActsT& e, std::vector<uint8_t>& sig) {
  for (const auto* t : {&e.a0, &e.a1, &e.a2, &e.a3, &e.a4, &e.a5})
    for (const T& v : t->v) sig.push_back(v > T(0) ? 1 : 0);
  sig.insert(sig.end(), e.idx1.begin(), e.idx1.end());
  sig.insert(sig.end(), e.idx2.begin(), e.idx2.end());
}

template <typename T, typename DecT>
void append_decoder_signature(const DecT& d, std::vector<uint8_t>& sig) {
  for (const auto* t : {&d.d0, &d.d1, &d.d2, &d.d3})
    for (const T& v : t->v) sig.push_back(v > T(0) ? 1 : 0);
}

template <typename T>
std::vector<uint8_t> eval_signature(const ModelEval<T>& ev) {
  std::vector<uint8_t> sig;
  for (const Activations<T>& a : ev.trace.acts) {
    append_encoder_signature<T>(a.enc, sig);
    append_decoder_signature<T>(a.rec, sig);
    append_decoder_signature<T>(a.seg, sig);
  }
  if (ev.cascade_acts.valid) {
    append_encoder_signature<T>(ev.cascade_acts.enc, sig);
    append_decoder_signature<T>(ev.cascade_acts.rec, sig);
  }
  return sig;
}

/// Coil weights constant over the non-overlapping patch tiles of an
/// M-stride lattice (tile boundaries at offset -M/2 so patches align).
/// Every aligned patch matrix of the result is exactly rank one, while
/// the coil combination still varies across tiles, which keeps the
/// undersampled problem well posed.
inline MultiCoilImage tile_constant_coils(const ComplexImage& img, int coils,
                                          int m, uint64_t seed) {
  Rng rng(seed, 3);
  int ty = img.height / m, tx = img.width / m;
  std::vector<std::vector<cplx>> tiles(size_t(ty) * tx,
                                       std::vector<cplx>(coils));
  for (auto& tile : tiles) {
    double s2 = 0.0;
    for (cplx& v : tile) {
      v = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
      s2 += std::norm(v);
    }
    for (cplx& v : tile) v /= std::sqrt(s2);
  }
  int off = m / 2;
  MultiCoilImage out(coils, img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    int tyi = ((y + off) % img.height) / m;
    for (int x = 0; x < img.width; ++x) {
      int txi = ((x + off) % img.width) / m;
      const auto& tile = tiles[size_t(tyi) * tx + txi];
      for (int k = 0; k < coils; ++k) out.at(k, y, x) = tile[k] * img.at(y, x);
    }
  }
  return out;
}

/// Scratch directory helper for file-based tests.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    base_ = std::filesystem::temp_directory_path() /
            ("pmri_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(base_);
    std::filesystem::create_directories(base_);
  }
  ~TempDir() { std::filesystem::remove_all(base_); }
  std::string path(const std::string& name = "") const {
    return name.empty() ? base_.string() : (base_ / name).string();
  }

 private:
  std::filesystem::path base_;
};

}  // namespace pmri::test
