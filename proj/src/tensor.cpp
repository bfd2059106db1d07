#include "pmri/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace pmri {

namespace {

bool all_finite(const std::vector<cplx>& v) {
  for (const cplx& z : v)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

void check_geometry(int h, int w, size_t n, size_t expect, const char* what) {
  if (h < 1 || w < 1) throw numeric_error(std::string(what) + ": empty shape");
  if (n != expect) throw numeric_error(std::string(what) + ": size mismatch");
}

}  // namespace

void ComplexImage::validate() const {
  check_geometry(height, width, data.size(), size_t(height) * width,
                 "ComplexImage");
  if (!all_finite(data)) throw numeric_error("ComplexImage: non-finite value");
}

void MultiCoilImage::validate() const {
  if (coils < 1) throw numeric_error("MultiCoilImage: needs at least 1 coil");
  check_geometry(height, width, data.size(), size_t(coils) * height * width,
                 "MultiCoilImage");
  if (!all_finite(data))
    throw numeric_error("MultiCoilImage: non-finite value");
}

void KSpaceData::validate() const {
  if (coils < 1) throw numeric_error("KSpaceData: needs at least 1 coil");
  check_geometry(height, width, data.size(), size_t(coils) * height * width,
                 "KSpaceData");
  if (!all_finite(data)) throw numeric_error("KSpaceData: non-finite value");
}

void SamplingMask::validate() const {
  check_geometry(height, width, keep.size(), size_t(height) * width,
                 "SamplingMask");
  for (uint8_t k : keep)
    if (k > 1) throw numeric_error("SamplingMask: keep must be 0 or 1");
  if (accel < 1.0) throw numeric_error("SamplingMask: accel must be >= 1");
  double frac = sampled_fraction();
  double target = 1.0 / accel;
  if (std::abs(frac - target) > 0.05 * target + 1.0 / keep.size())
    throw numeric_error("SamplingMask: sampled fraction off target");
}

void LabelMap::validate() const {
  check_geometry(height, width, labels.size(), size_t(height) * width,
                 "LabelMap");
  for (uint8_t l : labels)
    if (l >= kNumClasses) throw numeric_error("LabelMap: class out of range");
}

ProbMap ProbMap::from_logits(int h, int w, int c,
                             const std::vector<double>& logits) {
  if (logits.size() != size_t(c) * h * w)
    throw numeric_error("ProbMap::from_logits: size mismatch");
  ProbMap p(h, w, c);
  size_t plane = size_t(h) * w;
  for (size_t px = 0; px < plane; ++px) {
    double hi = logits[px];
    for (int k = 1; k < c; ++k) hi = std::max(hi, logits[k * plane + px]);
    double sum = 0.0;
    for (int k = 0; k < c; ++k) {
      double e = std::exp(logits[k * plane + px] - hi);
      p.probs[k * plane + px] = e;
      sum += e;
    }
    for (int k = 0; k < c; ++k) p.probs[k * plane + px] /= sum;
  }
  return p;
}

LabelMap ProbMap::argmax() const {
  LabelMap out(height, width);
  size_t plane = size_t(height) * width;
  for (size_t px = 0; px < plane; ++px) {
    int best = 0;
    double hi = probs[px];
    for (int k = 1; k < num_classes; ++k) {
      if (probs[k * plane + px] > hi) {
        hi = probs[k * plane + px];
        best = k;
      }
    }
    out.labels[px] = uint8_t(best);
  }
  return out;
}

void ProbMap::validate() const {
  if (num_classes < 1) throw numeric_error("ProbMap: needs classes");
  if (probs.size() != size_t(num_classes) * height * width)
    throw numeric_error("ProbMap: size mismatch");
  size_t plane = size_t(height) * width;
  for (size_t px = 0; px < plane; ++px) {
    double sum = 0.0;
    for (int k = 0; k < num_classes; ++k) {
      double v = probs[k * plane + px];
      if (!(v >= 0.0)) throw numeric_error("ProbMap: negative probability");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw numeric_error("ProbMap: pixel does not sum to 1");
  }
}

void Dataset::validate() const {
  kspace.validate();
  mask.validate();
  sens.validate();
  reference.validate();
  if (kspace.height != mask.height || kspace.width != mask.width)
    throw numeric_error("Dataset: kspace/mask shape mismatch");
  if (sens.coils != kspace.coils || sens.height != kspace.height ||
      sens.width != kspace.width)
    throw numeric_error("Dataset: sens shape mismatch");
  if (reference.height != kspace.height || reference.width != kspace.width)
    throw numeric_error("Dataset: reference shape mismatch");
  if (labels) {
    labels->validate();
    if (labels->height != kspace.height || labels->width != kspace.width)
      throw numeric_error("Dataset: labels shape mismatch");
  }
  // Unsampled entries must be exactly zero.
  for (int c = 0; c < kspace.coils; ++c)
    for (int y = 0; y < kspace.height; ++y)
      for (int x = 0; x < kspace.width; ++x)
        if (!mask.at(y, x) && kspace.at(c, y, x) != cplx(0.0, 0.0))
          throw numeric_error("Dataset: nonzero kspace at unsampled location");
}

}  // namespace pmri
