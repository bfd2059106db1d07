#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "pmri/common.hpp"

namespace pmri {

constexpr int kNumClasses = 4;  // background, CSF, GM, WM

/// Single complex image, row-major. Values are kept in double precision
/// in memory; the on-disk form is complex64.
struct ComplexImage {
  int height = 0;
  int width = 0;
  std::vector<cplx> data;

  ComplexImage() = default;
  ComplexImage(int h, int w) : height(h), width(w), data(size_t(h) * w) {}

  cplx& at(int y, int x) { return data[size_t(y) * width + x]; }
  cplx at(int y, int x) const { return data[size_t(y) * width + x]; }
  size_t size() const { return data.size(); }

  void validate() const;
};

/// Stack of per-coil complex images sharing one geometry.
struct MultiCoilImage {
  int coils = 0;
  int height = 0;
  int width = 0;
  std::vector<cplx> data;  // coil-major planes

  MultiCoilImage() = default;
  MultiCoilImage(int n, int h, int w)
      : coils(n), height(h), width(w), data(size_t(n) * h * w) {}

  cplx& at(int c, int y, int x) {
    return data[(size_t(c) * height + y) * width + x];
  }
  cplx at(int c, int y, int x) const {
    return data[(size_t(c) * height + y) * width + x];
  }
  cplx* plane(int c) { return data.data() + size_t(c) * height * width; }
  const cplx* plane(int c) const {
    return data.data() + size_t(c) * height * width;
  }
  size_t plane_size() const { return size_t(height) * width; }
  size_t size() const { return data.size(); }

  void validate() const;
};

/// Multi-coil Fourier samples. Entries at unsampled locations are zero.
struct KSpaceData {
  int coils = 0;
  int height = 0;
  int width = 0;
  std::vector<cplx> data;

  KSpaceData() = default;
  KSpaceData(int n, int h, int w)
      : coils(n), height(h), width(w), data(size_t(n) * h * w) {}

  cplx& at(int c, int y, int x) {
    return data[(size_t(c) * height + y) * width + x];
  }
  cplx at(int c, int y, int x) const {
    return data[(size_t(c) * height + y) * width + x];
  }
  cplx* plane(int c) { return data.data() + size_t(c) * height * width; }
  const cplx* plane(int c) const {
    return data.data() + size_t(c) * height * width;
  }
  size_t plane_size() const { return size_t(height) * width; }
  size_t size() const { return data.size(); }

  void validate() const;
};

/// Binary k-space sampling pattern plus the acceleration it was built for.
struct SamplingMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> keep;
  double accel = 1.0;

  SamplingMask() = default;
  SamplingMask(int h, int w, double a)
      : height(h), width(w), keep(size_t(h) * w, 0), accel(a) {}

  uint8_t& at(int y, int x) { return keep[size_t(y) * width + x]; }
  uint8_t at(int y, int x) const { return keep[size_t(y) * width + x]; }

  double sampled_fraction() const {
    if (keep.empty()) return 0.0;
    size_t n = 0;
    for (uint8_t k : keep) n += k;
    return double(n) / double(keep.size());
  }

  void validate() const;
};

/// Per-pixel class indices in [0, kNumClasses).
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> labels;

  LabelMap() = default;
  LabelMap(int h, int w) : height(h), width(w), labels(size_t(h) * w, 0) {}

  uint8_t& at(int y, int x) { return labels[size_t(y) * width + x]; }
  uint8_t at(int y, int x) const { return labels[size_t(y) * width + x]; }

  void validate() const;
};

/// Per-pixel class probabilities. Every construction path normalizes or
/// checks so that each pixel sums to one.
struct ProbMap {
  int height = 0;
  int width = 0;
  int num_classes = 0;
  std::vector<double> probs;  // class-major planes

  ProbMap() = default;
  ProbMap(int h, int w, int c)
      : height(h), width(w), num_classes(c), probs(size_t(c) * h * w, 1.0 / c) {}

  double& at(int c, int y, int x) {
    return probs[(size_t(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return probs[(size_t(c) * height + y) * width + x];
  }

  /// Builds a probability map from raw class logits (class-major planes),
  /// applying a numerically stable softmax per pixel.
  static ProbMap from_logits(int h, int w, int c,
                             const std::vector<double>& logits);

  /// Argmax labels; ties resolve to the lowest class index.
  LabelMap argmax() const;

  void validate() const;
};

/// One synthetic acquisition: measurements, the mask that produced them,
/// the simulated coil maps, the gold-standard combined image, and the
/// tissue labels when this dataset is a labelled one.
struct Dataset {
  KSpaceData kspace;
  SamplingMask mask;
  MultiCoilImage sens;
  ComplexImage reference;
  std::optional<LabelMap> labels;
  uint64_t seed = 0;

  bool labelled() const { return labels.has_value(); }
  void validate() const;
};

}  // namespace pmri
