#pragma once

#include <optional>
#include <utility>

#include "pmri/tensor.hpp"

namespace pmri {

/// Geometry and intensity layout of the synthetic brain-like phantom.
/// Per-class intensity ranges are disjoint with at least 0.1 separation
/// so that tissue classes stay distinguishable after texturing.
struct PhantomSpec {
  int height = 64;
  int width = 64;
  int num_ellipses = 2;           // extra random blobs per tissue class
  double intensity_lo[kNumClasses] = {0.0, 0.25, 0.55, 0.85};
  double intensity_hi[kNumClasses] = {0.0, 0.35, 0.65, 0.95};
  double texture_amplitude = 0.05;  // fraction of the class intensity
  uint64_t deformation_seed = 0;

  void validate() const;
};

/// Acquisition parameters for the simulated scanner.
struct AcquisitionConfig {
  int coils = 4;
  double noise_sigma = 0.01;      // E|noise|^2 = sigma^2 per sample
  double accel = 6.0;
  double center_fraction = 0.02;  // fully sampled k-space core, by area
  double density_exponent = 1.0;

  void validate() const;
};

/// Piecewise-smooth nested-ellipse phantom with a low-amplitude smooth
/// texture and a smooth global phase. Deterministic in (spec, seed);
/// emitted values are float32-representable.
std::pair<ComplexImage, LabelMap> make_phantom(const PhantomSpec& spec,
                                               uint64_t seed);

/// Smooth complex coil maps: Gaussian bumps at equiangular positions
/// around the field of view times coil-specific linear phases,
/// normalized so the per-pixel sum of squared magnitudes is one.
MultiCoilImage make_coil_sensitivities(int height, int width, int coils,
                                       uint64_t seed);

/// Variable-density Cartesian point mask. Keep probability falls off as
/// (1 - rho/rho_max)^d from the k-space center; the threshold is
/// calibrated so the realized sampled fraction matches 1/accel, and the
/// central block of area center_fraction*H*W is always sampled.
SamplingMask make_vd_mask(int height, int width, double accel,
                          double center_fraction, double density_exponent,
                          uint64_t seed);

/// Simulates the acquisition: per coil, weight the image by the coil
/// map, transform to k-space, add complex white Gaussian noise with
/// E|n|^2 = sigma^2, and zero unsampled locations. The reference field
/// is the sum-of-squares of the noiseless coil images.
Dataset simulate_acquisition(const ComplexImage& image,
                             const MultiCoilImage& sens,
                             const SamplingMask& mask, double noise_sigma,
                             uint64_t seed,
                             std::optional<LabelMap> labels = std::nullopt);

/// Convenience wrapper chaining phantom, coil maps, mask and acquisition
/// with sub-seeds derived from one master seed.
Dataset make_dataset(const PhantomSpec& spec, const AcquisitionConfig& acq,
                     uint64_t seed, bool with_labels = true);

}  // namespace pmri
