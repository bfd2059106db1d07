#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "pmri/fourier.hpp"
#include "pmri/phantom.hpp"
#include "support.hpp"

using namespace pmri;
using namespace pmri::test;

TEST_CASE("make_phantom: deterministic in the seed") {
  PhantomSpec spec;
  auto [img1, lab1] = make_phantom(spec, 0);
  auto [img2, lab2] = make_phantom(spec, 0);
  CHECK(img1.data == img2.data);
  CHECK(lab1.labels == lab2.labels);
  auto [img3, lab3] = make_phantom(spec, 1);
  CHECK(img3.data != img1.data);
}

TEST_CASE("make_phantom: labelled pixels stay inside the declared ranges") {
  PhantomSpec spec;
  auto [img, lab] = make_phantom(spec, 3);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      int c = lab.at(y, x);
      double mag = std::abs(img.at(y, x));
      CHECK(mag >= spec.intensity_lo[c] - 1e-6);
      CHECK(mag <= spec.intensity_hi[c] + 1e-6);
    }
}

TEST_CASE("make_phantom: default 64x64 spec populates all four classes") {
  PhantomSpec spec;
  auto [img, lab] = make_phantom(spec, 0);
  long hist[kNumClasses] = {0, 0, 0, 0};
  for (uint8_t l : lab.labels) ++hist[l];
  for (int c = 0; c < kNumClasses; ++c) CHECK(hist[c] > 0);
}

TEST_CASE("make_coil_sensitivities: sum of squared magnitudes is one") {
  MultiCoilImage sens = make_coil_sensitivities(64, 64, 4, 11);
  Rng rng(99, 1);
  for (int k = 0; k < 100; ++k) {
    int y = int(rng.below(64)), x = int(rng.below(64));
    double s = 0.0;
    for (int c = 0; c < 4; ++c) s += std::norm(sens.at(c, y, x));
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("make_coil_sensitivities: magnitudes are smooth") {
  MultiCoilImage sens = make_coil_sensitivities(64, 64, 4, 11);
  double worst = 0.0;
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        double m = std::abs(sens.at(c, y, x));
        if (x + 1 < 64)
          worst = std::max(worst, std::abs(std::abs(sens.at(c, y, x + 1)) - m));
        if (y + 1 < 64)
          worst = std::max(worst, std::abs(std::abs(sens.at(c, y + 1, x)) - m));
      }
  CHECK(worst < 0.08);
}

TEST_CASE("make_coil_sensitivities: two coils mirror in magnitude") {
  MultiCoilImage sens = make_coil_sensitivities(64, 64, 2, 5);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      double a = std::abs(sens.at(0, y, x));
      double b = std::abs(sens.at(1, y, 63 - x));
      CHECK(std::abs(a - b) < 1e-6);
    }
}

TEST_CASE("make_coil_sensitivities: rejects single-coil requests") {
  CHECK_THROWS_AS(make_coil_sensitivities(32, 32, 1, 0), numeric_error);
}

TEST_CASE("make_vd_mask: no acceleration keeps everything") {
  SamplingMask m = make_vd_mask(32, 32, 1.0, 0.04, 3.0, 0);
  for (uint8_t k : m.keep) CHECK(k == 1);
}

TEST_CASE("make_vd_mask: six-fold fraction lands within 5%") {
  for (uint64_t seed : {0, 1, 2, 3, 17}) {
    SamplingMask m = make_vd_mask(64, 64, 6.0, 0.04, 3.0, seed);
    double f = m.sampled_fraction();
    CHECK(f >= 0.157);
    CHECK(f <= 0.177);
  }
}

TEST_CASE("make_vd_mask: deterministic, center always kept") {
  SamplingMask a = make_vd_mask(64, 64, 6.0, 0.04, 3.0, 12);
  SamplingMask b = make_vd_mask(64, 64, 6.0, 0.04, 3.0, 12);
  CHECK(a.keep == b.keep);
  // 13x13 center block for 0.04 * 64 * 64.
  for (int y = 25; y < 38; ++y)
    for (int x = 25; x < 38; ++x) CHECK(a.at(y, x) == 1);
}

TEST_CASE("make_vd_mask: infeasible center/accel combination is an error") {
  CHECK_THROWS_AS(make_vd_mask(64, 64, 12.0, 0.5, 3.0, 0), config_error);
  CHECK_THROWS_AS(make_vd_mask(64, 64, 0.5, 0.04, 3.0, 0), config_error);
}

TEST_CASE("simulate_acquisition: noiseless full sampling round-trips") {
  PhantomSpec spec;
  auto [img, lab] = make_phantom(spec, 1);
  MultiCoilImage sens = make_coil_sensitivities(64, 64, 4, 2);
  SamplingMask full = make_vd_mask(64, 64, 1.0, 0.04, 3.0, 3);
  Dataset ds = simulate_acquisition(img, sens, full, 0.0, 4);
  MultiCoilImage back = apply_adjoint(ds.kspace, full);
  MultiCoilImage want(4, 64, 64);
  for (int c = 0; c < 4; ++c)
    for (size_t i = 0; i < want.plane_size(); ++i)
      want.plane(c)[i] = sens.plane(c)[i] * img.data[i];
  CHECK(rel_diff(back.data, want.data) < 1e-6);
}

TEST_CASE("simulate_acquisition: empirical noise level matches sigma") {
  PhantomSpec spec;
  auto [img, lab] = make_phantom(spec, 5);
  MultiCoilImage sens = make_coil_sensitivities(64, 64, 4, 6);
  SamplingMask full = make_vd_mask(64, 64, 1.0, 0.04, 3.0, 7);
  Dataset clean = simulate_acquisition(img, sens, full, 0.0, 8);
  Dataset noisy = simulate_acquisition(img, sens, full, 0.01, 8);
  double sum2 = 0.0;
  long count = 0;
  for (size_t i = 0; i < clean.kspace.data.size(); ++i) {
    sum2 += std::norm(noisy.kspace.data[i] - clean.kspace.data[i]);
    ++count;
  }
  double sigma_hat = std::sqrt(sum2 / double(count));
  CHECK(sigma_hat > 0.008);
  CHECK(sigma_hat < 0.012);
}

TEST_CASE("simulate_acquisition: unsampled entries are exactly zero") {
  PhantomSpec spec;
  auto [img, lab] = make_phantom(spec, 9);
  MultiCoilImage sens = make_coil_sensitivities(64, 64, 4, 10);
  SamplingMask mask = make_vd_mask(64, 64, 6.0, 0.04, 3.0, 11);
  Dataset ds = simulate_acquisition(img, sens, mask, 0.02, 12);
  for (int c = 0; c < 4; ++c)
    for (size_t i = 0; i < ds.kspace.plane_size(); ++i)
      if (!mask.keep[i]) CHECK(ds.kspace.plane(c)[i] == cplx(0, 0));
}

TEST_CASE("coil-weighted SOS equals the phantom magnitude") {
  PhantomSpec spec;
  auto [img, lab] = make_phantom(spec, 13);
  MultiCoilImage sens = make_coil_sensitivities(64, 64, 4, 14);
  SamplingMask full = make_vd_mask(64, 64, 1.0, 0.04, 3.0, 15);
  Dataset ds = simulate_acquisition(img, sens, full, 0.0, 16);
  double worst = 0.0;
  for (size_t i = 0; i < img.data.size(); ++i)
    worst = std::max(worst,
                     std::abs(ds.reference.data[i].real() - std::abs(img.data[i])));
  CHECK(worst < 1e-6);
}

TEST_CASE("make_dataset: bit-identical replay from one master seed") {
  PhantomSpec spec;
  AcquisitionConfig acq;
  Dataset a = make_dataset(spec, acq, 77);
  Dataset b = make_dataset(spec, acq, 77);
  CHECK(a.kspace.data == b.kspace.data);
  CHECK(a.sens.data == b.sens.data);
  CHECK(a.mask.keep == b.mask.keep);
  CHECK(a.reference.data == b.reference.data);
  REQUIRE(a.labelled());
  CHECK(a.labels->labels == b.labels->labels);
}
