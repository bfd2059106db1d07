#include "pmri/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "pmri/fourier.hpp"

namespace pmri {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

struct Ellipse {
  double cy, cx;      // center, normalized [-1, 1] coordinates
  double ry, rx;      // semi-axes
  double angle;       // rotation in radians

  bool contains(double y, double x) const {
    double dy = y - cy;
    double dx = x - cx;
    double ca = std::cos(angle);
    double sa = std::sin(angle);
    double u = ca * dx + sa * dy;
    double v = -sa * dx + ca * dy;
    return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
  }
};

// Symmetric pixel grid: x = 0 maps to -(W-1)/W, x = W-1 to +(W-1)/W.
inline double norm_coord(int i, int n) {
  return (2.0 * i - (n - 1)) / double(n);
}

void paint(LabelMap& lab, const Ellipse& e, uint8_t cls, bool brain_only) {
  for (int y = 0; y < lab.height; ++y) {
    double ny = norm_coord(y, lab.height);
    for (int x = 0; x < lab.width; ++x) {
      double nx = norm_coord(x, lab.width);
      if (!e.contains(ny, nx)) continue;
      if (brain_only && lab.at(y, x) == 0) continue;
      lab.at(y, x) = cls;
    }
  }
}

}  // namespace

void PhantomSpec::validate() const {
  if (height < 8 || width < 8)
    throw numeric_error("PhantomSpec: image too small");
  if (num_ellipses < 0) throw numeric_error("PhantomSpec: num_ellipses < 0");
  if (texture_amplitude < 0.0 || texture_amplitude > 0.05)
    throw numeric_error("PhantomSpec: texture amplitude above 5%");
  for (int c = 0; c < kNumClasses; ++c)
    if (intensity_lo[c] > intensity_hi[c])
      throw numeric_error("PhantomSpec: inverted intensity range");
  for (int c = 1; c < kNumClasses; ++c)
    if (intensity_lo[c] - intensity_hi[c - 1] < 0.1 - 1e-12)
      throw numeric_error("PhantomSpec: class intensities closer than 0.1");
}

std::pair<ComplexImage, LabelMap> make_phantom(const PhantomSpec& spec,
                                               uint64_t seed) {
  spec.validate();
  const int h = spec.height, w = spec.width;
  Rng rng(seed ^ (spec.deformation_seed * 0x9E3779B97F4A7C15ULL), 11);

  auto jitter = [&](double amt) { return rng.uniform(-amt, amt); };

  // Nested head geometry: CSF rim, GM shell, WM core, two CSF ventricles.
  Ellipse outer{jitter(0.02), jitter(0.02), 0.74 + jitter(0.02),
                0.88 + jitter(0.02), jitter(0.06)};
  Ellipse gm{outer.cy, outer.cx, outer.ry * 0.94, outer.rx * 0.94,
             outer.angle};
  Ellipse wm{outer.cy, outer.cx, outer.ry * 0.78, outer.rx * 0.78,
             outer.angle};
  Ellipse vent_l{outer.cy - 0.04, outer.cx - 0.18 + jitter(0.02), 0.24, 0.09,
                 0.35 + jitter(0.05)};
  Ellipse vent_r{outer.cy - 0.04, outer.cx + 0.18 + jitter(0.02), 0.24, 0.09,
                 -0.35 + jitter(0.05)};

  LabelMap lab(h, w);
  paint(lab, outer, 1, false);
  paint(lab, gm, 2, false);
  paint(lab, wm, 3, false);
  paint(lab, vent_l, 1, true);
  paint(lab, vent_r, 1, true);

  // Extra blobs, painted only inside the head so they stay in the FOV.
  for (uint8_t cls = 1; cls <= 3; ++cls) {
    for (int i = 0; i < spec.num_ellipses; ++i) {
      Ellipse e{rng.uniform(-0.45, 0.45), rng.uniform(-0.45, 0.45),
                rng.uniform(0.05, 0.14), rng.uniform(0.05, 0.14),
                rng.uniform(0.0, kPi)};
      paint(lab, e, cls, true);
    }
  }

  // Per-class base intensity, constrained so base +- texture stays
  // inside the declared range.
  double base[kNumClasses] = {0, 0, 0, 0};
  double amp[kNumClasses] = {0, 0, 0, 0};
  for (int c = 1; c < kNumClasses; ++c) {
    double lo = spec.intensity_lo[c] / (1.0 - spec.texture_amplitude);
    double hi = spec.intensity_hi[c] / (1.0 + spec.texture_amplitude);
    base[c] = rng.uniform(lo, hi);
    amp[c] = spec.texture_amplitude * base[c];
  }

  // One smooth global texture field, max-normalized.
  struct Mode {
    double fy, fx, phase, coef;
  };
  Mode modes[4];
  for (Mode& m : modes)
    m = {rng.uniform(0.5, 2.5), rng.uniform(0.5, 2.5),
         rng.uniform(0.0, 2.0 * kPi), rng.uniform(-1.0, 1.0)};
  std::vector<double> texture(size_t(h) * w, 0.0);
  double tex_max = 0.0;
  for (int y = 0; y < h; ++y) {
    double ny = norm_coord(y, h);
    for (int x = 0; x < w; ++x) {
      double nx = norm_coord(x, w);
      double t = 0.0;
      for (const Mode& m : modes)
        t += m.coef * std::cos(kPi * (m.fy * ny + m.fx * nx) + m.phase);
      texture[size_t(y) * w + x] = t;
      tex_max = std::max(tex_max, std::abs(t));
    }
  }
  if (tex_max == 0.0) tex_max = 1.0;

  // Smooth global phase so the phantom is honestly complex.
  double p1 = rng.uniform(-0.8, 0.8), p2 = rng.uniform(-0.8, 0.8);
  double p3 = rng.uniform(-0.4, 0.4), p4 = rng.uniform(-0.4, 0.4);

  ComplexImage img(h, w);
  for (int y = 0; y < h; ++y) {
    double ny = norm_coord(y, h);
    for (int x = 0; x < w; ++x) {
      double nx = norm_coord(x, w);
      uint8_t c = lab.at(y, x);
      if (c == 0) continue;
      double mag =
          base[c] + amp[c] * texture[size_t(y) * w + x] / tex_max;
      double th = p1 * nx + p2 * ny + p3 * nx * ny + p4 * (nx * nx - ny * ny);
      img.at(y, x) = to_f32(cplx(mag * std::cos(th), mag * std::sin(th)));
    }
  }
  return {std::move(img), std::move(lab)};
}

MultiCoilImage make_coil_sensitivities(int height, int width, int coils,
                                       uint64_t seed) {
  if (coils < 2)
    throw numeric_error("make_coil_sensitivities: needs at least 2 coils");
  Rng rng(seed, 22);
  const double fov = std::min(height, width);
  const double bump_width = 0.7 * fov;
  const double ring = 1.0;  // coil centers on the FOV boundary circle

  struct Coil {
    double cy, cx, ay, ax, phase0;
  };
  std::vector<Coil> cs(coils);
  for (int i = 0; i < coils; ++i) {
    double th = 2.0 * kPi * i / coils;
    cs[i] = {ring * std::sin(th), ring * std::cos(th),
             rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
             rng.uniform(0.0, 2.0 * kPi)};
  }

  MultiCoilImage out(coils, height, width);
  std::vector<double> mag(coils);
  for (int y = 0; y < height; ++y) {
    double ny = norm_coord(y, height);
    double py = ny * 0.5 * fov;  // pixel-scaled coordinate
    for (int x = 0; x < width; ++x) {
      double nx = norm_coord(x, width);
      double px = nx * 0.5 * fov;
      double sum2 = 0.0;
      for (int i = 0; i < coils; ++i) {
        double dy = py - cs[i].cy * 0.5 * fov;
        double dx = px - cs[i].cx * 0.5 * fov;
        mag[i] = std::exp(-(dy * dy + dx * dx) /
                          (2.0 * bump_width * bump_width));
        sum2 += mag[i] * mag[i];
      }
      double inv = 1.0 / std::sqrt(sum2);
      for (int i = 0; i < coils; ++i) {
        double th = cs[i].ax * nx + cs[i].ay * ny + cs[i].phase0;
        double m = mag[i] * inv;
        out.at(i, y, x) =
            to_f32(cplx(m * std::cos(th), m * std::sin(th)));
      }
    }
  }
  return out;
}

SamplingMask make_vd_mask(int height, int width, double accel,
                          double center_fraction, double density_exponent,
                          uint64_t seed) {
  if (accel < 1.0 || accel > 12.0)
    throw config_error("accel out of range [1, 12]");
  if (center_fraction <= 0.0 || center_fraction > 1.0)
    throw config_error("center_fraction out of range (0, 1]");
  SamplingMask mask(height, width, accel);
  const size_t total = size_t(height) * width;
  if (accel == 1.0) {
    std::fill(mask.keep.begin(), mask.keep.end(), uint8_t(1));
    return mask;
  }

  int bh = std::max(1, int(std::lround(std::sqrt(center_fraction) * height)));
  int bw = std::max(1, int(std::lround(std::sqrt(center_fraction) * width)));
  bh = std::min(bh, height);
  bw = std::min(bw, width);
  int y0 = (height - bh) / 2;
  int x0 = (width - bw) / 2;

  long target = std::lround(double(total) / accel);
  long center_count = long(bh) * bw;
  if (target < center_count)
    throw config_error(
        "infeasible accel: fully sampled center already exceeds the target "
        "fraction");

  // Keep ratio u/weight; selecting the smallest ratios realizes keep
  // probability proportional to the density weight while hitting the
  // target count exactly.
  double rho_max = 0.0;
  std::vector<double> weight(total);
  for (int y = 0; y < height; ++y) {
    double ny = norm_coord(y, height);
    for (int x = 0; x < width; ++x) {
      double nx = norm_coord(x, width);
      double rho = std::sqrt(ny * ny + nx * nx);
      weight[size_t(y) * width + x] = rho;
      rho_max = std::max(rho_max, rho);
    }
  }
  Rng rng(seed, 33);
  std::vector<double> ratio;
  std::vector<size_t> idx;
  ratio.reserve(total);
  idx.reserve(total);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      size_t k = size_t(y) * width + x;
      double u = rng.uniform();
      bool in_center = (y >= y0 && y < y0 + bh && x >= x0 && x < x0 + bw);
      if (in_center) {
        mask.keep[k] = 1;
        continue;
      }
      double wgt = std::pow(1.0 - weight[k] / rho_max, density_exponent);
      if (wgt <= 0.0) continue;
      ratio.push_back(u / wgt);
      idx.push_back(k);
    }
  }
  long m = target - center_count;
  if (m > long(ratio.size()))
    throw config_error("infeasible accel: not enough candidate locations");
  if (m > 0) {
    std::vector<size_t> order(ratio.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::nth_element(order.begin(), order.begin() + (m - 1), order.end(),
                     [&](size_t a, size_t b) { return ratio[a] < ratio[b]; });
    for (long i = 0; i < m; ++i) mask.keep[idx[order[size_t(i)]]] = 1;
  }
  mask.validate();
  return mask;
}

Dataset simulate_acquisition(const ComplexImage& image,
                             const MultiCoilImage& sens,
                             const SamplingMask& mask, double noise_sigma,
                             uint64_t seed, std::optional<LabelMap> labels) {
  if (sens.height != image.height || sens.width != image.width)
    throw numeric_error("simulate_acquisition: sens/image shape mismatch");
  if (mask.height != image.height || mask.width != image.width)
    throw numeric_error("simulate_acquisition: mask shape mismatch");
  if (noise_sigma < 0.0)
    throw numeric_error("simulate_acquisition: negative noise sigma");

  const int n = sens.coils, h = image.height, w = image.width;
  Dataset ds;
  ds.seed = seed;
  ds.mask = mask;
  ds.sens = sens;
  ds.kspace = KSpaceData(n, h, w);
  Rng rng(seed, 44);

  std::vector<double> sos(size_t(h) * w, 0.0);
  for (int c = 0; c < n; ++c) {
    cplx* kp = ds.kspace.plane(c);
    const cplx* sp = sens.plane(c);
    for (size_t i = 0; i < ds.kspace.plane_size(); ++i) {
      cplx coil_px = sp[i] * image.data[i];
      kp[i] = coil_px;
      sos[i] += std::norm(coil_px);
    }
    fft2c_plane(kp, h, w);
    if (noise_sigma > 0.0)
      for (size_t i = 0; i < ds.kspace.plane_size(); ++i)
        kp[i] += rng.cnormal(noise_sigma);
    for (size_t i = 0; i < ds.kspace.plane_size(); ++i) {
      if (!mask.keep[i])
        kp[i] = cplx(0, 0);
      else
        kp[i] = to_f32(kp[i]);
    }
  }
  ds.reference = ComplexImage(h, w);
  for (size_t i = 0; i < sos.size(); ++i)
    ds.reference.data[i] = to_f32(cplx(std::sqrt(sos[i]), 0.0));
  ds.labels = std::move(labels);
  ds.validate();
  return ds;
}

void AcquisitionConfig::validate() const {
  if (coils < 2) throw config_error("coils out of range (needs >= 2)");
  if (noise_sigma < 0.0) throw config_error("noise_sigma out of range");
  if (accel < 1.0 || accel > 12.0)
    throw config_error("accel out of range [1, 12]");
  if (center_fraction <= 0.0 || center_fraction > 1.0)
    throw config_error("center_fraction out of range (0, 1]");
  if (density_exponent < 0.0)
    throw config_error("density_exponent out of range");
}

Dataset make_dataset(const PhantomSpec& spec, const AcquisitionConfig& acq,
                     uint64_t seed, bool with_labels) {
  acq.validate();
  auto [img, lab] = make_phantom(spec, seed);
  MultiCoilImage sens =
      make_coil_sensitivities(spec.height, spec.width, acq.coils, seed + 1);
  SamplingMask mask = make_vd_mask(spec.height, spec.width, acq.accel,
                                   acq.center_fraction, acq.density_exponent,
                                   seed + 2);
  std::optional<LabelMap> labels;
  if (with_labels) labels = std::move(lab);
  return simulate_acquisition(img, sens, mask, acq.noise_sigma, seed + 3,
                              std::move(labels));
}

}  // namespace pmri
