#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "pmri/fourier.hpp"
#include "pmri/net.hpp"
#include "pmri/phantom.hpp"
#include "support.hpp"

using namespace pmri;
using namespace pmri::test;

namespace {

NetParams<double> small_net(int coils, int classes, uint64_t seed) {
  Rng rng(seed, 66);
  return make_net<double>(2 * coils, 2 * coils, classes, 8, 16, 32, rng);
}

// Module-level scalar loss: squared distance of the denoiser output to a
// fixed target plus the cross entropy of the segmentation head.
struct ModuleLoss {
  MultiCoilImage target;
  LabelMap labels;
  double alpha = 0.3;

  double forward(const MultiCoilImage& gamma, const NetParams<double>& p,
                 Activations<double>* acts_out = nullptr) const {
    Activations<double> acts;
    MultiCoilImage z = denoiser_forward(gamma, p, acts);
    double rec = 0.0;
    for (size_t i = 0; i < z.data.size(); ++i)
      rec += std::norm(z.data[i] - target.data[i]);
    ProbMap probs = seg_forward(acts, p);
    size_t plane = size_t(probs.height) * probs.width;
    double ce = 0.0;
    for (size_t i = 0; i < plane; ++i) {
      double pv = probs.probs[size_t(labels.labels[i]) * plane + i];
      ce -= std::log(pv > 1e-12 ? pv : 1e-12);
    }
    if (acts_out != nullptr) *acts_out = std::move(acts);
    return (1.0 - alpha) * rec + alpha * ce;
  }

  NetGrads<double> backward(const MultiCoilImage& gamma,
                            const NetParams<double>& p) const {
    Activations<double> acts;
    MultiCoilImage z = denoiser_forward(gamma, p, acts);
    ProbMap probs = seg_forward(acts, p);
    MultiCoilImage g_z(z.coils, z.height, z.width);
    for (size_t i = 0; i < z.data.size(); ++i) {
      cplx d = z.data[i] - target.data[i];
      g_z.data[i] = (1.0 - alpha) * 2.0 * d;
    }
    size_t plane = size_t(probs.height) * probs.width;
    Tensor3<double> g_logits(probs.num_classes, probs.height, probs.width);
    for (size_t i = 0; i < plane; ++i)
      for (int k = 0; k < probs.num_classes; ++k) {
        double pv = probs.probs[size_t(k) * plane + i];
        double onehot = (k == labels.labels[i]) ? 1.0 : 0.0;
        g_logits.v[size_t(k) * plane + i] = alpha * (pv - onehot);
      }
    NetGrads<double> grads = zero_net_grads(p);
    pmri::backward(p, acts, g_z, &g_logits, grads);
    return grads;
  }
};

double* param_at(std::vector<ConvLayer<double>>& layers, size_t flat) {
  for (auto& l : layers) {
    if (flat < l.w.size()) return &l.w[flat];
    flat -= l.w.size();
    if (flat < l.b.size()) return &l.b[flat];
    flat -= l.b.size();
  }
  return nullptr;
}

double grad_at(const std::vector<LayerGrads<double>>& grads, size_t flat) {
  for (const auto& g : grads) {
    if (flat < g.w.size()) return g.w[flat];
    flat -= g.w.size();
    if (flat < g.b.size()) return g.b[flat];
    flat -= g.b.size();
  }
  return 0.0;
}

}  // namespace

TEST_CASE("complex_to_channels: exact round trip, isometric, interleaved") {
  MultiCoilImage img = random_multicoil(3, 8, 8, 50);
  Tensor3<double> t = complex_to_channels<double>(img);
  CHECK(t.ch == 6);
  MultiCoilImage back = channels_to_complex(t);
  CHECK(back.data == img.data);

  double nt = 0.0;
  for (double v : t.v) nt += v * v;
  CHECK(rel_err(std::sqrt(nt), norm2(img.data)) < 1e-12);

  MultiCoilImage real_img = img;
  for (cplx& v : real_img.data) v = cplx(v.real(), 0.0);
  Tensor3<double> rt = complex_to_channels<double>(real_img);
  for (int c = 1; c < rt.ch; c += 2)
    for (int y = 0; y < rt.h; ++y)
      for (int x = 0; x < rt.w; ++x) CHECK(rt.at(c, y, x) == 0.0);

  Tensor3<double> odd(3, 4, 4);
  CHECK_THROWS_AS(channels_to_complex(odd), numeric_error);
}

TEST_CASE("denoiser_forward: zero weights make the residual an identity") {
  NetParams<double> p = small_net(2, 0, 1);
  for (auto* group : {&p.enc, &p.rec_dec})
    for (auto& l : *group) {
      std::fill(l.w.begin(), l.w.end(), 0.0);
      std::fill(l.b.begin(), l.b.end(), 0.0);
    }
  MultiCoilImage gamma = random_multicoil(2, 16, 16, 51);
  Activations<double> acts;
  MultiCoilImage z = denoiser_forward(gamma, p, acts);
  CHECK(z.data == gamma.data);
}

TEST_CASE("denoiser_forward: the ReLU net is not homogeneous") {
  NetParams<double> p = small_net(2, 0, 2);
  Rng brng(71, 9);
  for (auto* group : {&p.enc, &p.rec_dec})
    for (auto& l : *group)
      for (double& b : l.b) b = brng.uniform(-0.1, 0.1);
  MultiCoilImage gamma = random_multicoil(2, 16, 16, 52);
  Activations<double> a1, a2;
  MultiCoilImage z1 = denoiser_forward(gamma, p, a1);
  MultiCoilImage g2 = gamma;
  for (cplx& v : g2.data) v *= 2.0;
  MultiCoilImage z2 = denoiser_forward(g2, p, a2);
  double diff = 0.0;
  for (size_t i = 0; i < z1.data.size(); ++i)
    diff = std::max(diff, std::abs(z2.data[i] - 2.0 * z1.data[i]));
  CHECK(diff > 1e-6);
}

TEST_CASE("denoiser_forward: replay is bit-stable") {
  NetParams<double> p = small_net(2, 4, 3);
  MultiCoilImage gamma = random_multicoil(2, 16, 16, 53);
  Activations<double> a1, a2;
  MultiCoilImage z1 = denoiser_forward(gamma, p, a1);
  MultiCoilImage z2 = denoiser_forward(gamma, p, a2);
  CHECK(z1.data == z2.data);
}

TEST_CASE("denoiser_forward: rejects sizes not divisible by four") {
  NetParams<double> p = small_net(2, 0, 4);
  MultiCoilImage gamma = random_multicoil(2, 18, 16, 54);
  Activations<double> acts;
  CHECK_THROWS_AS(denoiser_forward(gamma, p, acts), numeric_error);
}

TEST_CASE("seg_forward: zero weights give uniform class probabilities") {
  NetParams<double> p = small_net(2, 4, 5);
  for (auto& l : p.seg_dec) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
  MultiCoilImage gamma = random_multicoil(2, 16, 16, 55);
  Activations<double> acts;
  denoiser_forward(gamma, p, acts);
  ProbMap probs = seg_forward(acts, p);
  probs.validate();
  for (double v : probs.probs) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("seg_forward: normalized probabilities and stable argmax") {
  NetParams<double> p = small_net(2, 4, 6);
  MultiCoilImage gamma = random_multicoil(2, 16, 16, 56);
  Activations<double> a1, a2;
  denoiser_forward(gamma, p, a1);
  denoiser_forward(gamma, p, a2);
  ProbMap p1 = seg_forward(a1, p);
  ProbMap p2 = seg_forward(a2, p);
  p1.validate();
  CHECK(p1.argmax().labels == p2.argmax().labels);
}

TEST_CASE("backward: finite differences confirm all three groups") {
  const int coils = 2;
  NetParams<double> p = small_net(coils, 4, 7);
  MultiCoilImage gamma = random_multicoil(coils, 16, 16, 57);
  ModuleLoss loss;
  loss.target = random_multicoil(coils, 16, 16, 58);
  loss.labels = LabelMap(16, 16);
  Rng lrng(59, 2);
  for (uint8_t& l : loss.labels.labels) l = uint8_t(lrng.below(4));

  NetGrads<double> grads = loss.backward(gamma, p);
  const double base_loss = loss.forward(gamma, p);

  const double h = 1e-5;
  Rng pick(60, 4);
  auto check_group = [&](std::vector<ConvLayer<double>>& layers,
                         const std::vector<LayerGrads<double>>& g,
                         const char* name) {
    size_t total = 0;
    for (const auto& l : layers) total += l.param_count();
    for (int checked = 0; checked < 50; ++checked) {
      size_t flat = pick.below(total);
      double* slot = param_at(layers, flat);
      double keep = *slot;
      *slot = keep + h;
      double up = loss.forward(gamma, p);
      *slot = keep - h;
      double dn = loss.forward(gamma, p);
      *slot = keep;
      double fd = (up - dn) / (2.0 * h);
      double an = grad_at(g, flat);
      INFO(name << " parameter " << flat << ": analytic " << an
                << " vs central difference " << fd);
      CHECK(fd_matches(an, fd, base_loss, h));
    }
  };
  check_group(p.enc, grads.theta, "theta");
  check_group(p.rec_dec, grads.phi, "phi");
  check_group(p.seg_dec, grads.psi, "psi");
}

TEST_CASE("backward: zero upstream gradient yields zero parameter grads") {
  NetParams<double> p = small_net(2, 4, 8);
  MultiCoilImage gamma = random_multicoil(2, 16, 16, 61);
  Activations<double> acts;
  denoiser_forward(gamma, p, acts);
  seg_forward(acts, p);
  MultiCoilImage g_z(2, 16, 16);
  Tensor3<double> g_logits(4, 16, 16);
  g_logits.zero();
  NetGrads<double> grads = zero_net_grads(p);
  backward(p, acts, g_z, &g_logits, grads);
  for (const auto& g : grads.theta)
    for (double v : g.w) CHECK(v == 0.0);
  for (const auto& g : grads.phi)
    for (double v : g.b) CHECK(v == 0.0);
  for (const auto& g : grads.psi)
    for (double v : g.w) CHECK(v == 0.0);
}

TEST_CASE("backward: missing cache is rejected") {
  NetParams<double> p = small_net(2, 0, 9);
  Activations<double> acts;  // never filled
  MultiCoilImage g_z(2, 16, 16);
  NetGrads<double> grads = zero_net_grads(p);
  const Tensor3<double>* no_logits = nullptr;
  CHECK_THROWS_AS(backward(p, acts, g_z, no_logits, grads), numeric_error);
}

TEST_CASE("dc_solve gradient: diagonal in k-space, checked by differences") {
  SamplingMask mask = make_vd_mask(16, 16, 2.0, 0.06, 3.0, 62);
  KSpaceData b = random_kspace(2, 16, 16, 63);
  for (int c = 0; c < 2; ++c)
    for (size_t i = 0; i < b.plane_size(); ++i)
      if (!mask.keep[i]) b.plane(c)[i] = cplx(0, 0);
  const double lambda = 3.0;

  // Directional derivative of f(z) = Re<w, dc(z)> against the carrier map.
  MultiCoilImage z = random_multicoil(2, 16, 16, 64);
  MultiCoilImage w = random_multicoil(2, 16, 16, 65);
  MultiCoilImage analytic = dc_backward(w, mask, lambda);
  MultiCoilImage dir = random_multicoil(2, 16, 16, 66);
  auto f = [&](const MultiCoilImage& zz) {
    MultiCoilImage out = dc_solve(zz, b, mask, lambda);
    double s = 0.0;
    for (size_t i = 0; i < out.data.size(); ++i)
      s += w.data[i].real() * out.data[i].real() +
           w.data[i].imag() * out.data[i].imag();
    return s;
  };
  const double h = 1e-6;
  MultiCoilImage zp = z, zm = z;
  for (size_t i = 0; i < z.data.size(); ++i) {
    zp.data[i] += h * dir.data[i];
    zm.data[i] -= h * dir.data[i];
  }
  double fd = (f(zp) - f(zm)) / (2.0 * h);
  double an = 0.0;
  for (size_t i = 0; i < dir.data.size(); ++i)
    an += analytic.data[i].real() * dir.data[i].real() +
          analytic.data[i].imag() * dir.data[i].imag();
  CHECK(rel_err(an, fd) < 1e-7);

  // The k-space diagonal itself: lambda/(1+lambda) on sampled bins, 1 off.
  KSpaceData probe(2, 16, 16);
  probe.at(0, 5, 7) = cplx(1.0, 0.0);
  SamplingMask full(16, 16, 1.0);
  std::fill(full.keep.begin(), full.keep.end(), uint8_t(1));
  MultiCoilImage zin = apply_adjoint(probe, full);
  MultiCoilImage out = dc_backward(zin, mask, lambda);
  KSpaceData spec = apply_forward(out, full);
  double want = mask.at(5, 7) ? lambda / (1.0 + lambda) : 1.0;
  CHECK(std::abs(spec.at(0, 5, 7) - cplx(want, 0.0)) < 1e-12);
}

TEST_CASE("shared encoder: theta feeds both heads, phi only one") {
  NetParams<double> p = small_net(2, 4, 10);
  MultiCoilImage gamma = random_multicoil(2, 16, 16, 67);
  Activations<double> acts;
  MultiCoilImage z0 = denoiser_forward(gamma, p, acts);
  ProbMap s0 = seg_forward(acts, p);

  // Mutating an encoder bias changes both outputs.
  p.enc[0].b[0] += 0.05;
  Activations<double> acts1;
  MultiCoilImage z1 = denoiser_forward(gamma, p, acts1);
  ProbMap s1 = seg_forward(acts1, p);
  CHECK(z1.data != z0.data);
  CHECK(s1.probs != s0.probs);
  p.enc[0].b[0] -= 0.05;

  // Mutating the reconstruction decoder never changes the segmentation
  // output for fixed encoder activations, but does change the denoiser.
  p.rec_dec[4].b[0] += 0.05;
  ProbMap s2 = seg_forward(acts, p);
  CHECK(s2.probs == s0.probs);
  Activations<double> acts2;
  MultiCoilImage z2 = denoiser_forward(gamma, p, acts2);
  CHECK(z2.data != z0.data);
}
