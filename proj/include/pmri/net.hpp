#pragma once

#include <cstdint>
#include <vector>

#include "pmri/common.hpp"
#include "pmri/parallel.hpp"
#include "pmri/tensor.hpp"

namespace pmri {

/// Dense (channels, height, width) activation tensor.
template <typename T>
struct Tensor3 {
  int ch = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor3() = default;
  Tensor3(int c, int hh, int ww) : ch(c), h(hh), w(ww), v(size_t(c) * hh * ww) {}

  T* plane(int c) { return v.data() + size_t(c) * h * w; }
  const T* plane(int c) const { return v.data() + size_t(c) * h * w; }
  T& at(int c, int y, int x) { return v[(size_t(c) * h + y) * w + x]; }
  T at(int c, int y, int x) const { return v[(size_t(c) * h + y) * w + x]; }
  size_t size() const { return v.size(); }
  void zero() { std::fill(v.begin(), v.end(), T(0)); }
};

/// 2-D convolution with same-size padding, optional ReLU.
template <typename T>
struct ConvLayer {
  int in_ch = 0, out_ch = 0, ksize = 3;
  bool relu = true;
  std::vector<T> w;  // out*in*k*k
  std::vector<T> b;  // out

  ConvLayer() = default;
  ConvLayer(int in, int out, int k, bool act)
      : in_ch(in), out_ch(out), ksize(k), relu(act),
        w(size_t(out) * in * k * k, T(0)), b(size_t(out), T(0)) {}

  size_t param_count() const { return w.size() + b.size(); }

  void xavier_init(Rng& rng) {
    double fan_in = double(in_ch) * ksize * ksize;
    double fan_out = double(out_ch) * ksize * ksize;
    double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (T& x : w) x = T(rng.uniform(-a, a));
    for (T& x : b) x = T(0);
  }
};

template <typename T>
struct LayerGrads {
  std::vector<T> w;
  std::vector<T> b;
};

template <typename T>
std::vector<LayerGrads<T>> zero_grads(const std::vector<ConvLayer<T>>& layers) {
  std::vector<LayerGrads<T>> g(layers.size());
  for (size_t i = 0; i < layers.size(); ++i) {
    g[i].w.assign(layers[i].w.size(), T(0));
    g[i].b.assign(layers[i].b.size(), T(0));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Kernels

template <typename T>
void conv_forward(const ConvLayer<T>& L, const Tensor3<T>& in, Tensor3<T>& out) {
  const int h = in.h, w = in.w, k = L.ksize, pad = k / 2;
  out = Tensor3<T>(L.out_ch, h, w);
  parallel_for(L.out_ch, [&](int oc0, int oc1) {
    for (int oc = oc0; oc < oc1; ++oc) {
      T* op = out.plane(oc);
      T bias = L.b[oc];
      for (size_t i = 0; i < size_t(h) * w; ++i) op[i] = bias;
      for (int ic = 0; ic < L.in_ch; ++ic) {
        const T* ip = in.plane(ic);
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            T wv = L.w[((size_t(oc) * L.in_ch + ic) * k + ky) * k + kx];
            int ylo = pad - ky > 0 ? pad - ky : 0;
            int yhi = h + pad - ky < h ? h + pad - ky : h;
            int xlo = pad - kx > 0 ? pad - kx : 0;
            int xhi = w + pad - kx < w ? w + pad - kx : w;
            for (int y = ylo; y < yhi; ++y) {
              const T* irow = ip + size_t(y + ky - pad) * w + (kx - pad);
              T* orow = op + size_t(y) * w;
              for (int x = xlo; x < xhi; ++x) orow[x] += wv * irow[x];
            }
          }
        }
      }
      if (L.relu)
        for (size_t i = 0; i < size_t(h) * w; ++i)
          if (op[i] < T(0)) op[i] = T(0);
    }
  });
}

/// Backward pass of conv_forward. `out` is the cached post-activation
/// output, `gout` the incoming gradient. Parameter gradients accumulate
/// into `gl`; the input gradient accumulates into `gin` (which must be
/// pre-sized and may already hold other contributions).
template <typename T>
void conv_backward(const ConvLayer<T>& L, const Tensor3<T>& in,
                   const Tensor3<T>& out, const Tensor3<T>& gout,
                   Tensor3<T>& gin, LayerGrads<T>& gl) {
  const int h = in.h, w = in.w, k = L.ksize, pad = k / 2;
  Tensor3<T> gpre = gout;
  if (L.relu) {
    for (size_t i = 0; i < gpre.v.size(); ++i)
      if (out.v[i] <= T(0)) gpre.v[i] = T(0);
  }
  parallel_for(L.out_ch, [&](int oc0, int oc1) {
    for (int oc = oc0; oc < oc1; ++oc) {
      const T* gp = gpre.plane(oc);
      T s = T(0);
      for (size_t i = 0; i < size_t(h) * w; ++i) s += gp[i];
      gl.b[oc] += s;
      for (int ic = 0; ic < L.in_ch; ++ic) {
        const T* ip = in.plane(ic);
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            int ylo = pad - ky > 0 ? pad - ky : 0;
            int yhi = h + pad - ky < h ? h + pad - ky : h;
            int xlo = pad - kx > 0 ? pad - kx : 0;
            int xhi = w + pad - kx < w ? w + pad - kx : w;
            // Eight fixed-order partial sums so the reduction vectorizes
            // while staying bit-reproducible.
            T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
            for (int y = ylo; y < yhi; ++y) {
              const T* irow = ip + size_t(y + ky - pad) * w + (kx - pad);
              const T* grow = gp + size_t(y) * w;
              int x = xlo;
              for (; x + 8 <= xhi; x += 8)
                for (int u = 0; u < 8; ++u) acc[u] += grow[x + u] * irow[x + u];
              for (; x < xhi; ++x) acc[0] += grow[x] * irow[x];
            }
            T sum = ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
                    ((acc[4] + acc[5]) + (acc[6] + acc[7]));
            gl.w[((size_t(oc) * L.in_ch + ic) * k + ky) * k + kx] += sum;
          }
        }
      }
    }
  });
  parallel_for(L.in_ch, [&](int ic0, int ic1) {
    for (int ic = ic0; ic < ic1; ++ic) {
      T* gi = gin.plane(ic);
      for (int oc = 0; oc < L.out_ch; ++oc) {
        const T* gp = gpre.plane(oc);
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            T wv = L.w[((size_t(oc) * L.in_ch + ic) * k + ky) * k + kx];
            int ylo = pad - ky > 0 ? pad - ky : 0;
            int yhi = h + pad - ky < h ? h + pad - ky : h;
            int xlo = pad - kx > 0 ? pad - kx : 0;
            int xhi = w + pad - kx < w ? w + pad - kx : w;
            for (int y = ylo; y < yhi; ++y) {
              T* girow = gi + size_t(y + ky - pad) * w + (kx - pad);
              const T* grow = gp + size_t(y) * w;
              for (int x = xlo; x < xhi; ++x) girow[x] += wv * grow[x];
            }
          }
        }
      }
    }
  });
}

/// 2x2 max pooling; stores the argmax corner (0..3) for unpooling.
/// Ties resolve to the first maximum in scan order.
template <typename T>
void pool_forward(const Tensor3<T>& in, Tensor3<T>& out,
                  std::vector<uint8_t>& idx) {
  const int oh = in.h / 2, ow = in.w / 2;
  out = Tensor3<T>(in.ch, oh, ow);
  idx.assign(out.size(), 0);
  for (int c = 0; c < in.ch; ++c) {
    const T* ip = in.plane(c);
    T* op = out.plane(c);
    uint8_t* xp = idx.data() + size_t(c) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        T best = ip[size_t(2 * y) * in.w + 2 * x];
        uint8_t bi = 0;
        for (uint8_t d = 1; d < 4; ++d) {
          T v = ip[size_t(2 * y + d / 2) * in.w + 2 * x + d % 2];
          if (v > best) {
            best = v;
            bi = d;
          }
        }
        op[size_t(y) * ow + x] = best;
        xp[size_t(y) * ow + x] = bi;
      }
    }
  }
}

template <typename T>
void pool_backward(const Tensor3<T>& gout, const std::vector<uint8_t>& idx,
                   Tensor3<T>& gin) {
  const int oh = gout.h, ow = gout.w;
  for (int c = 0; c < gout.ch; ++c) {
    const T* gp = gout.plane(c);
    T* gi = gin.plane(c);
    const uint8_t* xp = idx.data() + size_t(c) * oh * ow;
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        uint8_t d = xp[size_t(y) * ow + x];
        gi[size_t(2 * y + d / 2) * gin.w + 2 * x + d % 2] +=
            gp[size_t(y) * ow + x];
      }
  }
}

/// Max unpooling with the indices of the matching pool layer.
template <typename T>
void unpool_forward(const Tensor3<T>& in, const std::vector<uint8_t>& idx,
                    Tensor3<T>& out) {
  out = Tensor3<T>(in.ch, in.h * 2, in.w * 2);
  out.zero();
  for (int c = 0; c < in.ch; ++c) {
    const T* ip = in.plane(c);
    T* op = out.plane(c);
    const uint8_t* xp = idx.data() + size_t(c) * in.h * in.w;
    for (int y = 0; y < in.h; ++y)
      for (int x = 0; x < in.w; ++x) {
        uint8_t d = xp[size_t(y) * in.w + x];
        op[size_t(2 * y + d / 2) * out.w + 2 * x + d % 2] =
            ip[size_t(y) * in.w + x];
      }
  }
}

template <typename T>
void unpool_backward(const Tensor3<T>& gout, const std::vector<uint8_t>& idx,
                     Tensor3<T>& gin) {
  for (int c = 0; c < gin.ch; ++c) {
    const T* gp = gout.plane(c);
    T* gi = gin.plane(c);
    const uint8_t* xp = idx.data() + size_t(c) * gin.h * gin.w;
    for (int y = 0; y < gin.h; ++y)
      for (int x = 0; x < gin.w; ++x) {
        uint8_t d = xp[size_t(y) * gin.w + x];
        gi[size_t(y) * gin.w + x] +=
            gp[size_t(2 * y + d / 2) * gout.w + 2 * x + d % 2];
      }
  }
}

template <typename T>
Tensor3<T> concat_channels(const Tensor3<T>& a, const Tensor3<T>& b) {
  Tensor3<T> out(a.ch + b.ch, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), out.v.begin());
  std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
  return out;
}

// ---------------------------------------------------------------------------
// Network: a small UNET with one shared encoder and detachable decoders.
// Encoder: two pooling stages, channels in -> w1 -> w2 -> w3.
// Decoder: mirrored, index-based unpooling, encoder skips, final 1x1.

template <typename T>
struct NetParams {
  int in_ch = 0;
  int width1 = 16, width2 = 32, width3 = 64;
  int rec_out = 0;   // channels of the reconstruction head
  int classes = 0;   // classes of the segmentation head (0 = absent)
  std::vector<ConvLayer<T>> enc;      // shared encoder weights
  std::vector<ConvLayer<T>> rec_dec;  // reconstruction decoder weights
  std::vector<ConvLayer<T>> seg_dec;  // segmentation decoder weights
};

template <typename T>
std::vector<ConvLayer<T>> make_decoder_layers(int w1, int w2, int w3,
                                              int out_ch) {
  std::vector<ConvLayer<T>> d;
  d.emplace_back(w3, w2, 3, true);
  d.emplace_back(2 * w2, w2, 3, true);
  d.emplace_back(w2, w1, 3, true);
  d.emplace_back(2 * w1, w1, 3, true);
  d.emplace_back(w1, out_ch, 1, false);
  return d;
}

template <typename T>
NetParams<T> make_net(int in_ch, int rec_out, int classes, int w1, int w2,
                      int w3, Rng& rng) {
  NetParams<T> p;
  p.in_ch = in_ch;
  p.width1 = w1;
  p.width2 = w2;
  p.width3 = w3;
  p.rec_out = rec_out;
  p.classes = classes;
  p.enc.emplace_back(in_ch, w1, 3, true);
  p.enc.emplace_back(w1, w1, 3, true);
  p.enc.emplace_back(w1, w2, 3, true);
  p.enc.emplace_back(w2, w2, 3, true);
  p.enc.emplace_back(w2, w3, 3, true);
  p.enc.emplace_back(w3, w3, 3, true);
  p.rec_dec = make_decoder_layers<T>(w1, w2, w3, rec_out);
  if (classes > 0) p.seg_dec = make_decoder_layers<T>(w1, w2, w3, classes);
  for (auto& l : p.enc) l.xavier_init(rng);
  for (auto& l : p.rec_dec) l.xavier_init(rng);
  for (auto& l : p.seg_dec) l.xavier_init(rng);
  return p;
}

template <typename T>
size_t param_count(const std::vector<ConvLayer<T>>& layers) {
  size_t n = 0;
  for (const auto& l : layers) n += l.param_count();
  return n;
}

template <typename T>
size_t param_count(const NetParams<T>& p) {
  return param_count(p.enc) + param_count(p.rec_dec) + param_count(p.seg_dec);
}

template <typename T>
struct EncoderActs {
  Tensor3<T> input;
  Tensor3<T> a0, a1;  // a1 is skip 1
  Tensor3<T> p1;
  std::vector<uint8_t> idx1;
  Tensor3<T> a2, a3;  // a3 is skip 2
  Tensor3<T> p2;
  std::vector<uint8_t> idx2;
  Tensor3<T> a4, a5;  // a5 is the bottleneck latent
};

template <typename T>
struct DecoderActs {
  Tensor3<T> d0, up2, cat2, d1, d2, up1, cat1, d3, out;
};

/// Forward/backward caches of one denoiser evaluation. The encoder part
/// doubles as the latent fed to the segmentation decoder.
template <typename T>
struct Activations {
  EncoderActs<T> enc;
  DecoderActs<T> rec;
  DecoderActs<T> seg;  // filled by seg_forward when used
  bool valid = false;
};

template <typename T>
void encoder_forward(const std::vector<ConvLayer<T>>& enc, const Tensor3<T>& x,
                     EncoderActs<T>& a) {
  if (x.h % 4 != 0 || x.w % 4 != 0)
    throw numeric_error("encoder_forward: height/width must be divisible by 4");
  a.input = x;
  conv_forward(enc[0], a.input, a.a0);
  conv_forward(enc[1], a.a0, a.a1);
  pool_forward(a.a1, a.p1, a.idx1);
  conv_forward(enc[2], a.p1, a.a2);
  conv_forward(enc[3], a.a2, a.a3);
  pool_forward(a.a3, a.p2, a.idx2);
  conv_forward(enc[4], a.p2, a.a4);
  conv_forward(enc[5], a.a4, a.a5);
}

template <typename T>
void decoder_forward(const std::vector<ConvLayer<T>>& dec,
                     const EncoderActs<T>& e, DecoderActs<T>& d) {
  conv_forward(dec[0], e.a5, d.d0);
  unpool_forward(d.d0, e.idx2, d.up2);
  d.cat2 = concat_channels(d.up2, e.a3);
  conv_forward(dec[1], d.cat2, d.d1);
  conv_forward(dec[2], d.d1, d.d2);
  unpool_forward(d.d2, e.idx1, d.up1);
  d.cat1 = concat_channels(d.up1, e.a1);
  conv_forward(dec[3], d.cat1, d.d3);
  conv_forward(dec[4], d.d3, d.out);
}

/// Decoder backward: accumulates parameter gradients and the gradients
/// flowing into the shared encoder activations (bottleneck and the two
/// skips).
template <typename T>
void decoder_backward(const std::vector<ConvLayer<T>>& dec,
                      const EncoderActs<T>& e, const DecoderActs<T>& d,
                      const Tensor3<T>& gout, Tensor3<T>& g_bottleneck,
                      Tensor3<T>& g_skip1, Tensor3<T>& g_skip2,
                      std::vector<LayerGrads<T>>& gl) {
  Tensor3<T> g_d3(d.d3.ch, d.d3.h, d.d3.w);
  g_d3.zero();
  conv_backward(dec[4], d.d3, d.out, gout, g_d3, gl[4]);

  Tensor3<T> g_cat1(d.cat1.ch, d.cat1.h, d.cat1.w);
  g_cat1.zero();
  conv_backward(dec[3], d.cat1, d.d3, g_d3, g_cat1, gl[3]);

  Tensor3<T> g_up1(d.up1.ch, d.up1.h, d.up1.w);
  std::copy(g_cat1.v.begin(), g_cat1.v.begin() + g_up1.v.size(),
            g_up1.v.begin());
  for (size_t i = 0; i < g_skip1.v.size(); ++i)
    g_skip1.v[i] += g_cat1.v[g_up1.v.size() + i];

  Tensor3<T> g_d2(d.d2.ch, d.d2.h, d.d2.w);
  g_d2.zero();
  unpool_backward(g_up1, e.idx1, g_d2);

  Tensor3<T> g_d1(d.d1.ch, d.d1.h, d.d1.w);
  g_d1.zero();
  conv_backward(dec[2], d.d1, d.d2, g_d2, g_d1, gl[2]);

  Tensor3<T> g_cat2(d.cat2.ch, d.cat2.h, d.cat2.w);
  g_cat2.zero();
  conv_backward(dec[1], d.cat2, d.d1, g_d1, g_cat2, gl[1]);

  Tensor3<T> g_up2(d.up2.ch, d.up2.h, d.up2.w);
  std::copy(g_cat2.v.begin(), g_cat2.v.begin() + g_up2.v.size(),
            g_up2.v.begin());
  for (size_t i = 0; i < g_skip2.v.size(); ++i)
    g_skip2.v[i] += g_cat2.v[g_up2.v.size() + i];

  Tensor3<T> g_d0(d.d0.ch, d.d0.h, d.d0.w);
  g_d0.zero();
  unpool_backward(g_up2, e.idx2, g_d0);

  conv_backward(dec[0], e.a5, d.d0, g_d0, g_bottleneck, gl[0]);
}

/// Encoder backward from accumulated decoder contributions. Returns the
/// gradient with respect to the encoder input in g_input.
template <typename T>
void encoder_backward(const std::vector<ConvLayer<T>>& enc,
                      const EncoderActs<T>& e, const Tensor3<T>& g_bottleneck,
                      const Tensor3<T>& g_skip1, const Tensor3<T>& g_skip2,
                      Tensor3<T>& g_input, std::vector<LayerGrads<T>>& gl) {
  Tensor3<T> g_a4(e.a4.ch, e.a4.h, e.a4.w);
  g_a4.zero();
  conv_backward(enc[5], e.a4, e.a5, g_bottleneck, g_a4, gl[5]);

  Tensor3<T> g_p2(e.p2.ch, e.p2.h, e.p2.w);
  g_p2.zero();
  conv_backward(enc[4], e.p2, e.a4, g_a4, g_p2, gl[4]);

  Tensor3<T> g_a3 = g_skip2;  // skip contribution plus pooled gradient
  pool_backward(g_p2, e.idx2, g_a3);

  Tensor3<T> g_a2(e.a2.ch, e.a2.h, e.a2.w);
  g_a2.zero();
  conv_backward(enc[3], e.a2, e.a3, g_a3, g_a2, gl[3]);

  Tensor3<T> g_p1(e.p1.ch, e.p1.h, e.p1.w);
  g_p1.zero();
  conv_backward(enc[2], e.p1, e.a2, g_a2, g_p1, gl[2]);

  Tensor3<T> g_a1 = g_skip1;
  pool_backward(g_p1, e.idx1, g_a1);

  Tensor3<T> g_a0(e.a0.ch, e.a0.h, e.a0.w);
  g_a0.zero();
  conv_backward(enc[1], e.a0, e.a1, g_a1, g_a0, gl[1]);

  conv_backward(enc[0], e.input, e.a0, g_a0, g_input, gl[0]);
}

// ---------------------------------------------------------------------------
// Complex <-> channel packing and the residual denoiser.

/// Packs N complex planes into 2N real channels (re1, im1, re2, ...).
template <typename T>
Tensor3<T> complex_to_channels(const MultiCoilImage& img) {
  Tensor3<T> out(2 * img.coils, img.height, img.width);
  for (int c = 0; c < img.coils; ++c) {
    const cplx* ip = img.plane(c);
    T* re = out.plane(2 * c);
    T* im = out.plane(2 * c + 1);
    for (size_t i = 0; i < img.plane_size(); ++i) {
      re[i] = T(ip[i].real());
      im[i] = T(ip[i].imag());
    }
  }
  return out;
}

/// Inverse of complex_to_channels. Requires an even channel count.
template <typename T>
MultiCoilImage channels_to_complex(const Tensor3<T>& t) {
  if (t.ch % 2 != 0)
    throw numeric_error("channels_to_complex: odd channel count");
  MultiCoilImage out(t.ch / 2, t.h, t.w);
  for (int c = 0; c < out.coils; ++c) {
    const T* re = t.plane(2 * c);
    const T* im = t.plane(2 * c + 1);
    cplx* op = out.plane(c);
    for (size_t i = 0; i < out.plane_size(); ++i)
      op[i] = cplx(double(re[i]), double(im[i]));
  }
  return out;
}

/// Residual denoiser: z = gamma - net(gamma), where the network maps the
/// 2N-channel real view through the shared encoder and the
/// reconstruction decoder.
template <typename T>
MultiCoilImage denoiser_forward(const MultiCoilImage& gamma,
                                const NetParams<T>& p, Activations<T>& acts) {
  if (2 * gamma.coils != p.in_ch)
    throw numeric_error("denoiser_forward: coil count does not match net");
  Tensor3<T> x = complex_to_channels<T>(gamma);
  encoder_forward(p.enc, x, acts.enc);
  decoder_forward(p.rec_dec, acts.enc, acts.rec);
  acts.valid = true;
  MultiCoilImage corr = channels_to_complex(acts.rec.out);
  MultiCoilImage z = gamma;
  for (size_t i = 0; i < z.data.size(); ++i) z.data[i] -= corr.data[i];
  return z;
}

/// Gradient groups of (encoder, reconstruction decoder, segmentation
/// decoder).
template <typename T>
struct NetGrads {
  std::vector<LayerGrads<T>> theta;
  std::vector<LayerGrads<T>> phi;
  std::vector<LayerGrads<T>> psi;
};

template <typename T>
NetGrads<T> zero_net_grads(const NetParams<T>& p) {
  NetGrads<T> g;
  g.theta = zero_grads(p.enc);
  g.phi = zero_grads(p.rec_dec);
  g.psi = zero_grads(p.seg_dec);
  return g;
}

/// Backward through one denoiser evaluation given the loss gradient
/// with respect to z (carrier convention: a complex array holding
/// dL/d(re) + i dL/d(im)). Extra gradients flowing into the encoder
/// latent from the segmentation decoder may be injected via g_bottleneck
/// etc. before calling. Returns the gradient with respect to gamma.
template <typename T>
MultiCoilImage denoiser_backward(const NetParams<T>& p,
                                 const Activations<T>& acts,
                                 const MultiCoilImage& g_z,
                                 Tensor3<T>& g_bottleneck, Tensor3<T>& g_skip1,
                                 Tensor3<T>& g_skip2, NetGrads<T>& grads) {
  if (!acts.valid) throw numeric_error("denoiser_backward: missing cache");
  // z = gamma - corr: gradient w.r.t. the decoder output is -g_z.
  MultiCoilImage neg = g_z;
  for (cplx& v : neg.data) v = -v;
  Tensor3<T> g_out = complex_to_channels<T>(neg);
  decoder_backward(p.rec_dec, acts.enc, acts.rec, g_out, g_bottleneck,
                   g_skip1, g_skip2, grads.phi);
  Tensor3<T> g_x(acts.enc.input.ch, acts.enc.input.h, acts.enc.input.w);
  g_x.zero();
  encoder_backward(p.enc, acts.enc, g_bottleneck, g_skip1, g_skip2, g_x,
                   grads.theta);
  MultiCoilImage g_gamma = channels_to_complex(g_x);
  for (size_t i = 0; i < g_gamma.data.size(); ++i)
    g_gamma.data[i] += g_z.data[i];
  return g_gamma;
}

/// Segmentation head over the cached shared-encoder latent. Returns the
/// per-pixel class probabilities; logits are cached for backward.
template <typename T>
ProbMap seg_forward(Activations<T>& acts, const NetParams<T>& p) {
  if (p.seg_dec.empty())
    throw numeric_error("seg_forward: model has no segmentation decoder");
  if (!acts.valid) throw numeric_error("seg_forward: missing cache");
  decoder_forward(p.seg_dec, acts.enc, acts.seg);
  const Tensor3<T>& logits = acts.seg.out;
  std::vector<double> raw(logits.v.size());
  for (size_t i = 0; i < raw.size(); ++i) raw[i] = double(logits.v[i]);
  return ProbMap::from_logits(logits.h, logits.w, logits.ch, raw);
}

/// Backward of the segmentation decoder. Adds the latent gradients into
/// the provided accumulators (to be combined with the reconstruction
/// path before encoder backward).
template <typename T>
void seg_backward(const NetParams<T>& p, const Activations<T>& acts,
                  const Tensor3<T>& g_logits, Tensor3<T>& g_bottleneck,
                  Tensor3<T>& g_skip1, Tensor3<T>& g_skip2,
                  NetGrads<T>& grads) {
  decoder_backward(p.seg_dec, acts.enc, acts.seg, g_logits, g_bottleneck,
                   g_skip1, g_skip2, grads.psi);
}

/// Combined reverse pass for one denoiser evaluation with an optional
/// segmentation loss gradient attached to the same encoder latent.
template <typename T>
MultiCoilImage backward(const NetParams<T>& p, const Activations<T>& acts,
                        const MultiCoilImage& g_z, const Tensor3<T>* g_logits,
                        NetGrads<T>& grads) {
  Tensor3<T> g_bott(acts.enc.a5.ch, acts.enc.a5.h, acts.enc.a5.w);
  Tensor3<T> g_sk1(acts.enc.a1.ch, acts.enc.a1.h, acts.enc.a1.w);
  Tensor3<T> g_sk2(acts.enc.a3.ch, acts.enc.a3.h, acts.enc.a3.w);
  g_bott.zero();
  g_sk1.zero();
  g_sk2.zero();
  if (g_logits != nullptr)
    seg_backward(p, acts, *g_logits, g_bott, g_sk1, g_sk2, grads);
  return denoiser_backward(p, acts, g_z, g_bott, g_sk1, g_sk2, grads);
}

}  // namespace pmri
