#include "pmri/unrolled.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pmri {

std::string mode_name(ModelMode m) {
  switch (m) {
    case ModelMode::joint_shared: return "joint";
    case ModelMode::cascade: return "cascade";
    case ModelMode::recon_only: return "recon-only";
  }
  throw numeric_error("unknown model mode");
}

ModelMode mode_from_name(const std::string& name) {
  if (name == "joint") return ModelMode::joint_shared;
  if (name == "cascade") return ModelMode::cascade;
  if (name == "recon-only") return ModelMode::recon_only;
  throw config_error("unknown mode " + name);
}

namespace {

// Picks widths for the cascade segmentation UNET so its parameter count
// matches the shared segmentation decoder it replaces.
void match_cascade_widths(int w1, int w2, int w3, int classes, size_t target,
                          int& v1, int& v2, int& v3) {
  size_t best_diff = size_t(-1);
  for (int pct = 20; pct <= 120; ++pct) {
    double s = pct / 100.0;
    int a = std::max(1, int(std::lround(s * w1)));
    int b = std::max(1, int(std::lround(s * w2)));
    int c = std::max(1, int(std::lround(s * w3)));
    // Encoder over the 1-channel combined image plus one decoder.
    size_t count = 0;
    int enc_in[6] = {1, a, a, b, b, c};
    int enc_out[6] = {a, a, b, b, c, c};
    for (int i = 0; i < 6; ++i)
      count += size_t(enc_in[i]) * enc_out[i] * 9 + enc_out[i];
    int dec_in[5] = {c, 2 * b, b, 2 * a, a};
    int dec_out[5] = {b, b, a, a, classes};
    int dec_k[5] = {3, 3, 3, 3, 1};
    for (int i = 0; i < 5; ++i)
      count +=
          size_t(dec_in[i]) * dec_out[i] * dec_k[i] * dec_k[i] + dec_out[i];
    size_t diff = count > target ? count - target : target - count;
    if (diff < best_diff) {
      best_diff = diff;
      v1 = a;
      v2 = b;
      v3 = c;
    }
  }
}

}  // namespace

template <typename T>
UnrolledModel<T> make_model(ModelMode mode, int coils, int classes, int w1,
                            int w2, int w3, int k, double lambda,
                            uint64_t seed) {
  if (coils < 1) throw numeric_error("make_model: needs at least 1 coil");
  if (k < 0) throw numeric_error("make_model: negative unroll count");
  if (lambda <= 0.0) throw numeric_error("make_model: lambda must be > 0");
  UnrolledModel<T> m;
  m.mode = mode;
  m.unroll_k = k;
  m.lambda = lambda;
  Rng rng(seed, 66);
  int in_ch = 2 * coils;
  int net_classes = (mode == ModelMode::joint_shared) ? classes : 0;
  m.params = make_net<T>(in_ch, in_ch, net_classes, w1, w2, w3, rng);
  if (mode == ModelMode::cascade) {
    size_t shared_total =
        param_count(m.params) +
        param_count(make_decoder_layers<T>(w1, w2, w3, classes));
    size_t target = shared_total - param_count(m.params);
    int v1 = w1, v2 = w2, v3 = w3;
    match_cascade_widths(w1, w2, w3, classes, target, v1, v2, v3);
    m.cascade_seg = make_net<T>(1, classes, 0, v1, v2, v3, rng);
    size_t total = m.total_params();
    double rel = std::abs(double(total) - double(shared_total)) /
                 double(shared_total);
    if (rel > 0.05)
      throw numeric_error(
          "make_model: cascade parameter match outside 5% tolerance");
  }
  return m;
}

template <typename T>
UnrollTrace<T> idslr_forward(const KSpaceData& b, const SamplingMask& mask,
                             const UnrolledModel<T>& model) {
  UnrollTrace<T> tr;
  tr.gamma = apply_adjoint(b, mask);
  tr.acts.resize(model.unroll_k);
  tr.z.reserve(model.unroll_k);
  for (int n = 0; n < model.unroll_k; ++n) {
    MultiCoilImage zn = denoiser_forward(tr.gamma, model.params, tr.acts[n]);
    tr.gamma = dc_solve(zn, b, mask, model.lambda);
    tr.z.push_back(std::move(zn));
  }
  return tr;
}

ComplexImage sos(const MultiCoilImage& img) {
  ComplexImage out(img.height, img.width);
  for (size_t i = 0; i < img.plane_size(); ++i) {
    double s = 0.0;
    for (int c = 0; c < img.coils; ++c)
      s += std::norm(img.data[size_t(c) * img.plane_size() + i]);
    out.data[i] = cplx(std::sqrt(s), 0.0);
  }
  return out;
}

MultiCoilImage sos_backward(const MultiCoilImage& img,
                            const ComplexImage& sos_img,
                            const std::vector<double>& g_sos) {
  MultiCoilImage g(img.coils, img.height, img.width);
  for (size_t i = 0; i < img.plane_size(); ++i) {
    double s = sos_img.data[i].real();
    double f = g_sos[i] / (s > 1e-30 ? s : 1e-30);
    for (int c = 0; c < img.coils; ++c) {
      size_t k = size_t(c) * img.plane_size() + i;
      g.data[k] = f * img.data[k];
    }
  }
  return g;
}

double loss_rec(const ComplexImage& sos_img, const ComplexImage& reference) {
  if (sos_img.height != reference.height || sos_img.width != reference.width)
    throw numeric_error("loss_rec: shape mismatch");
  double s = 0.0;
  for (size_t i = 0; i < sos_img.data.size(); ++i) {
    double d = sos_img.data[i].real() - reference.data[i].real();
    s += d * d;
  }
  return s;
}

double loss_seg(const ProbMap& probs, const LabelMap& labels) {
  if (probs.height != labels.height || probs.width != labels.width)
    throw numeric_error("loss_seg: shape mismatch");
  size_t plane = size_t(probs.height) * probs.width;
  double s = 0.0;
  for (size_t i = 0; i < plane; ++i) {
    uint8_t z = labels.labels[i];
    if (z >= probs.num_classes) throw numeric_error("loss_seg: label out of range");
    double p = probs.probs[size_t(z) * plane + i];
    s -= std::log(p > 1e-12 ? p : 1e-12);
  }
  return s;
}

double loss_total(double rec, double seg, double alpha, bool labelled) {
  if (alpha < 0.0 || alpha >= 1.0)
    throw numeric_error("loss_total: alpha out of range");
  double v = (1.0 - alpha) * rec;
  if (labelled) v += alpha * seg;
  return v;
}

NormalizedSample normalize_sample(const Dataset& ds) {
  NormalizedSample s;
  s.mask = ds.mask;
  s.b = ds.kspace;
  s.reference = ds.reference;
  s.labels = ds.labels ? &*ds.labels : nullptr;
  ComplexImage zf = sos(apply_adjoint(ds.kspace, ds.mask));
  double peak = 0.0;
  for (const cplx& v : zf.data) peak = std::max(peak, v.real());
  s.scale = peak > 0.0 ? peak : 1.0;
  double inv = 1.0 / s.scale;
  for (cplx& v : s.b.data) v *= inv;
  for (cplx& v : s.reference.data) v *= inv;
  return s;
}

template <typename T>
ModelEval<T> model_forward(UnrolledModel<T>& model,
                           const NormalizedSample& sample, double alpha,
                           bool labelled) {
  ModelEval<T> ev;
  ev.trace = idslr_forward(sample.b, sample.mask, model);
  ev.sos_img = sos(ev.trace.gamma);
  ev.rec = loss_rec(ev.sos_img, sample.reference);
  bool wants_seg = labelled && model.mode != ModelMode::recon_only &&
                   sample.labels != nullptr;
  if (wants_seg) {
    if (model.mode == ModelMode::joint_shared) {
      if (model.unroll_k < 1)
        throw numeric_error("model_forward: joint mode needs K >= 1");
      ev.probs = seg_forward(ev.trace.acts.back(), model.params);
    } else {
      // Cascade: private UNET over the combined magnitude image.
      ev.cascade_in = Tensor3<T>(1, ev.sos_img.height, ev.sos_img.width);
      for (size_t i = 0; i < ev.sos_img.data.size(); ++i)
        ev.cascade_in.v[i] = T(ev.sos_img.data[i].real());
      encoder_forward(model.cascade_seg.enc, ev.cascade_in,
                      ev.cascade_acts.enc);
      decoder_forward(model.cascade_seg.rec_dec, ev.cascade_acts.enc,
                      ev.cascade_acts.rec);
      ev.cascade_acts.valid = true;
      const Tensor3<T>& logits = ev.cascade_acts.rec.out;
      std::vector<double> raw(logits.v.size());
      for (size_t i = 0; i < raw.size(); ++i) raw[i] = double(logits.v[i]);
      ev.probs = ProbMap::from_logits(logits.h, logits.w, logits.ch, raw);
    }
    ev.seg = loss_seg(ev.probs, *sample.labels);
    ev.seg_ran = true;
  }
  ev.total = loss_total(ev.rec, ev.seg, alpha, ev.seg_ran);
  return ev;
}

namespace {

template <typename T>
Tensor3<T> seg_loss_logit_grad(const ProbMap& probs, const LabelMap& labels,
                               double alpha) {
  size_t plane = size_t(probs.height) * probs.width;
  Tensor3<T> g(probs.num_classes, probs.height, probs.width);
  for (size_t i = 0; i < plane; ++i) {
    uint8_t z = labels.labels[i];
    for (int k = 0; k < probs.num_classes; ++k) {
      double p = probs.probs[size_t(k) * plane + i];
      double d = p - (k == int(z) ? 1.0 : 0.0);
      g.v[size_t(k) * plane + i] = T(alpha * d);
    }
  }
  return g;
}

}  // namespace

template <typename T>
void model_backward(const UnrolledModel<T>& model,
                    const NormalizedSample& sample, ModelEval<T>& eval,
                    double alpha, bool labelled, ModelGrads<T>& grads) {
  const MultiCoilImage& gamma_k = eval.trace.gamma;
  size_t plane = gamma_k.plane_size();

  // dL/d(sos image): reconstruction term plus, in cascade mode, the
  // segmentation path through its input.
  std::vector<double> g_sos(plane, 0.0);
  for (size_t i = 0; i < plane; ++i)
    g_sos[i] = 2.0 * (1.0 - alpha) *
               (eval.sos_img.data[i].real() - sample.reference.data[i].real());

  Tensor3<T> g_logits;
  bool shared_seg = false;
  if (eval.seg_ran) {
    g_logits = seg_loss_logit_grad<T>(eval.probs, *sample.labels, alpha);
    if (model.mode == ModelMode::joint_shared) {
      shared_seg = true;
    } else {
      // Backward through the cascade UNET down to its 1-channel input.
      Tensor3<T> g_bott(eval.cascade_acts.enc.a5.ch, eval.cascade_acts.enc.a5.h,
                        eval.cascade_acts.enc.a5.w);
      Tensor3<T> g_sk1(eval.cascade_acts.enc.a1.ch, eval.cascade_acts.enc.a1.h,
                       eval.cascade_acts.enc.a1.w);
      Tensor3<T> g_sk2(eval.cascade_acts.enc.a3.ch, eval.cascade_acts.enc.a3.h,
                       eval.cascade_acts.enc.a3.w);
      g_bott.zero();
      g_sk1.zero();
      g_sk2.zero();
      decoder_backward(model.cascade_seg.rec_dec, eval.cascade_acts.enc,
                       eval.cascade_acts.rec, g_logits, g_bott, g_sk1, g_sk2,
                       grads.cascade.phi);
      Tensor3<T> g_in(1, eval.cascade_in.h, eval.cascade_in.w);
      g_in.zero();
      encoder_backward(model.cascade_seg.enc, eval.cascade_acts.enc, g_bott,
                       g_sk1, g_sk2, g_in, grads.cascade.theta);
      for (size_t i = 0; i < plane; ++i) g_sos[i] += double(g_in.v[i]);
    }
  }

  MultiCoilImage g_gamma = sos_backward(gamma_k, eval.sos_img, g_sos);

  for (int n = model.unroll_k - 1; n >= 0; --n) {
    MultiCoilImage g_z = dc_backward(g_gamma, sample.mask, model.lambda);
    const Tensor3<T>* logit_grad =
        (shared_seg && n == model.unroll_k - 1) ? &g_logits : nullptr;
    g_gamma =
        backward(model.params, eval.trace.acts[n], g_z, logit_grad, grads.main);
  }
}

namespace {

template <typename T>
void for_each_buffer(NetParams<T>& p,
                     const std::function<void(std::vector<T>&)>& fn) {
  for (auto& l : p.enc) {
    fn(l.w);
    fn(l.b);
  }
  for (auto& l : p.rec_dec) {
    fn(l.w);
    fn(l.b);
  }
  for (auto& l : p.seg_dec) {
    fn(l.w);
    fn(l.b);
  }
}

template <typename T>
void for_each_grad(NetGrads<T>& g,
                   const std::function<void(std::vector<T>&)>& fn) {
  for (auto& l : g.theta) {
    fn(l.w);
    fn(l.b);
  }
  for (auto& l : g.phi) {
    fn(l.w);
    fn(l.b);
  }
  for (auto& l : g.psi) {
    fn(l.w);
    fn(l.b);
  }
}

// Adam with double-precision moments regardless of the parameter type.
struct Adam {
  std::vector<double> m, v;
  int64_t t = 0;
  double lr, b1, b2, eps;

  Adam(size_t n, double lr_, double b1_, double b2_, double eps_)
      : m(n, 0.0), v(n, 0.0), lr(lr_), b1(b1_), b2(b2_), eps(eps_) {}

  template <typename T>
  void step(std::vector<std::vector<T>*>& params,
            std::vector<std::vector<T>*>& grads) {
    ++t;
    double c1 = 1.0 - std::pow(b1, double(t));
    double c2 = 1.0 - std::pow(b2, double(t));
    size_t off = 0;
    for (size_t i = 0; i < params.size(); ++i) {
      std::vector<T>& p = *params[i];
      std::vector<T>& g = *grads[i];
      for (size_t j = 0; j < p.size(); ++j) {
        double gd = double(g[j]);
        m[off] = b1 * m[off] + (1.0 - b1) * gd;
        v[off] = b2 * v[off] + (1.0 - b2) * gd * gd;
        double mh = m[off] / c1;
        double vh = v[off] / c2;
        p[j] = T(double(p[j]) - lr * mh / (std::sqrt(vh) + eps));
        ++off;
      }
    }
  }
};

}  // namespace

template <typename T>
TrainResult train(const std::vector<Dataset>& datasets,
                  UnrolledModel<T>& model, const TrainConfig& cfg) {
  if (datasets.empty()) throw numeric_error("train: needs at least 1 dataset");
  if (cfg.labelled_fraction <= 0.0 || cfg.labelled_fraction > 1.0)
    throw numeric_error("train: labelled_fraction out of range");

  const int n = int(datasets.size());
  std::vector<NormalizedSample> samples;
  samples.reserve(datasets.size());
  for (const Dataset& ds : datasets) samples.push_back(normalize_sample(ds));

  // Seeded draw of the labelled subset, fixed for the whole run.
  TrainResult result;
  std::vector<char> labelled(n, 0);
  {
    int want = int(std::ceil(cfg.labelled_fraction * n));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(cfg.seed, 55);
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[rng.below(uint64_t(i) + 1)]);
    for (int i = 0; i < want; ++i) labelled[order[i]] = 1;
    for (int i = 0; i < n; ++i)
      if (labelled[i]) result.labelled_ids.push_back(i);
  }
  if (model.mode != ModelMode::recon_only)
    for (int i = 0; i < n; ++i)
      if (labelled[i] && samples[i].labels == nullptr)
        throw config_error("train: labelled subset includes a dataset "
                           "without labels");

  std::vector<std::vector<T>*> pbufs, gbufs;
  ModelGrads<T> grads = zero_model_grads(model);
  for_each_buffer<T>(model.params,
                     [&](std::vector<T>& b) { pbufs.push_back(&b); });
  for_each_buffer<T>(model.cascade_seg,
                     [&](std::vector<T>& b) { pbufs.push_back(&b); });
  for_each_grad<T>(grads.main, [&](std::vector<T>& b) { gbufs.push_back(&b); });
  for_each_grad<T>(grads.cascade,
                   [&](std::vector<T>& b) { gbufs.push_back(&b); });

  size_t total = 0;
  for (auto* b : pbufs) total += b->size();
  Adam adam(total, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);

  result.epoch_loss.reserve(cfg.epochs);
  for (int e = 0; e < cfg.epochs; ++e) {
    double epoch_loss = 0.0;
    for (int i = 0; i < n; ++i) {
      ModelEval<T> ev =
          model_forward(model, samples[i], cfg.alpha, labelled[i] != 0);
      if (!std::isfinite(ev.total))
        throw numeric_error("train: loss diverged at epoch " +
                            std::to_string(e));
      epoch_loss += ev.total;
      for (auto* b : gbufs) std::fill(b->begin(), b->end(), T(0));
      model_backward(model, samples[i], ev, cfg.alpha, labelled[i] != 0,
                     grads);
      adam.step(pbufs, gbufs);
    }
    result.epoch_loss.push_back(epoch_loss);
  }
  return result;
}

template <typename T>
InferenceResult<T> model_infer(UnrolledModel<T>& model, const Dataset& ds) {
  NormalizedSample sample = normalize_sample(ds);
  InferenceResult<T> out;
  UnrollTrace<T> tr = idslr_forward(sample.b, sample.mask, model);
  ComplexImage s = sos(tr.gamma);
  out.sos_img = ComplexImage(s.height, s.width);
  for (size_t i = 0; i < s.data.size(); ++i)
    out.sos_img.data[i] = s.data[i] * sample.scale;
  if (model.mode == ModelMode::joint_shared && !model.params.seg_dec.empty() &&
      model.unroll_k >= 1) {
    ProbMap p = seg_forward(tr.acts.back(), model.params);
    out.seg = p.argmax();
  } else if (model.mode == ModelMode::cascade) {
    Tensor3<T> in(1, s.height, s.width);
    for (size_t i = 0; i < s.data.size(); ++i) in.v[i] = T(s.data[i].real());
    Activations<T> acts;
    encoder_forward(model.cascade_seg.enc, in, acts.enc);
    decoder_forward(model.cascade_seg.rec_dec, acts.enc, acts.rec);
    const Tensor3<T>& logits = acts.rec.out;
    std::vector<double> raw(logits.v.size());
    for (size_t i = 0; i < raw.size(); ++i) raw[i] = double(logits.v[i]);
    out.seg = ProbMap::from_logits(logits.h, logits.w, logits.ch, raw).argmax();
  }
  return out;
}

// Explicit instantiations for the two supported scalar types.
template UnrolledModel<float> make_model<float>(ModelMode, int, int, int, int,
                                                int, int, double, uint64_t);
template UnrolledModel<double> make_model<double>(ModelMode, int, int, int,
                                                  int, int, int, double,
                                                  uint64_t);
template UnrollTrace<float> idslr_forward<float>(const KSpaceData&,
                                                 const SamplingMask&,
                                                 const UnrolledModel<float>&);
template UnrollTrace<double> idslr_forward<double>(
    const KSpaceData&, const SamplingMask&, const UnrolledModel<double>&);
template ModelEval<float> model_forward<float>(UnrolledModel<float>&,
                                               const NormalizedSample&, double,
                                               bool);
template ModelEval<double> model_forward<double>(UnrolledModel<double>&,
                                                 const NormalizedSample&,
                                                 double, bool);
template void model_backward<float>(const UnrolledModel<float>&,
                                    const NormalizedSample&, ModelEval<float>&,
                                    double, bool, ModelGrads<float>&);
template void model_backward<double>(const UnrolledModel<double>&,
                                     const NormalizedSample&,
                                     ModelEval<double>&, double, bool,
                                     ModelGrads<double>&);
template TrainResult train<float>(const std::vector<Dataset>&,
                                  UnrolledModel<float>&, const TrainConfig&);
template TrainResult train<double>(const std::vector<Dataset>&,
                                   UnrolledModel<double>&, const TrainConfig&);
template InferenceResult<float> model_infer<float>(UnrolledModel<float>&,
                                                   const Dataset&);
template InferenceResult<double> model_infer<double>(UnrolledModel<double>&,
                                                     const Dataset&);

}  // namespace pmri
