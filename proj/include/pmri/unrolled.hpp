#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pmri/config.hpp"
#include "pmri/fourier.hpp"
#include "pmri/net.hpp"

namespace pmri {

enum class ModelMode { joint_shared, cascade, recon_only };

std::string mode_name(ModelMode m);
ModelMode mode_from_name(const std::string& name);

/// Unrolled reconstruction network with an optional segmentation head.
/// One parameter set is shared across all unroll iterations. In cascade
/// mode the segmentation path is a separate UNET (its own encoder and
/// decoder) reading the combined magnitude image.
template <typename T>
struct UnrolledModel {
  ModelMode mode = ModelMode::joint_shared;
  int unroll_k = 3;
  double lambda = 100.0;
  NetParams<T> params;       // shared encoder, recon decoder, seg decoder
  NetParams<T> cascade_seg;  // cascade mode only: enc + one decoder

  size_t total_params() const {
    return param_count(params) + param_count(cascade_seg);
  }
};

/// Builds a model. Cascade mode picks the widths of its private
/// segmentation UNET so the total learnable parameter count matches the
/// equivalent shared model within 5%.
template <typename T>
UnrolledModel<T> make_model(ModelMode mode, int coils, int classes, int w1,
                            int w2, int w3, int k, double lambda,
                            uint64_t seed);

/// One forward pass of the unrolled network: gamma_0 = A^H b, then K
/// rounds of denoise + data consistency. Caches every iteration for the
/// reverse pass.
template <typename T>
struct UnrollTrace {
  MultiCoilImage gamma;                 // final iterate
  std::vector<Activations<T>> acts;     // per-iteration caches
  std::vector<MultiCoilImage> z;        // per-iteration denoiser outputs
};

template <typename T>
UnrollTrace<T> idslr_forward(const KSpaceData& b, const SamplingMask& mask,
                             const UnrolledModel<T>& model);

/// Per-pixel root sum of squared coil magnitudes, as a real-valued image.
ComplexImage sos(const MultiCoilImage& img);

/// Carrier-convention gradient of a function of the combined magnitude:
/// maps dL/d(sos) back to dL/d(gamma).
MultiCoilImage sos_backward(const MultiCoilImage& img,
                            const ComplexImage& sos_img,
                            const std::vector<double>& g_sos);

/// Sum of squared differences of combined magnitudes.
double loss_rec(const ComplexImage& sos_img, const ComplexImage& reference);

/// Pixel-wise multi-class cross entropy of the probability map against
/// integer labels; probabilities are clamped at 1e-12 before the log.
double loss_seg(const ProbMap& probs, const LabelMap& labels);

/// Weighted combination: labelled datasets use (1-alpha)*rec + alpha*seg;
/// unlabelled datasets drop the segmentation term but keep the (1-alpha)
/// reconstruction weight.
double loss_total(double rec, double seg, double alpha, bool labelled);

/// Gradients for the main network and (cascade mode) the private
/// segmentation network.
template <typename T>
struct ModelGrads {
  NetGrads<T> main;
  NetGrads<T> cascade;
};

/// One dataset prepared for the network: unit-normalized measurements
/// (max zero-filled SOS equals 1) plus the matching scaled reference.
struct NormalizedSample {
  KSpaceData b;
  SamplingMask mask;
  ComplexImage reference;
  const LabelMap* labels = nullptr;  // borrowed, may be null
  double scale = 1.0;
};
NormalizedSample normalize_sample(const Dataset& ds);

/// Forward evaluation of the full model on one sample.
template <typename T>
struct ModelEval {
  UnrollTrace<T> trace;
  ComplexImage sos_img;
  ProbMap probs;             // valid when segmentation ran
  bool seg_ran = false;
  Activations<T> cascade_acts;
  Tensor3<T> cascade_in;
  double rec = 0.0;
  double seg = 0.0;
  double total = 0.0;
};

template <typename T>
ModelEval<T> model_forward(UnrolledModel<T>& model,
                           const NormalizedSample& sample, double alpha,
                           bool labelled);

/// Reverse pass matching model_forward; accumulates into grads.
template <typename T>
void model_backward(const UnrolledModel<T>& model,
                    const NormalizedSample& sample, ModelEval<T>& eval,
                    double alpha, bool labelled, ModelGrads<T>& grads);

template <typename T>
ModelGrads<T> zero_model_grads(const UnrolledModel<T>& model) {
  ModelGrads<T> g;
  g.main = zero_net_grads(model.params);
  g.cascade = zero_net_grads(model.cascade_seg);
  return g;
}

/// Optimizer and schedule settings for train().
struct TrainConfig {
  double alpha = 1e-4;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int epochs = 300;
  double labelled_fraction = 1.0;
  uint64_t seed = 0;
};

struct TrainResult {
  std::vector<double> epoch_loss;   // summed over datasets per epoch
  std::vector<int> labelled_ids;    // sorted dataset indices with labels used
};

/// End-to-end training: one Adam step per dataset per epoch, datasets
/// visited in order, the labelled subset drawn once by seeded sampling
/// of ceil(fraction * N) indices. Deterministic given the seed.
/// Raises numeric_error if the loss leaves the finite range.
template <typename T>
TrainResult train(const std::vector<Dataset>& datasets,
                  UnrolledModel<T>& model, const TrainConfig& cfg);

/// Cascade counterpart of a shared-encoder model configuration; see
/// make_model. Exposed separately so callers can compare parameter
/// counts.
template <typename T>
UnrolledModel<T> build_cascade(int coils, int classes, int w1, int w2, int w3,
                               int k, double lambda, uint64_t seed) {
  return make_model<T>(ModelMode::cascade, coils, classes, w1, w2, w3, k,
                       lambda, seed);
}

// Checkpoint files: a PMRC container of named parameter tensors plus a
// JSON manifest (mode, unroll count, lambda, widths, scalar type).
void save_checkpoint(const std::string& path, const UnrolledModel<float>& m);
void save_checkpoint(const std::string& path, const UnrolledModel<double>& m);
UnrolledModel<float> load_checkpoint_f32(const std::string& path);
UnrolledModel<double> load_checkpoint_f64(const std::string& path);
std::string checkpoint_scalar(const std::string& path);  // "f32" or "f64"

/// Reconstruction + optional segmentation for inference: normalizes,
/// runs the unrolled forward pass, undoes the normalization.
template <typename T>
struct InferenceResult {
  ComplexImage sos_img;
  std::optional<LabelMap> seg;
};
template <typename T>
InferenceResult<T> model_infer(UnrolledModel<T>& model, const Dataset& ds);

}  // namespace pmri
