#include <cstring>

#include "json.hpp"
#include "pmri/io.hpp"
#include "pmri/unrolled.hpp"

namespace pmri {

using nlohmann::json;

namespace {

template <typename T>
const char* scalar_name();
template <>
const char* scalar_name<float>() { return "f32"; }
template <>
const char* scalar_name<double>() { return "f64"; }

template <typename T>
TensorBlob layer_blob(const std::vector<T>& v) {
  std::vector<uint32_t> shape = {uint32_t(v.size())};
  if constexpr (std::is_same_v<T, float>) {
    return blob_f32(v, shape);
  } else {
    return blob_f64(v, shape);
  }
}

template <typename T>
std::vector<T> blob_values(const TensorBlob& b) {
  if constexpr (std::is_same_v<T, float>) {
    return blob_to_f32(b);
  } else {
    return blob_to_f64(b);
  }
}

template <typename T>
void push_group(NamedBlobs& out, const std::string& group,
                const std::vector<ConvLayer<T>>& layers) {
  for (size_t i = 0; i < layers.size(); ++i) {
    out.tensors.emplace_back(group + "." + std::to_string(i) + ".w",
                             layer_blob(layers[i].w));
    out.tensors.emplace_back(group + "." + std::to_string(i) + ".b",
                             layer_blob(layers[i].b));
  }
}

template <typename T>
void save_impl(const std::string& path, const UnrolledModel<T>& m) {
  json meta = {{"format", "pmri-checkpoint"},
               {"scalar", scalar_name<T>()},
               {"mode", mode_name(m.mode)},
               {"unroll_k", m.unroll_k},
               {"lambda", m.lambda},
               {"in_ch", m.params.in_ch},
               {"classes", m.params.classes},
               {"widths", {m.params.width1, m.params.width2, m.params.width3}}};
  NamedBlobs blobs;
  blobs.tensors.reserve(2 * (m.params.enc.size() + m.params.rec_dec.size() +
                             m.params.seg_dec.size()));
  push_group(blobs, "theta", m.params.enc);
  push_group(blobs, "phi", m.params.rec_dec);
  push_group(blobs, "psi", m.params.seg_dec);
  if (m.mode == ModelMode::cascade) {
    meta["cascade_widths"] = {m.cascade_seg.width1, m.cascade_seg.width2,
                              m.cascade_seg.width3};
    meta["cascade_classes"] = m.cascade_seg.rec_out;
    push_group(blobs, "seg_enc", m.cascade_seg.enc);
    push_group(blobs, "seg_dec", m.cascade_seg.rec_dec);
  }
  blobs.manifest_json = meta.dump();
  write_container(path, blobs);
}

template <typename T>
void load_group(const NamedBlobs& blobs, const std::string& group,
                std::vector<ConvLayer<T>>& layers) {
  for (size_t i = 0; i < layers.size(); ++i) {
    std::string wname = group + "." + std::to_string(i) + ".w";
    std::string bname = group + "." + std::to_string(i) + ".b";
    bool found_w = false, found_b = false;
    for (const auto& [name, blob] : blobs.tensors) {
      if (name == wname) {
        std::vector<T> v = blob_values<T>(blob);
        if (v.size() != layers[i].w.size())
          throw io_error("checkpoint: size mismatch for " + wname);
        layers[i].w = std::move(v);
        found_w = true;
      } else if (name == bname) {
        std::vector<T> v = blob_values<T>(blob);
        if (v.size() != layers[i].b.size())
          throw io_error("checkpoint: size mismatch for " + bname);
        layers[i].b = std::move(v);
        found_b = true;
      }
    }
    if (!found_w || !found_b)
      throw io_error("checkpoint: missing tensors for " + group + "." +
                     std::to_string(i));
  }
}

template <typename T>
UnrolledModel<T> load_impl(const std::string& path) {
  NamedBlobs blobs = read_container(path);
  json meta = json::parse(blobs.manifest_json);
  if (meta.value("format", "") != "pmri-checkpoint")
    throw io_error(path + ": not a checkpoint file");
  if (meta.value("scalar", "") != scalar_name<T>())
    throw io_error(path + ": checkpoint scalar type is " +
                   meta.value("scalar", "?") + ", expected " +
                   scalar_name<T>());
  ModelMode mode = mode_from_name(meta.at("mode").get<std::string>());
  int in_ch = meta.at("in_ch").get<int>();
  int classes = meta.at("classes").get<int>();
  auto widths = meta.at("widths");
  int coils = in_ch / 2;
  // classes==0 is stored for recon-only and cascade trunks; cascade keeps
  // its own head description.
  int model_classes = classes;
  if (mode == ModelMode::cascade)
    model_classes = meta.at("cascade_classes").get<int>();
  UnrolledModel<T> m = make_model<T>(
      mode, coils, model_classes, widths[0].get<int>(), widths[1].get<int>(),
      widths[2].get<int>(), meta.at("unroll_k").get<int>(),
      meta.at("lambda").get<double>(), 0);
  load_group(blobs, "theta", m.params.enc);
  load_group(blobs, "phi", m.params.rec_dec);
  load_group(blobs, "psi", m.params.seg_dec);
  if (mode == ModelMode::cascade) {
    auto cw = meta.at("cascade_widths");
    if (m.cascade_seg.width1 != cw[0].get<int>() ||
        m.cascade_seg.width2 != cw[1].get<int>() ||
        m.cascade_seg.width3 != cw[2].get<int>())
      throw io_error(path + ": cascade widths do not match this build");
    load_group(blobs, "seg_enc", m.cascade_seg.enc);
    load_group(blobs, "seg_dec", m.cascade_seg.rec_dec);
  }
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const UnrolledModel<float>& m) {
  save_impl(path, m);
}
void save_checkpoint(const std::string& path, const UnrolledModel<double>& m) {
  save_impl(path, m);
}
UnrolledModel<float> load_checkpoint_f32(const std::string& path) {
  return load_impl<float>(path);
}
UnrolledModel<double> load_checkpoint_f64(const std::string& path) {
  return load_impl<double>(path);
}

std::string checkpoint_scalar(const std::string& path) {
  NamedBlobs blobs = read_container(path);
  json meta = json::parse(blobs.manifest_json);
  return meta.value("scalar", "");
}

}  // namespace pmri
