#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "pmri/tensor.hpp"

namespace pmri {

/// Element types of the binary tensor container.
enum class Dtype : uint8_t { f32 = 0, f64 = 1, c64 = 2, u8 = 3 };

size_t dtype_size(Dtype d);

/// Raw typed tensor: a dtype, a shape and a little-endian payload.
/// This is the unit the container format stores; the domain types in
/// tensor.hpp convert to and from it.
struct TensorBlob {
  Dtype dtype = Dtype::f32;
  std::vector<uint32_t> shape;
  std::vector<uint8_t> bytes;

  size_t elems() const {
    size_t n = 1;
    for (uint32_t s : shape) n *= s;
    return n;
  }
};

// Container format ("PMRI", version 1):
//   bytes 0..3  magic "PMRI"
//   byte  4     version = 1
//   byte  5     dtype (0=f32, 1=f64, 2=c64, 3=u8)
//   byte  6     ndim
//   byte  7     reserved = 0
//   next        ndim x u32 shape, little endian
//   rest        payload, little endian
void write_blob(std::ostream& os, const TensorBlob& blob);
TensorBlob read_blob(std::istream& is, const std::string& name);
void write_blob(const std::string& path, const TensorBlob& blob);
TensorBlob read_blob(const std::string& path);

// Conversions between domain types and blobs. Complex images store as
// complex64, label maps and masks as u8. Double payloads (network
// checkpoints) store as f64 and round-trip bit-exactly.
TensorBlob to_blob(const ComplexImage& img);
TensorBlob to_blob(const MultiCoilImage& img);
TensorBlob to_blob(const KSpaceData& k);
TensorBlob to_blob(const SamplingMask& mask);
TensorBlob to_blob(const LabelMap& labels);
TensorBlob blob_f64(const std::vector<double>& v,
                    const std::vector<uint32_t>& shape);
TensorBlob blob_f32(const std::vector<float>& v,
                    const std::vector<uint32_t>& shape);

ComplexImage blob_to_image(const TensorBlob& b);
MultiCoilImage blob_to_multicoil(const TensorBlob& b);
KSpaceData blob_to_kspace(const TensorBlob& b);
SamplingMask blob_to_mask(const TensorBlob& b, double accel);
LabelMap blob_to_labels(const TensorBlob& b);
std::vector<double> blob_to_f64(const TensorBlob& b);
std::vector<float> blob_to_f32(const TensorBlob& b);

// Typed single-tensor files.
void write_tensor(const std::string& path, const ComplexImage& img);
void write_tensor(const std::string& path, const MultiCoilImage& img);
void write_tensor(const std::string& path, const KSpaceData& k);
void write_tensor(const std::string& path, const SamplingMask& mask);
void write_tensor(const std::string& path, const LabelMap& labels);

/// Multi-tensor checkpoint container ("PMRC"): a JSON manifest followed
/// by named PMRI tensor streams in manifest order.
struct NamedBlobs {
  std::string manifest_json;  // free-form metadata, parsed by the caller
  std::vector<std::pair<std::string, TensorBlob>> tensors;
};
void write_container(const std::string& path, const NamedBlobs& blobs);
NamedBlobs read_container(const std::string& path);

/// Dataset bundle on disk: a directory of PMRI tensor files plus a
/// manifest.json naming the members and the generation parameters.
struct DatasetMeta {
  uint64_t seed = 0;
  double accel = 1.0;
  double noise_sigma = 0.0;
  double center_fraction = 0.0;
  double density_exponent = 0.0;
  double sampled_fraction = 0.0;
};
void save_dataset(const std::string& dir, const Dataset& ds,
                  const DatasetMeta& meta);
Dataset load_dataset(const std::string& dir, DatasetMeta* meta = nullptr);

// Small helpers shared by the CLI and the generators.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace pmri
