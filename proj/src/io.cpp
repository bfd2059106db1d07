#include "pmri/io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace pmri {

namespace fs = std::filesystem;
using nlohmann::json;

size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::f32: return 4;
    case Dtype::f64: return 8;
    case Dtype::c64: return 8;
    case Dtype::u8: return 1;
  }
  throw io_error("unknown dtype code");
}

namespace {

constexpr char kMagic[4] = {'P', 'M', 'R', 'I'};
constexpr uint8_t kVersion = 1;

void put_u32le(std::ostream& os, uint32_t v) {
  uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16),
                  uint8_t(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32le(const uint8_t* b) {
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
         uint32_t(b[3]) << 24;
}

[[noreturn]] void truncated(const std::string& name, size_t want, size_t got) {
  std::ostringstream msg;
  msg << name << ": truncated, expected " << want << " more bytes, found "
      << got << " (missing " << (want - got) << ")";
  throw io_error(msg.str());
}

}  // namespace

void write_blob(std::ostream& os, const TensorBlob& blob) {
  if (blob.shape.size() > 255) throw io_error("tensor rank too large");
  size_t want = blob.elems() * dtype_size(blob.dtype);
  if (blob.bytes.size() != want)
    throw io_error("tensor payload does not match shape");
  os.write(kMagic, 4);
  os.put(char(kVersion));
  os.put(char(uint8_t(blob.dtype)));
  os.put(char(uint8_t(blob.shape.size())));
  os.put(0);  // reserved
  for (uint32_t s : blob.shape) put_u32le(os, s);
  os.write(reinterpret_cast<const char*>(blob.bytes.data()),
           std::streamsize(blob.bytes.size()));
  if (!os) throw io_error("tensor write failed");
}

TensorBlob read_blob(std::istream& is, const std::string& name) {
  uint8_t head[8];
  is.read(reinterpret_cast<char*>(head), 8);
  if (is.gcount() != 8) truncated(name, 8, size_t(is.gcount()));
  if (std::memcmp(head, kMagic, 4) != 0)
    throw io_error(name + ": bad magic, not a PMRI tensor");
  if (head[4] != kVersion)
    throw io_error(name + ": unsupported version " + std::to_string(head[4]));
  if (head[5] > 3) throw io_error(name + ": unknown dtype code");
  TensorBlob blob;
  blob.dtype = Dtype(head[5]);
  int ndim = head[6];
  std::vector<uint8_t> raw(size_t(ndim) * 4);
  is.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
  if (size_t(is.gcount()) != raw.size())
    truncated(name, raw.size(), size_t(is.gcount()));
  blob.shape.resize(ndim);
  for (int i = 0; i < ndim; ++i) blob.shape[i] = get_u32le(&raw[size_t(i) * 4]);
  size_t payload = blob.elems() * dtype_size(blob.dtype);
  blob.bytes.resize(payload);
  is.read(reinterpret_cast<char*>(blob.bytes.data()),
          std::streamsize(payload));
  if (size_t(is.gcount()) != payload)
    truncated(name, payload, size_t(is.gcount()));
  return blob;
}

void write_blob(const std::string& path, const TensorBlob& blob) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open for write: " + path);
  write_blob(f, blob);
  if (!f) throw io_error("write failed: " + path);
}

TensorBlob read_blob(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open: " + path);
  return read_blob(f, path);
}

namespace {

void pack_c64(const std::vector<cplx>& src, std::vector<uint8_t>& out) {
  out.resize(src.size() * 8);
  float* dst = reinterpret_cast<float*>(out.data());
  for (size_t i = 0; i < src.size(); ++i) {
    dst[2 * i] = float(src[i].real());
    dst[2 * i + 1] = float(src[i].imag());
  }
}

void unpack_c64(const TensorBlob& b, std::vector<cplx>& out) {
  if (b.dtype != Dtype::c64) throw io_error("expected a c64 tensor");
  const float* src = reinterpret_cast<const float*>(b.bytes.data());
  out.resize(b.elems());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = cplx(src[2 * i], src[2 * i + 1]);
}

}  // namespace

TensorBlob to_blob(const ComplexImage& img) {
  TensorBlob b;
  b.dtype = Dtype::c64;
  b.shape = {uint32_t(img.height), uint32_t(img.width)};
  pack_c64(img.data, b.bytes);
  return b;
}

TensorBlob to_blob(const MultiCoilImage& img) {
  TensorBlob b;
  b.dtype = Dtype::c64;
  b.shape = {uint32_t(img.coils), uint32_t(img.height), uint32_t(img.width)};
  pack_c64(img.data, b.bytes);
  return b;
}

TensorBlob to_blob(const KSpaceData& k) {
  TensorBlob b;
  b.dtype = Dtype::c64;
  b.shape = {uint32_t(k.coils), uint32_t(k.height), uint32_t(k.width)};
  pack_c64(k.data, b.bytes);
  return b;
}

TensorBlob to_blob(const SamplingMask& mask) {
  TensorBlob b;
  b.dtype = Dtype::u8;
  b.shape = {uint32_t(mask.height), uint32_t(mask.width)};
  b.bytes = mask.keep;
  return b;
}

TensorBlob to_blob(const LabelMap& labels) {
  TensorBlob b;
  b.dtype = Dtype::u8;
  b.shape = {uint32_t(labels.height), uint32_t(labels.width)};
  b.bytes = labels.labels;
  return b;
}

TensorBlob blob_f64(const std::vector<double>& v,
                    const std::vector<uint32_t>& shape) {
  TensorBlob b;
  b.dtype = Dtype::f64;
  b.shape = shape;
  if (b.elems() != v.size()) throw io_error("blob_f64: shape mismatch");
  b.bytes.resize(v.size() * 8);
  std::memcpy(b.bytes.data(), v.data(), b.bytes.size());
  return b;
}

TensorBlob blob_f32(const std::vector<float>& v,
                    const std::vector<uint32_t>& shape) {
  TensorBlob b;
  b.dtype = Dtype::f32;
  b.shape = shape;
  if (b.elems() != v.size()) throw io_error("blob_f32: shape mismatch");
  b.bytes.resize(v.size() * 4);
  std::memcpy(b.bytes.data(), v.data(), b.bytes.size());
  return b;
}

ComplexImage blob_to_image(const TensorBlob& b) {
  if (b.shape.size() != 2) throw io_error("expected a 2-d tensor");
  ComplexImage img(int(b.shape[0]), int(b.shape[1]));
  unpack_c64(b, img.data);
  return img;
}

MultiCoilImage blob_to_multicoil(const TensorBlob& b) {
  if (b.shape.size() != 3) throw io_error("expected a 3-d tensor");
  MultiCoilImage img(int(b.shape[0]), int(b.shape[1]), int(b.shape[2]));
  unpack_c64(b, img.data);
  return img;
}

KSpaceData blob_to_kspace(const TensorBlob& b) {
  if (b.shape.size() != 3) throw io_error("expected a 3-d tensor");
  KSpaceData k(int(b.shape[0]), int(b.shape[1]), int(b.shape[2]));
  unpack_c64(b, k.data);
  return k;
}

SamplingMask blob_to_mask(const TensorBlob& b, double accel) {
  if (b.shape.size() != 2 || b.dtype != Dtype::u8)
    throw io_error("expected a 2-d u8 tensor");
  SamplingMask m(int(b.shape[0]), int(b.shape[1]), accel);
  m.keep = b.bytes;
  return m;
}

LabelMap blob_to_labels(const TensorBlob& b) {
  if (b.shape.size() != 2 || b.dtype != Dtype::u8)
    throw io_error("expected a 2-d u8 tensor");
  LabelMap l(int(b.shape[0]), int(b.shape[1]));
  l.labels = b.bytes;
  return l;
}

std::vector<double> blob_to_f64(const TensorBlob& b) {
  if (b.dtype != Dtype::f64) throw io_error("expected an f64 tensor");
  std::vector<double> v(b.elems());
  std::memcpy(v.data(), b.bytes.data(), b.bytes.size());
  return v;
}

std::vector<float> blob_to_f32(const TensorBlob& b) {
  if (b.dtype != Dtype::f32) throw io_error("expected an f32 tensor");
  std::vector<float> v(b.elems());
  std::memcpy(v.data(), b.bytes.data(), b.bytes.size());
  return v;
}

void write_tensor(const std::string& path, const ComplexImage& img) {
  write_blob(path, to_blob(img));
}
void write_tensor(const std::string& path, const MultiCoilImage& img) {
  write_blob(path, to_blob(img));
}
void write_tensor(const std::string& path, const KSpaceData& k) {
  write_blob(path, to_blob(k));
}
void write_tensor(const std::string& path, const SamplingMask& mask) {
  write_blob(path, to_blob(mask));
}
void write_tensor(const std::string& path, const LabelMap& labels) {
  write_blob(path, to_blob(labels));
}

void write_container(const std::string& path, const NamedBlobs& blobs) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open for write: " + path);
  json meta = json::parse(blobs.manifest_json.empty() ? "{}"
                                                      : blobs.manifest_json);
  json names = json::array();
  for (const auto& [name, blob] : blobs.tensors) names.push_back(name);
  meta["tensors"] = names;
  std::string text = meta.dump();
  f.write("PMRC", 4);
  put_u32le(f, uint32_t(text.size()));
  f.write(text.data(), std::streamsize(text.size()));
  for (const auto& [name, blob] : blobs.tensors) write_blob(f, blob);
  if (!f) throw io_error("write failed: " + path);
}

NamedBlobs read_container(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open: " + path);
  uint8_t head[8];
  f.read(reinterpret_cast<char*>(head), 8);
  if (f.gcount() != 8 || std::memcmp(head, "PMRC", 4) != 0)
    throw io_error(path + ": not a PMRC container");
  uint32_t len = get_u32le(head + 4);
  std::string text(len, '\0');
  f.read(text.data(), len);
  if (size_t(f.gcount()) != len) truncated(path, len, size_t(f.gcount()));
  json meta = json::parse(text, nullptr, false);
  if (meta.is_discarded() || !meta.contains("tensors"))
    throw io_error(path + ": bad container manifest");
  NamedBlobs out;
  out.manifest_json = text;
  for (const auto& name : meta["tensors"])
    out.tensors.emplace_back(name.get<std::string>(), read_blob(f, path));
  return out;
}

void save_dataset(const std::string& dir, const Dataset& ds,
                  const DatasetMeta& meta) {
  ds.validate();
  fs::create_directories(dir);
  write_tensor(dir + "/kspace.pmri", ds.kspace);
  write_tensor(dir + "/mask.pmri", ds.mask);
  write_tensor(dir + "/sens.pmri", ds.sens);
  write_tensor(dir + "/reference.pmri", ds.reference);
  json files = {{"kspace", "kspace.pmri"},
                {"mask", "mask.pmri"},
                {"sens", "sens.pmri"},
                {"reference", "reference.pmri"}};
  if (ds.labels) {
    write_tensor(dir + "/labels.pmri", *ds.labels);
    files["labels"] = "labels.pmri";
  }
  json m = {{"format", "pmri-dataset"},
            {"seed", ds.seed},
            {"coils", ds.kspace.coils},
            {"height", ds.kspace.height},
            {"width", ds.kspace.width},
            {"accel", meta.accel},
            {"noise_sigma", meta.noise_sigma},
            {"center_fraction", meta.center_fraction},
            {"density_exponent", meta.density_exponent},
            {"sampled_fraction", meta.sampled_fraction},
            {"labelled", ds.labels.has_value()},
            {"files", files}};
  write_text_file(dir + "/manifest.json", m.dump(2) + "\n");
}

Dataset load_dataset(const std::string& dir, DatasetMeta* meta) {
  json m = json::parse(read_text_file(dir + "/manifest.json"));
  if (m.value("format", "") != "pmri-dataset")
    throw io_error(dir + ": not a pmri-dataset directory");
  Dataset ds;
  ds.seed = m.value("seed", uint64_t(0));
  double accel = m.value("accel", 1.0);
  const json& files = m.at("files");
  auto path = [&](const char* key) {
    return dir + "/" + files.at(key).get<std::string>();
  };
  ds.kspace = blob_to_kspace(read_blob(path("kspace")));
  ds.mask = blob_to_mask(read_blob(path("mask")), accel);
  ds.sens = blob_to_multicoil(read_blob(path("sens")));
  ds.reference = blob_to_image(read_blob(path("reference")));
  if (files.contains("labels"))
    ds.labels = blob_to_labels(read_blob(path("labels")));
  ds.validate();
  if (meta) {
    meta->seed = ds.seed;
    meta->accel = accel;
    meta->noise_sigma = m.value("noise_sigma", 0.0);
    meta->center_fraction = m.value("center_fraction", 0.0);
    meta->density_exponent = m.value("density_exponent", 0.0);
    meta->sampled_fraction = m.value("sampled_fraction", 0.0);
  }
  return ds;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open for write: " + path);
  f.write(text.data(), std::streamsize(text.size()));
  if (!f) throw io_error("write failed: " + path);
}

}  // namespace pmri
