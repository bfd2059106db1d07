#include "pmri/png.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pmri/common.hpp"

namespace pmri {

namespace {

uint32_t crc32_table_entry(uint32_t n) {
  uint32_t c = n;
  for (int k = 0; k < 8; ++k)
    c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
  return c;
}

uint32_t crc32(const uint8_t* data, size_t len, uint32_t crc = 0) {
  static uint32_t table[256];
  static bool init = false;
  if (!init) {
    for (uint32_t n = 0; n < 256; ++n) table[n] = crc32_table_entry(n);
    init = true;
  }
  uint32_t c = crc ^ 0xFFFFFFFFu;
  for (size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

uint32_t adler32(const uint8_t* data, size_t len) {
  uint32_t a = 1, b = 0;
  for (size_t i = 0; i < len; ++i) {
    a = (a + data[i]) % 65521u;
    b = (b + a) % 65521u;
  }
  return (b << 16) | a;
}

void put_u32be(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v >> 24));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v));
}

void put_chunk(std::vector<uint8_t>& out, const char type[4],
               const std::vector<uint8_t>& payload) {
  put_u32be(out, uint32_t(payload.size()));
  size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  uint32_t crc = crc32(out.data() + start, out.size() - start);
  put_u32be(out, crc);
}

// Raw zlib stream built from stored (uncompressed) deflate blocks.
std::vector<uint8_t> zlib_store(const std::vector<uint8_t>& raw) {
  std::vector<uint8_t> z;
  z.push_back(0x78);
  z.push_back(0x01);
  size_t pos = 0;
  do {
    size_t n = std::min<size_t>(raw.size() - pos, 65535);
    bool last = pos + n == raw.size();
    z.push_back(last ? 1 : 0);
    z.push_back(uint8_t(n & 0xFF));
    z.push_back(uint8_t(n >> 8));
    z.push_back(uint8_t(~n & 0xFF));
    z.push_back(uint8_t((~n >> 8) & 0xFF));
    z.insert(z.end(), raw.begin() + pos, raw.begin() + pos + n);
    pos += n;
  } while (pos < raw.size());
  uint32_t ad = adler32(raw.data(), raw.size());
  put_u32be(z, ad);
  return z;
}

void write_png(const std::string& path, int height, int width,
               const std::vector<uint8_t>& pixels, bool palette,
               const uint8_t* palette_rgb, int palette_len) {
  if (pixels.size() != size_t(height) * width)
    throw io_error("write_png: pixel buffer does not match shape");
  std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

  std::vector<uint8_t> ihdr;
  put_u32be(ihdr, uint32_t(width));
  put_u32be(ihdr, uint32_t(height));
  ihdr.push_back(8);                     // bit depth
  ihdr.push_back(palette ? 3 : 0);       // color type
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  put_chunk(out, "IHDR", ihdr);

  if (palette) {
    std::vector<uint8_t> plte(palette_rgb, palette_rgb + 3 * palette_len);
    put_chunk(out, "PLTE", plte);
  }

  std::vector<uint8_t> raw;
  raw.reserve(size_t(height) * (width + 1));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), pixels.begin() + size_t(y) * width,
               pixels.begin() + size_t(y + 1) * width);
  }
  put_chunk(out, "IDAT", zlib_store(raw));
  put_chunk(out, "IEND", {});

  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(out.data()),
          std::streamsize(out.size()));
  if (!f) throw io_error("write failed: " + path);
}

}  // namespace

void write_png_gray(const std::string& path, int height, int width,
                    const std::vector<uint8_t>& pixels) {
  write_png(path, height, width, pixels, false, nullptr, 0);
}

void write_png_image(const std::string& path, const ComplexImage& img,
                     double lo, double hi) {
  if (hi <= lo) hi = lo + 1.0;
  std::vector<uint8_t> px(img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) {
    double v = (img.data[i].real() - lo) / (hi - lo);
    v = std::clamp(v, 0.0, 1.0);
    px[i] = uint8_t(std::lround(v * 255.0));
  }
  write_png_gray(path, img.height, img.width, px);
}

void write_png_labels(const std::string& path, const LabelMap& labels) {
  static const uint8_t palette[12] = {
      0,   0,   0,    // background: black
      40,  90,  220,  // CSF: blue
      128, 128, 128,  // GM: gray
      255, 255, 255,  // WM: white
  };
  write_png(path, labels.height, labels.width, labels.labels, true, palette,
            4);
}

}  // namespace pmri
