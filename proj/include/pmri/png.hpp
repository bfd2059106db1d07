#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmri/tensor.hpp"

namespace pmri {

/// Writes an 8-bit grayscale PNG (zlib stored blocks, no compression).
void write_png_gray(const std::string& path, int height, int width,
                    const std::vector<uint8_t>& pixels);

/// Grayscale rendering of a real-valued image, windowed to the given
/// range (min-max of the reference image in the pipeline).
void write_png_image(const std::string& path, const ComplexImage& img,
                     double lo, double hi);

/// Fixed 4-color palette rendering of a label map: background black,
/// CSF blue, GM gray, WM white.
void write_png_labels(const std::string& path, const LabelMap& labels);

}  // namespace pmri
