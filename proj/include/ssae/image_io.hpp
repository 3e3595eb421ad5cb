#pragma once

#include <filesystem>
#include <string>
#include <utility>

#include "ssae/tensor.hpp"

namespace ssae {

// PNG decode to float intensities in [0,1]; 8-bit and 16-bit sources divide
// by 255 / 65535. Grayscale stays c=1 unless expand_rgb is set.
Tensor load_png(const std::filesystem::path& path, bool expand_rgb = false);

// Writes c=1 as grayscale and c=3 as RGB, rounding [0,1] floats to 8 bit.
// Output bytes depend only on the pixel content.
void save_png(const std::filesystem::path& path, const Tensor& img);

// Reads only the IHDR of a PNG: (height, width). Throws on a bad signature.
std::pair<int, int> png_dims(const std::filesystem::path& path);

// Raw float maps travel as .npy (version 1.0, little-endian float32,
// C-order, shape HxW or CxHxW).
void save_npy(const std::filesystem::path& path, const Tensor& t);
Tensor load_npy(const std::filesystem::path& path);

}  // namespace ssae
