#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "segprop/core/types.hpp"

namespace segprop {

// PNG I/O. Frames are read from 8- or 16-bit gray / RGB PNGs (alpha is
// dropped, palettes expanded) and scaled to [0,1]. Frames are written as
// 8-bit with round-to-nearest.
Frame load_frame(const std::filesystem::path& path);
void save_frame(const Frame& frame, const std::filesystem::path& path);

// Label PNGs are single-channel 8-bit: 0..K-1 are classes, 255 is void.
LabelMap load_label(const std::filesystem::path& path, int num_classes);
void save_label(const LabelMap& label, const std::filesystem::path& path);

// Writes `values` (H*W, row-major) as an 8-bit grayscale PNG after dividing
// by `scale` and clamping to [0,1]. Used for entropy and loss maps.
void save_gray_png(std::span<const double> values, Size size, double scale,
                   const std::filesystem::path& path);

// Raw PNG codec shared by the functions above.
struct RawImage {
  int height = 0;
  int width = 0;
  int channels = 0;   // 1 or 3
  int bit_depth = 0;  // 8 or 16
  std::vector<std::uint16_t> samples;
};
RawImage read_png(const std::filesystem::path& path);
void write_png8(const std::filesystem::path& path, int height, int width,
                int channels, std::span<const std::uint8_t> samples);

}  // namespace segprop
