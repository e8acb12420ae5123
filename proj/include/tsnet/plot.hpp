#pragma once

#include "tsnet/data.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace tsnet {

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr Rgb kObservedColor{0, 0, 255};
inline constexpr Rgb kPredictionColor{0, 170, 0};
inline constexpr Rgb kTruthColor{220, 0, 0};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  static Image blank(int width, int height, Rgb fill = {255, 255, 255});
  Rgb at(int x, int y) const;
};

/// Throws IoError when the file cannot be read as PNG.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

/// Rectangle outline clipped to the image.
void draw_box(Image& image, const BBox& box, Rgb color, int thickness = 2);

}  // namespace tsnet
