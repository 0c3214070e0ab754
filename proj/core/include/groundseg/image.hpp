#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "groundseg/point_cloud.hpp"

namespace groundseg {

/// Row-major image, pixel (x, y) at index y * width + x, y pointing down.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> pixels;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  friend bool operator==(const Image&, const Image&) = default;
};

/// Per-pixel camera-frame depth in meters; kNoSurface marks uncovered pixels.
using DepthMap = Image<double>;
using RgbImage = Image<Rgb>;
using LabelMask = Image<MaterialLabel>;

inline constexpr double kNoSurface = std::numeric_limits<double>::infinity();
/// Stand-in for kNoSurface in PFM files.
inline constexpr float kPfmNoSurface = 1e30f;

/// Little-endian PFM ("Pf", scale -1.0), rows stored bottom-up as the format
/// requires. Values >= kPfmNoSurface read back as kNoSurface.
void write_pfm(const DepthMap& depth, const std::filesystem::path& path);
DepthMap read_pfm(const std::filesystem::path& path);

void write_ppm(const RgbImage& image, const std::filesystem::path& path);
RgbImage read_ppm(const std::filesystem::path& path);

/// Binary PGM holding raw label codes {0, 1, 2, 255}.
void write_label_pgm(const LabelMask& mask, const std::filesystem::path& path);
LabelMask read_label_pgm(const std::filesystem::path& path);

}  // namespace groundseg
