#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace goal {

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(std::size_t w, std::size_t h) : width(w), height(h), rgb(w * h * 3, 0) {}

  std::uint8_t* pixel(std::size_t x, std::size_t y) { return &rgb[(y * width + x) * 3]; }
  const std::uint8_t* pixel(std::size_t x, std::size_t y) const { return &rgb[(y * width + x) * 3]; }
  bool operator==(const Image&) const = default;
};

/// Axis-aligned pixel box, [x1, x2) × [y1, y2).
struct BBox {
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  int width() const { return x2 - x1; }
  int height() const { return y2 - y1; }
  bool operator==(const BBox&) const = default;
};

/// 0 ≤ x1 < x2 ≤ width, same for y.
bool bbox_valid(const BBox& box, std::size_t width, std::size_t height);

// Binary PPM ("P6", maxval 255).
std::string encode_ppm(const Image& image);
Image decode_ppm(const std::string& bytes);
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

/// Nearest-neighbour resize of `box` to side×side: output (x, y) samples
/// source (x1 + ⌊x·w/side⌋, y1 + ⌊y·h/side⌋).
Image crop_and_resize(const Image& image, const BBox& box, std::size_t side);

}  // namespace goal
