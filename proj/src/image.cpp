#include "goal/image.hpp"

#include <cctype>

#include "goal/error.hpp"
#include "goal/io_util.hpp"

namespace goal {

bool bbox_valid(const BBox& box, std::size_t width, std::size_t height) {
  return box.x1 >= 0 && box.x1 < box.x2 && static_cast<std::size_t>(box.x2) <= width &&
         box.y1 >= 0 && box.y1 < box.y2 && static_cast<std::size_t>(box.y2) <= height;
}

std::string encode_ppm(const Image& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(image.rgb.data()), image.rgb.size());
  return out;
}

namespace {

// Reads one whitespace-delimited decimal header field, skipping '#' comments.
std::size_t header_number(const std::string& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  std::size_t value = 0;
  while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
    value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
    if (value > (1u << 24)) throw ParseError("PPM header value too large", start);
    ++pos;
  }
  if (pos == start) throw ParseError("PPM header expects a number", start);
  return value;
}

}  // namespace

Image decode_ppm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
    throw ParseError("bad PPM magic (expected P6)", 0);
  std::size_t pos = 2;
  const std::size_t w = header_number(bytes, pos);
  const std::size_t h = header_number(bytes, pos);
  const std::size_t maxval = header_number(bytes, pos);
  if (maxval != 255) throw ParseError("PPM maxval must be 255", pos);
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw ParseError("PPM header must end with one whitespace byte", pos);
  ++pos;
  const std::size_t expected = w * h * 3;
  if (bytes.size() - pos != expected)
    throw ParseError("PPM pixel data: expected " + std::to_string(expected) + " bytes, got " +
                         std::to_string(bytes.size() - pos),
                     pos);
  Image image(w, h);
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), image.rgb.begin());
  return image;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  write_file(path, encode_ppm(image));
}

Image read_ppm(const std::filesystem::path& path) { return decode_ppm(read_file(path)); }

Image crop_and_resize(const Image& image, const BBox& box, std::size_t side) {
  if (!bbox_valid(box, image.width, image.height))
    throw ContractError("crop box outside image");
  Image out(side, side);
  const std::size_t w = static_cast<std::size_t>(box.width());
  const std::size_t h = static_cast<std::size_t>(box.height());
  for (std::size_t y = 0; y < side; ++y) {
    const std::size_t sy = static_cast<std::size_t>(box.y1) + y * h / side;
    for (std::size_t x = 0; x < side; ++x) {
      const std::size_t sx = static_cast<std::size_t>(box.x1) + x * w / side;
      const std::uint8_t* src = image.pixel(sx, sy);
      std::uint8_t* dst = out.pixel(x, y);
      dst[0] = src[0];
      dst[1] = src[1];
      dst[2] = src[2];
    }
  }
  return out;
}

}  // namespace goal
