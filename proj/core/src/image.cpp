#include "groundseg/image.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "groundseg/error.hpp"

namespace groundseg {
namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

/// Netpbm-style header tokenizer: whitespace separated, '#' comments.
class HeaderReader {
 public:
  HeaderReader(const std::vector<unsigned char>& bytes, std::string where)
      : bytes_(bytes), where_(std::move(where)) {}

  std::string token() {
    for (;;) {
      while (pos_ < bytes_.size() && std::isspace(bytes_[pos_])) ++pos_;
      if (pos_ < bytes_.size() && bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
        continue;
      }
      break;
    }
    const auto start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) ++pos_;
    if (start == pos_) throw ParseError(where_ + ": truncated header at byte " + std::to_string(start));
    return {bytes_.begin() + static_cast<std::ptrdiff_t>(start),
            bytes_.begin() + static_cast<std::ptrdiff_t>(pos_)};
  }

  int positive_int() {
    const auto at = pos_;
    const auto t = token();
    try {
      std::size_t used = 0;
      const int v = std::stoi(t, &used);
      if (used == t.size() && v > 0) return v;
    } catch (const std::exception&) {
    }
    throw ParseError(where_ + ": bad header value '" + t + "' at byte " + std::to_string(at));
  }

  /// Consumes the single whitespace byte that ends a header.
  std::size_t body_start() {
    if (pos_ >= bytes_.size()) throw ParseError(where_ + ": missing image body");
    return pos_ + 1;
  }

 private:
  const std::vector<unsigned char>& bytes_;
  std::string where_;
  std::size_t pos_ = 0;
};

void check_body(std::size_t have, std::size_t need, std::size_t offset, const std::string& where) {
  if (have < offset + need) {
    throw ParseError(where + ": truncated body: need " + std::to_string(need) + " bytes from byte " +
                     std::to_string(offset) + ", file has " + std::to_string(have));
  }
}

}  // namespace

void write_pfm(const DepthMap& depth, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "Pf\n" << depth.width << ' ' << depth.height << "\n-1.0\n";
  for (int y = depth.height - 1; y >= 0; --y) {
    for (int x = 0; x < depth.width; ++x) {
      const double d = depth.at(x, y);
      float f = std::isfinite(d) ? static_cast<float>(d) : kPfmNoSurface;
      std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      out.write(reinterpret_cast<const char*>(&bits), 4);
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

DepthMap read_pfm(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const std::string where = path.string();
  HeaderReader h(bytes, where);
  if (h.token() != "Pf") throw ParseError(where + ": not a single-channel PFM (expected 'Pf')");
  const int w = h.positive_int();
  const int ht = h.positive_int();
  const auto scale_tok = h.token();
  double scale = 0.0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw ParseError(where + ": bad PFM scale '" + scale_tok + "'");
  }
  if (scale == 0.0) throw ParseError(where + ": PFM scale must be nonzero");
  const bool little = scale < 0.0;
  const auto body = h.body_start();
  check_body(bytes.size(), static_cast<std::size_t>(w) * ht * 4, body, where);
  DepthMap depth(w, ht);
  std::size_t pos = body;
  for (int y = ht - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      std::uint32_t bits;
      std::memcpy(&bits, &bytes[pos], 4);
      pos += 4;
      if ((std::endian::native == std::endian::little) != little) bits = __builtin_bswap32(bits);
      const float f = std::bit_cast<float>(bits);
      if (!(f == f)) throw ParseError(where + ": NaN depth at byte " + std::to_string(pos - 4));
      depth.at(x, y) = f >= kPfmNoSurface ? kNoSurface : static_cast<double>(f);
    }
  }
  return depth;
}

void write_ppm(const RgbImage& image, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  for (const auto& p : image.pixels) {
    const char px[3] = {static_cast<char>(p.r), static_cast<char>(p.g), static_cast<char>(p.b)};
    out.write(px, 3);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

RgbImage read_ppm(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const std::string where = path.string();
  HeaderReader h(bytes, where);
  if (h.token() != "P6") throw ParseError(where + ": not a binary PPM (expected 'P6')");
  const int w = h.positive_int();
  const int ht = h.positive_int();
  if (h.positive_int() != 255) throw ParseError(where + ": only maxval 255 is supported");
  const auto body = h.body_start();
  check_body(bytes.size(), static_cast<std::size_t>(w) * ht * 3, body, where);
  RgbImage img(w, ht);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = {bytes[body + 3 * i], bytes[body + 3 * i + 1], bytes[body + 3 * i + 2]};
  }
  return img;
}

void write_label_pgm(const LabelMask& mask, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
  for (const auto l : mask.pixels) out.put(static_cast<char>(l));
  if (!out) throw IoError("write failed for " + path.string());
}

LabelMask read_label_pgm(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const std::string where = path.string();
  HeaderReader h(bytes, where);
  if (h.token() != "P5") throw ParseError(where + ": not a binary PGM (expected 'P5')");
  const int w = h.positive_int();
  const int ht = h.positive_int();
  if (h.positive_int() != 255) throw ParseError(where + ": only maxval 255 is supported");
  const auto body = h.body_start();
  check_body(bytes.size(), static_cast<std::size_t>(w) * ht, body, where);
  LabelMask mask(w, ht);
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
    const auto l = label_from_code(bytes[body + i]);
    if (!l) {
      throw ParseError(where + ": invalid label code " + std::to_string(bytes[body + i]) + " at byte " +
                       std::to_string(body + i));
    }
    mask.pixels[i] = *l;
  }
  return mask;
}

}  // namespace groundseg
