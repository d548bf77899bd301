#pragma once

// Grayscale image files: PGM (P2 ASCII, P5 binary) and PNG (8/16-bit gray).
// Reading maps a stored sample p to p / maxval. Writing clamps to [0, 1] and
// stores round(v * maxval) with round-half-away-from-zero (std::lround).

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "p2s/error.hpp"
#include "p2s/image.hpp"

namespace p2s {

enum class BitDepth { eight = 8, sixteen = 16 };

inline std::uint32_t max_value(BitDepth depth) { return depth == BitDepth::eight ? 255u : 65535u; }

inline std::uint32_t quantize(double v, BitDepth depth) {
  const double clamped = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint32_t>(std::lround(clamped * max_value(depth)));
}

namespace detail {

inline std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_failure, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_all(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io_failure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::io_failure, "write failed for " + path.string());
}

inline bool has_png_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext == ".png";
}

// Header tokenizer for PGM: whitespace separated, '#' starts a comment to end of line.
class PgmCursor {
 public:
  explicit PgmCursor(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  std::uint64_t next_uint(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_]))
      fail(Errc::corrupt_header, std::string("expected integer for ") + what);
    std::uint64_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 0xFFFFFFFFull) fail(Errc::corrupt_header, std::string("value too large for ") + what);
      ++pos_;
    }
    return value;
  }

  // Exactly one whitespace byte separates the header from P5 raster data.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      fail(Errc::corrupt_header, "missing whitespace after maxval");
    return pos_ + 1;
  }

  bool at_end() {
    skip_space_and_comments();
    return pos_ >= bytes_.size();
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 2;
};

// With `raw` set, samples are returned as integers instead of divided by maxval.
inline ImageGrid decode_pgm(const std::vector<unsigned char>& bytes, bool raw = false) {
  const bool ascii = bytes[1] == '2';
  PgmCursor cursor(bytes);
  const auto width = cursor.next_uint("width");
  const auto height = cursor.next_uint("height");
  const auto maxval = cursor.next_uint("maxval");
  if (width == 0 || height == 0) fail(Errc::corrupt_header, "zero image dimension");
  if (maxval == 0 || maxval > 65535) fail(Errc::corrupt_header, "maxval out of range");
  const std::size_t count = width * height;
  std::vector<double> data;
  data.reserve(count);
  const double scale = raw ? 1.0 : static_cast<double>(maxval);
  if (ascii) {
    for (std::size_t i = 0; i < count; ++i) {
      if (cursor.at_end())
        fail(Errc::dimension_mismatch, "P2 raster has " + std::to_string(i) + " of " + std::to_string(count) + " samples");
      const auto p = cursor.next_uint("sample");
      if (p > maxval) fail(Errc::corrupt_header, "sample exceeds maxval");
      data.push_back(static_cast<double>(p) / scale);
    }
    if (!cursor.at_end()) fail(Errc::dimension_mismatch, "P2 raster has trailing samples");
  } else {
    const std::size_t start = cursor.raster_start();
    const std::size_t bps = maxval < 256 ? 1 : 2;
    if (bytes.size() - start != count * bps)
      fail(Errc::dimension_mismatch, "P5 raster has " + std::to_string(bytes.size() - start) + " bytes, expected " +
                                         std::to_string(count * bps));
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t p = bytes[start + i * bps];
      if (bps == 2) p = (p << 8) | bytes[start + i * bps + 1];
      if (p > maxval) fail(Errc::corrupt_header, "sample exceeds maxval");
      data.push_back(static_cast<double>(p) / scale);
    }
  }
  return ImageGrid(height, width, std::move(data));
}

inline std::vector<unsigned char> encode_pgm(const ImageGrid& img, BitDepth depth) {
  std::ostringstream header;
  header << "P5\n" << img.width() << ' ' << img.height() << '\n' << max_value(depth) << '\n';
  const std::string h = header.str();
  std::vector<unsigned char> out(h.begin(), h.end());
  for (double v : img.data()) {
    const auto q = quantize(v, depth);
    if (depth == BitDepth::sixteen) out.push_back(static_cast<unsigned char>(q >> 8));
    out.push_back(static_cast<unsigned char>(q & 0xFF));
  }
  return out;
}

struct PngReadBuffer {
  const std::vector<unsigned char>* bytes;
  std::size_t offset;
};

inline void png_error_fn(png_structp png, png_const_charp msg) {
  auto* message = static_cast<std::string*>(png_get_error_ptr(png));
  if (message) *message = msg;
  png_longjmp(png, 1);
}

inline void png_warning_fn(png_structp, png_const_charp) {}

// libpng reports errors through longjmp; nothing with a non-trivial destructor
// may be created between setjmp and the last libpng call in these functions.
inline ImageGrid decode_png(const std::vector<unsigned char>& bytes) {
  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
  if (!png) fail(Errc::io_failure, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(Errc::io_failure, "png_create_info_struct failed");
  }
  PngReadBuffer src{&bytes, 0};
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
  std::vector<unsigned char> raster;
  std::vector<png_bytep> rows;
  volatile bool unsupported = false;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Errc::corrupt_header, "png decode failed: " + message);
  }
  png_set_read_fn(png, &src, [](png_structp p, png_bytep out, png_size_t n) {
    auto* s = static_cast<PngReadBuffer*>(png_get_io_ptr(p));
    if (s->offset + n > s->bytes->size()) png_error(p, "truncated stream");
    std::copy_n(s->bytes->data() + s->offset, n, out);
    s->offset += n;
  });
  png_read_info(png, info);
  png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);
  if (color_type != PNG_COLOR_TYPE_GRAY || (bit_depth != 8 && bit_depth != 16)) {
    unsupported = true;
  } else {
    const std::size_t stride = static_cast<std::size_t>(width) * (bit_depth / 8);
    raster.resize(stride * height);
    rows.resize(height);
    for (png_uint_32 r = 0; r < height; ++r) rows[r] = raster.data() + r * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (unsupported)
    fail(Errc::unsupported_format, "only 8/16-bit grayscale PNG is supported (color type " +
                                       std::to_string(color_type) + ", depth " + std::to_string(bit_depth) + ")");
  const double scale = bit_depth == 8 ? 255.0 : 65535.0;
  std::vector<double> data(static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::uint32_t p = bit_depth == 8 ? raster[i] : (std::uint32_t(raster[2 * i]) << 8) | raster[2 * i + 1];
    data[i] = p / scale;
  }
  return ImageGrid(height, width, std::move(data));
}

inline std::vector<unsigned char> encode_png(const ImageGrid& img, BitDepth depth) {
  const int bits = static_cast<int>(depth);
  const std::size_t stride = img.width() * (bits / 8);
  std::vector<unsigned char> raster(stride * img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const auto q = quantize(img.data()[i], depth);
    if (depth == BitDepth::eight) {
      raster[i] = static_cast<unsigned char>(q);
    } else {
      raster[2 * i] = static_cast<unsigned char>(q >> 8);
      raster[2 * i + 1] = static_cast<unsigned char>(q & 0xFF);
    }
  }
  std::vector<png_bytep> rows(img.height());
  for (std::size_t r = 0; r < img.height(); ++r) rows[r] = raster.data() + r * stride;

  std::string message;
  std::vector<unsigned char> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
  if (!png) fail(Errc::io_failure, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(Errc::io_failure, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(Errc::io_failure, "png encode failed: " + message);
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        auto* sink = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(p));
        sink->insert(sink->end(), data, data + n);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), bits,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace detail

/// Loads a PGM (P2/P5) or grayscale PNG; the format is detected from the magic bytes.
inline ImageGrid load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(Errc::io_failure, "no such file: " + path.string());
  const auto bytes = detail::read_all(path);
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return detail::decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '2' || bytes[1] == '5')) return detail::decode_pgm(bytes);
  fail(Errc::unsupported_format, path.string() + " is neither PGM (P2/P5) nor PNG");
}

/// Encodes to bytes; `.png` selects PNG, anything else writes binary PGM (P5).
inline std::vector<unsigned char> encode_image(const ImageGrid& img, const std::filesystem::path& path,
                                               BitDepth depth) {
  return detail::has_png_extension(path) ? detail::encode_png(img, depth) : detail::encode_pgm(img, depth);
}

inline void save_image(const ImageGrid& img, const std::filesystem::path& path, BitDepth depth = BitDepth::eight) {
  detail::write_all(path, encode_image(img, path, depth));
}

/// Photon-count image: binary 16-bit PGM whose samples are the integer counts
/// z = lambda * y of a noisy image. Unlike intensity images this keeps values
/// above 1 and is lossless for any y produced by make_noisy.
inline void save_counts(const ImageGrid& noisy, double lambda, const std::filesystem::path& path) {
  require(lambda > 0.0 && std::isfinite(lambda), Errc::invalid_argument, "lambda must be positive and finite");
  std::ostringstream header;
  header << "P5\n" << noisy.width() << ' ' << noisy.height() << "\n65535\n";
  const std::string h = header.str();
  std::vector<unsigned char> out(h.begin(), h.end());
  for (double v : noisy.data()) {
    const double z = std::round(v * lambda);
    require(z >= 0.0 && z <= 65535.0, Errc::invalid_argument, "count out of 16-bit range: " + std::to_string(z));
    const auto q = static_cast<std::uint32_t>(z);
    out.push_back(static_cast<unsigned char>(q >> 8));
    out.push_back(static_cast<unsigned char>(q & 0xFF));
  }
  detail::write_all(path, out);
}

/// Reads a photon-count PGM and returns y = z / lambda.
inline ImageGrid load_counts(const std::filesystem::path& path, double lambda) {
  require(lambda > 0.0 && std::isfinite(lambda), Errc::invalid_argument, "lambda must be positive and finite");
  if (!std::filesystem::exists(path)) fail(Errc::io_failure, "no such file: " + path.string());
  const auto bytes = detail::read_all(path);
  if (!(bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '2' || bytes[1] == '5')))
    fail(Errc::unsupported_format, path.string() + ": count images must be PGM");
  ImageGrid z = detail::decode_pgm(bytes, true);
  std::vector<double> y(z.data().begin(), z.data().end());
  for (auto& v : y) v /= lambda;
  return ImageGrid(z.height(), z.width(), std::move(y));
}

inline BitDepth bit_depth_from_int(int bits) {
  if (bits == 8) return BitDepth::eight;
  if (bits == 16) return BitDepth::sixteen;
  fail(Errc::invalid_argument, "bit depth must be 8 or 16, got " + std::to_string(bits));
}

}  // namespace p2s
