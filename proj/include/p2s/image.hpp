#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "p2s/error.hpp"

namespace p2s {

/// Single-channel 2-D intensity field, row-major. Values are finite and the
/// buffer length always equals height * width; the grid is immutable once built.
class ImageGrid {
 public:
  ImageGrid() = default;

  ImageGrid(std::size_t height, std::size_t width, std::vector<double> data)
      : height_(height), width_(width), data_(std::move(data)) {
    require(height_ > 0 && width_ > 0, Errc::invalid_argument, "image dimensions must be positive");
    require(data_.size() == height_ * width_, Errc::dimension_mismatch,
            "data length " + std::to_string(data_.size()) + " != " + std::to_string(height_) + "x" +
                std::to_string(width_));
    for (double v : data_) require(std::isfinite(v), Errc::numerical_error, "non-finite pixel value");
  }

  static ImageGrid filled(std::size_t height, std::size_t width, double value) {
    return ImageGrid(height, width, std::vector<double>(height * width, value));
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * width_ + c]; }

  double max() const { return *std::max_element(data_.begin(), data_.end()); }
  double min() const { return *std::min_element(data_.begin(), data_.end()); }

  bool same_shape(const ImageGrid& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

/// Divides by the image maximum so the largest value is exactly 1.
inline ImageGrid normalize(const ImageGrid& img) {
  require(!img.empty(), Errc::degenerate_input, "cannot normalize an empty image");
  const double peak = img.max();
  require(peak > 0.0, Errc::degenerate_input, "cannot normalize: max(image) <= 0");
  std::vector<double> out(img.values());
  for (double& v : out) v /= peak;
  return ImageGrid(img.height(), img.width(), std::move(out));
}

inline ImageGrid clamp01(const ImageGrid& img) {
  std::vector<double> out(img.values());
  for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  return ImageGrid(img.height(), img.width(), std::move(out));
}

/// Top-left crop to the given size.
inline ImageGrid crop(const ImageGrid& img, std::size_t height, std::size_t width) {
  require(height > 0 && width > 0 && height <= img.height() && width <= img.width(),
          Errc::dimension_mismatch, "crop larger than image");
  std::vector<double> out;
  out.reserve(height * width);
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c) out.push_back(img(r, c));
  return ImageGrid(height, width, std::move(out));
}

/// Drops the last row and/or column when the dimension is odd.
inline ImageGrid crop_to_even(const ImageGrid& img) {
  return crop(img, img.height() - img.height() % 2, img.width() - img.width() % 2);
}

}  // namespace p2s
