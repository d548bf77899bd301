#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "p2s/error.hpp"
#include "p2s/image.hpp"

namespace p2s {

struct Shape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t plane() const noexcept { return height * width; }
  std::size_t numel() const noexcept { return channels * height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.channels) + "," + std::to_string(s.height) + "," + std::to_string(s.width) + ")";
}

/// Dense (channels, height, width) array of doubles, row-major within each channel.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    require(data_.size() == shape_.numel(), Errc::shape_mismatch,
            "tensor data length does not match shape " + to_string(shape_));
  }

  static Tensor from_image(const ImageGrid& img) { return Tensor({1, img.height(), img.width()}, img.values()); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double* channel(std::size_t c) noexcept { return data_.data() + c * shape_.plane(); }
  const double* channel(std::size_t c) const noexcept { return data_.data() + c * shape_.plane(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& at(std::size_t c, std::size_t r, std::size_t col) noexcept {
    return data_[(c * shape_.height + r) * shape_.width + col];
  }
  double at(std::size_t c, std::size_t r, std::size_t col) const noexcept {
    return data_[(c * shape_.height + r) * shape_.width + col];
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const noexcept {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  ImageGrid to_image() const {
    require(shape_.channels == 1, Errc::shape_mismatch, "only single-channel tensors convert to images");
    return ImageGrid(shape_.height, shape_.width, data_);
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_{};
  std::vector<double> data_;
};

inline double dot(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), Errc::shape_mismatch, "dot: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), Errc::shape_mismatch, "max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace p2s
