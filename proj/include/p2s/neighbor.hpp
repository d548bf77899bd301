#pragma once

// Random neighbor downsampling. The image (cropped to even size) is split into
// 2x2 blocks; in each block one of the eight ordered pairs of 4-adjacent pixels
// is chosen uniformly. g1 takes the first pixel of the pair, g2 the second.

#include <array>
#include <cstdint>
#include <vector>

#include "p2s/error.hpp"
#include "p2s/image.hpp"
#include "p2s/rng.hpp"
#include "p2s/tensor.hpp"

namespace p2s {

struct BlockOffset {
  std::uint8_t row;
  std::uint8_t col;
};

/// Ordered 4-adjacent pairs within a block [[a, b], [c, d]]:
/// (a,b) (b,a) (a,c) (c,a) (b,d) (d,b) (c,d) (d,c).
inline constexpr std::array<std::array<BlockOffset, 2>, 8> kNeighborPairs = {{
    {{{0, 0}, {0, 1}}},
    {{{0, 1}, {0, 0}}},
    {{{0, 0}, {1, 0}}},
    {{{1, 0}, {0, 0}}},
    {{{0, 1}, {1, 1}}},
    {{{1, 1}, {0, 1}}},
    {{{1, 0}, {1, 1}}},
    {{{1, 1}, {1, 0}}},
}};

/// Per-block pair choice; applying it to any image of the same (even-cropped) size is deterministic.
struct SelectionMap {
  std::size_t block_rows = 0;
  std::size_t block_cols = 0;
  std::vector<std::uint8_t> choice;  // index into kNeighborPairs, row-major over blocks

  friend bool operator==(const SelectionMap&, const SelectionMap&) = default;
};

struct SubsamplePair {
  ImageGrid g1;
  ImageGrid g2;
  SelectionMap selection;

  friend bool operator==(const SubsamplePair&, const SubsamplePair&) = default;
};

namespace detail {

inline void check_selection_fits(const SelectionMap& sel, std::size_t height, std::size_t width) {
  require(height / 2 == sel.block_rows && width / 2 == sel.block_cols, Errc::dimension_mismatch,
          "selection map is " + std::to_string(sel.block_rows) + "x" + std::to_string(sel.block_cols) +
              " blocks but image is " + std::to_string(height) + "x" + std::to_string(width));
}

inline std::vector<double> gather(const SelectionMap& sel, const double* src, std::size_t width, int which) {
  std::vector<double> out(sel.block_rows * sel.block_cols);
  for (std::size_t br = 0; br < sel.block_rows; ++br)
    for (std::size_t bc = 0; bc < sel.block_cols; ++bc) {
      const auto off = kNeighborPairs[sel.choice[br * sel.block_cols + bc]][which];
      out[br * sel.block_cols + bc] = src[(2 * br + off.row) * width + 2 * bc + off.col];
    }
  return out;
}

}  // namespace detail

/// g1 (which = 0) or g2 (which = 1) of an image. Odd trailing rows/columns are ignored.
inline ImageGrid apply_selection(const SelectionMap& sel, const ImageGrid& img, int which) {
  detail::check_selection_fits(sel, img.height(), img.width());
  return ImageGrid(sel.block_rows, sel.block_cols, detail::gather(sel, img.data().data(), img.width(), which));
}

inline Tensor apply_selection(const SelectionMap& sel, const Tensor& t, int which) {
  require(t.shape().channels == 1, Errc::shape_mismatch, "selection applies to single-channel tensors");
  detail::check_selection_fits(sel, t.shape().height, t.shape().width);
  return Tensor({1, sel.block_rows, sel.block_cols}, detail::gather(sel, t.data(), t.shape().width, which));
}

inline SelectionMap random_selection(std::size_t block_rows, std::size_t block_cols, Xoshiro256& rng) {
  SelectionMap sel{block_rows, block_cols, std::vector<std::uint8_t>(block_rows * block_cols)};
  for (auto& c : sel.choice) c = static_cast<std::uint8_t>(rng.top_bits(3));
  return sel;
}

inline SubsamplePair neighbor_downsample(const ImageGrid& img, Xoshiro256& rng) {
  require(img.height() >= 2 && img.width() >= 2, Errc::dimension_mismatch,
          "neighbor downsampling needs at least a 2x2 image");
  auto sel = random_selection(img.height() / 2, img.width() / 2, rng);
  auto g1 = apply_selection(sel, img, 0);
  auto g2 = apply_selection(sel, img, 1);
  return {std::move(g1), std::move(g2), std::move(sel)};
}

}  // namespace p2s
