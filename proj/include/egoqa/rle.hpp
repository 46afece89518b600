#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "egoqa/error.hpp"

namespace egoqa {

// Dense binary mask, row-major storage. Mostly a test/fixture convenience;
// pipeline state stays run-length encoded.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // height*width, row-major, 0/1

  BinaryMask() = default;
  BinaryMask(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
  std::uint8_t at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }
};

// Run-length encoded binary mask. Runs traverse the image column-major
// (down column 0, then column 1, ...) and alternate background/foreground
// starting with background, so `counts` always begins with the number of
// leading background pixels (possibly 0).
//
// Invariant: sum(counts) == height * width.
struct Rle {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  std::int64_t pixel_count() const { return static_cast<std::int64_t>(height) * width; }
  bool empty_mask() const;  // no foreground pixel
  bool same_size(const Rle& other) const { return height == other.height && width == other.width; }
};

namespace rle {

// Encode a dense mask; any nonzero byte is foreground.
Rle encode(const BinaryMask& mask);

BinaryMask decode(const Rle& rle);

// Foreground pixel count.
std::int64_t area(const Rle& rle);

// |a AND b| and |a OR b| by merging run boundaries; no decode.
std::int64_t intersection_area(const Rle& a, const Rle& b);
std::int64_t union_area(const Rle& a, const Rle& b);

// Space-separated decimal run lengths, e.g. "6 2 4 2 2". Parsing validates
// the size invariant.
std::string to_string(const Rle& rle);
Rle from_string(int height, int width, const std::string& counts);

// Tight bounding box of the foreground: {col_min, row_min, col_max, row_max},
// inclusive. Returns false when the mask is empty.
bool bounding_box(const Rle& rle, int box[4]);

// Foreground centroid in pixel units (col, row). Returns false when empty.
bool centroid(const Rle& rle, double& col, double& row);

// Full-frame background mask of the given size.
Rle empty(int height, int width);

}  // namespace rle

// Intersection-over-union. Defined as 0 when both masks are empty: an empty
// detection must never count as a perfect match.
// Throws Errc::size_mismatch when dimensions differ.
double mask_iou(const Rle& a, const Rle& b);

}  // namespace egoqa
