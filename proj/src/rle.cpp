#include "egoqa/rle.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <sstream>

namespace egoqa {

bool Rle::empty_mask() const { return rle::area(*this) == 0; }

namespace rle {

Rle encode(const BinaryMask& mask) {
  Rle out;
  out.height = mask.height;
  out.width = mask.width;
  const std::int64_t n = out.pixel_count();
  std::uint8_t current = 0;  // runs start with background
  std::uint32_t run = 0;
  for (std::int64_t p = 0; p < n; ++p) {
    const int col = static_cast<int>(p / mask.height);
    const int row = static_cast<int>(p % mask.height);
    const std::uint8_t v = mask.at(row, col) ? 1 : 0;
    if (v == current) {
      ++run;
    } else {
      out.counts.push_back(run);
      current = v;
      run = 1;
    }
  }
  out.counts.push_back(run);
  if (n == 0) out.counts.clear();
  return out;
}

BinaryMask decode(const Rle& rle) {
  BinaryMask mask(rle.height, rle.width);
  std::int64_t p = 0;
  std::uint8_t value = 0;
  for (std::uint32_t run : rle.counts) {
    if (value) {
      for (std::uint32_t k = 0; k < run; ++k) {
        const std::int64_t q = p + k;
        mask.at(static_cast<int>(q % rle.height), static_cast<int>(q / rle.height)) = 1;
      }
    }
    p += run;
    value ^= 1;
  }
  require(p == rle.pixel_count(), Errc::parse_error,
          "run lengths do not cover the mask area");
  return mask;
}

std::int64_t area(const Rle& rle) {
  std::int64_t total = 0;
  for (std::size_t i = 1; i < rle.counts.size(); i += 2) total += rle.counts[i];
  return total;
}

namespace {

// Walks both run sequences over the shared pixel axis and accumulates the
// chosen boolean combination per merged segment.
template <typename Combine>
std::int64_t merge_runs(const Rle& a, const Rle& b, Combine combine) {
  std::int64_t total = 0;
  std::size_t ia = 0, ib = 0;
  std::int64_t remaining_a = a.counts.empty() ? 0 : a.counts[0];
  std::int64_t remaining_b = b.counts.empty() ? 0 : b.counts[0];
  bool fg_a = false, fg_b = false;
  std::int64_t left = a.pixel_count();
  while (left > 0) {
    while (remaining_a == 0 && ia + 1 < a.counts.size()) {
      fg_a = !fg_a;
      remaining_a = a.counts[++ia];
    }
    while (remaining_b == 0 && ib + 1 < b.counts.size()) {
      fg_b = !fg_b;
      remaining_b = b.counts[++ib];
    }
    const std::int64_t step = std::min({remaining_a, remaining_b, left});
    if (combine(fg_a, fg_b)) total += step;
    remaining_a -= step;
    remaining_b -= step;
    left -= step;
  }
  return total;
}

}  // namespace

std::int64_t intersection_area(const Rle& a, const Rle& b) {
  return merge_runs(a, b, [](bool x, bool y) { return x && y; });
}

std::int64_t union_area(const Rle& a, const Rle& b) {
  return merge_runs(a, b, [](bool x, bool y) { return x || y; });
}

std::string to_string(const Rle& rle) {
  std::string out;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    if (i) out.push_back(' ');
    out += std::to_string(rle.counts[i]);
  }
  return out;
}

Rle from_string(int height, int width, const std::string& counts) {
  Rle out;
  out.height = height;
  out.width = width;
  const char* p = counts.data();
  const char* end = p + counts.size();
  std::int64_t sum = 0;
  while (p < end) {
    while (p < end && *p == ' ') ++p;
    if (p == end) break;
    std::uint32_t value = 0;
    auto [next, ec] = std::from_chars(p, end, value);
    require(ec == std::errc(), Errc::parse_error, "bad run length in RLE string");
    out.counts.push_back(value);
    sum += value;
    p = next;
  }
  require(sum == out.pixel_count(), Errc::parse_error,
          "RLE run lengths sum to " + std::to_string(sum) + ", expected " +
              std::to_string(out.pixel_count()));
  return out;
}

bool bounding_box(const Rle& rle, int box[4]) {
  int col_min = rle.width, row_min = rle.height, col_max = -1, row_max = -1;
  std::int64_t p = 0;
  bool fg = false;
  for (std::uint32_t run : rle.counts) {
    if (fg && run > 0) {
      const std::int64_t first = p, last = p + run - 1;
      col_min = std::min<int>(col_min, static_cast<int>(first / rle.height));
      col_max = std::max<int>(col_max, static_cast<int>(last / rle.height));
      // A run can span several columns; rows then cover the full column.
      if (first / rle.height != last / rle.height) {
        row_min = 0;
        row_max = rle.height - 1;
      } else {
        row_min = std::min<int>(row_min, static_cast<int>(first % rle.height));
        row_max = std::max<int>(row_max, static_cast<int>(last % rle.height));
      }
    }
    p += run;
    fg = !fg;
  }
  if (col_max < 0) return false;
  box[0] = col_min;
  box[1] = row_min;
  box[2] = col_max;
  box[3] = row_max;
  return true;
}

bool centroid(const Rle& rle, double& col, double& row) {
  std::int64_t count = 0;
  double sum_col = 0.0, sum_row = 0.0;
  std::int64_t p = 0;
  bool fg = false;
  const std::int64_t h = rle.height;
  for (std::uint32_t run : rle.counts) {
    if (fg) {
      for (std::uint32_t k = 0; k < run; ++k) {
        const std::int64_t q = p + k;
        sum_col += static_cast<double>(q / h);
        sum_row += static_cast<double>(q % h);
      }
      count += run;
    }
    p += run;
    fg = !fg;
  }
  if (count == 0) return false;
  col = sum_col / static_cast<double>(count);
  row = sum_row / static_cast<double>(count);
  return true;
}

Rle empty(int height, int width) {
  Rle out;
  out.height = height;
  out.width = width;
  if (height > 0 && width > 0) {
    out.counts.push_back(static_cast<std::uint32_t>(height) * static_cast<std::uint32_t>(width));
  }
  return out;
}

}  // namespace rle

double mask_iou(const Rle& a, const Rle& b) {
  require(a.same_size(b), Errc::size_mismatch,
          "mask sizes differ: " + std::to_string(a.height) + "x" + std::to_string(a.width) +
              " vs " + std::to_string(b.height) + "x" + std::to_string(b.width));
  const std::int64_t uni = rle::union_area(a, b);
  if (uni == 0) return 0.0;
  return static_cast<double>(rle::intersection_area(a, b)) / static_cast<double>(uni);
}

}  // namespace egoqa
