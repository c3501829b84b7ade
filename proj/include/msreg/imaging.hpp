#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "msreg/core.hpp"

namespace msreg {

/// Interleaved 8-bit RGB raster, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h);

  std::uint8_t* pixel(int x, int y) { return &data[3 * (static_cast<std::size_t>(y) * width + x)]; }
  const std::uint8_t* pixel(int x, int y) const {
    return &data[3 * (static_cast<std::size_t>(y) * width + x)];
  }
  Rgb8 rgb(int x, int y) const {
    const auto* p = pixel(x, y);
    return {p[0], p[1], p[2]};
  }

  /// Throws unless dimensions are positive and data has width*height*3 bytes.
  void validate() const;

  bool operator==(const RgbImage&) const = default;
};

/// Single-channel 8-bit raster; rows index y.
using GrayImage = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-pixel subpixel disparity. Invalid pixels hold a quiet NaN, which no
/// finite disparity can collide with.
class DisparityMap {
 public:
  using Storage = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  static constexpr double kInvalid = std::numeric_limits<double>::quiet_NaN();
  static bool is_invalid(double v) { return std::isnan(v); }

  DisparityMap() = default;
  /// All pixels start invalid.
  DisparityMap(int width, int height);

  int width() const { return static_cast<int>(values_.cols()); }
  int height() const { return static_cast<int>(values_.rows()); }

  double operator()(int x, int y) const { return values_(y, x); }
  double& operator()(int x, int y) { return values_(y, x); }
  bool valid(int x, int y) const { return !is_invalid(values_(y, x)); }
  void invalidate(int x, int y) { values_(y, x) = kInvalid; }

  const Storage& values() const { return values_; }
  Storage& values() { return values_; }

  std::size_t valid_count() const;

 private:
  Storage values_;
};

/// luma = round(0.299 R + 0.587 G + 0.114 B)
GrayImage to_grayscale(const RgbImage& img);

/// Replaces each valid pixel by the median of the valid pixels in a
/// window x window neighbourhood. Invalid pixels stay invalid.
DisparityMap median_filter_disparity(const DisparityMap& d, int window);

}  // namespace msreg

namespace msreg {

/// Per-pixel class ids in [0, class_count). Class 0 is the undefined class.
struct LabelMask {
  GrayImage classes;
  int class_count = 0;

  int width() const { return static_cast<int>(classes.cols()); }
  int height() const { return static_cast<int>(classes.rows()); }
  std::uint8_t operator()(int x, int y) const { return classes(y, x); }

  /// Throws if any id is >= class_count.
  void validate() const;
};

}  // namespace msreg
