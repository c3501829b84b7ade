#include "msreg/imaging.hpp"

#include <algorithm>
#include <string>

namespace msreg {

RgbImage::RgbImage(int w, int h) : width(w), height(h) {
  if (w <= 0 || h <= 0) {
    throw Error(ErrorKind::InvalidArgument, "image dimensions must be positive");
  }
  data.assign(static_cast<std::size_t>(w) * h * 3, 0);
}

void RgbImage::validate() const {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorKind::InvalidArgument, "image dimensions must be positive");
  }
  if (data.size() != static_cast<std::size_t>(width) * height * 3) {
    throw Error(ErrorKind::InvalidArgument,
                "image buffer holds " + std::to_string(data.size()) + " bytes, expected " +
                    std::to_string(static_cast<std::size_t>(width) * height * 3));
  }
}

DisparityMap::DisparityMap(int width, int height) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorKind::InvalidArgument, "disparity map dimensions must be positive");
  }
  values_ = Storage::Constant(height, width, kInvalid);
}

std::size_t DisparityMap::valid_count() const {
  return static_cast<std::size_t>((values_ == values_).count());
}

GrayImage to_grayscale(const RgbImage& img) {
  img.validate();
  GrayImage out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const auto* p = img.pixel(x, y);
      const double luma = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
      out(y, x) = static_cast<std::uint8_t>(std::lround(luma));
    }
  }
  return out;
}

DisparityMap median_filter_disparity(const DisparityMap& d, int window) {
  if (window <= 0 || window % 2 == 0) {
    throw Error(ErrorKind::InvalidArgument, "median window must be a positive odd size");
  }
  const int r = window / 2;
  DisparityMap out = d;
  std::vector<double> support;
  support.reserve(static_cast<std::size_t>(window) * window);
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      if (!d.valid(x, y)) continue;
      support.clear();
      for (int v = std::max(0, y - r); v <= std::min(d.height() - 1, y + r); ++v) {
        for (int u = std::max(0, x - r); u <= std::min(d.width() - 1, x + r); ++u) {
          if (d.valid(u, v)) support.push_back(d(u, v));
        }
      }
      const std::size_t mid = support.size() / 2;
      std::nth_element(support.begin(), support.begin() + mid, support.end());
      double m = support[mid];
      if (support.size() % 2 == 0) {
        const double lower = *std::max_element(support.begin(), support.begin() + mid);
        m = 0.5 * (m + lower);
      }
      out(x, y) = m;
    }
  }
  return out;
}

}  // namespace msreg

namespace msreg {

void LabelMask::validate() const {
  if (class_count <= 0 || class_count > 255) {
    throw Error(ErrorKind::InvalidArgument, "label mask class_count must lie in [1, 255]");
  }
  if (classes.size() > 0 && classes.maxCoeff() >= class_count) {
    throw Error(ErrorKind::InvalidArgument,
                "label mask holds class id " + std::to_string(int(classes.maxCoeff())) +
                    " >= class_count " + std::to_string(class_count));
  }
}

}  // namespace msreg
