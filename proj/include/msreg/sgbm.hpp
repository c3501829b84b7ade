#pragma once

#include "msreg/imaging.hpp"

namespace msreg {

/// Semi-global matching parameters. Costs are census Hamming distances, so
/// the penalties are in census-bit units.
struct SgbmParams {
  int min_disparity = 0;
  int disparity_range = 64;
  int census_window = 5;
  int penalty_small = 8;    // P1, |delta d| == 1
  int penalty_large = 32;   // P2, |delta d| > 1
  int path_count = 8;       // 4 or 8
  int uniqueness_ratio = 10;  // percent
  double lr_consistency_threshold = 1.0;

  void validate() const;
};

/// Census/Hamming semi-global matching on a rectified pair. Left pixel x
/// matches right pixel x - d. Pixels failing the uniqueness or left-right
/// test are invalid. Deterministic.
DisparityMap compute_disparity(const GrayImage& left, const GrayImage& right,
                               const SgbmParams& params);

}  // namespace msreg
