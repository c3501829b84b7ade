#include "msreg/sgbm.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <string>

namespace msreg {

void SgbmParams::validate() const {
  if (disparity_range <= 0) {
    throw Error(ErrorKind::InvalidArgument, "disparity_range must be positive");
  }
  if (census_window < 3 || census_window % 2 == 0) {
    throw Error(ErrorKind::InvalidArgument, "census_window must be odd and >= 3");
  }
  if (census_window > 7) {
    throw Error(ErrorKind::InvalidArgument, "census_window above 7 does not fit a 64-bit census");
  }
  if (penalty_small <= 0 || penalty_large <= penalty_small) {
    throw Error(ErrorKind::InvalidArgument, "penalties must satisfy P2 > P1 > 0");
  }
  if (penalty_large > 4000) {
    throw Error(ErrorKind::InvalidArgument, "P2 too large for 16-bit aggregation");
  }
  if (path_count != 4 && path_count != 8) {
    throw Error(ErrorKind::InvalidArgument, "path_count must be 4 or 8");
  }
  if (uniqueness_ratio < 0 || uniqueness_ratio >= 100) {
    throw Error(ErrorKind::InvalidArgument, "uniqueness_ratio must lie in [0, 100)");
  }
  if (!(lr_consistency_threshold >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "lr_consistency_threshold must be non-negative");
  }
}

namespace {

std::vector<std::uint64_t> census_transform(const GrayImage& img, int window) {
  const int w = static_cast<int>(img.cols());
  const int h = static_cast<int>(img.rows());
  const int r = window / 2;
  std::vector<std::uint64_t> out(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t center = img(y, x);
      std::uint64_t bits = 0;
      for (int v = -r; v <= r; ++v) {
        const int yy = std::clamp(y + v, 0, h - 1);
        for (int u = -r; u <= r; ++u) {
          if (u == 0 && v == 0) continue;
          const int xx = std::clamp(x + u, 0, w - 1);
          bits = (bits << 1) | (img(yy, xx) < center ? 1u : 0u);
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = bits;
    }
  }
  return out;
}

// Lr(p,d) = C(p,d) + min(Lr(p-r,d), Lr(p-r,d+-1) + P1, min_k Lr(p-r,k) + P2) - min_k Lr(p-r,k)
inline std::uint16_t path_step(const std::uint8_t* cost, const std::uint16_t* prev,
                               std::uint16_t prev_min, std::uint16_t* cur,
                               std::uint16_t* sum, int n_disp, int p1, int p2) {
  int cur_min = 0xFFFF;
  const int jump = prev_min + p2;
  for (int d = 0; d < n_disp; ++d) {
    int best = prev[d];
    if (d > 0) best = std::min(best, prev[d - 1] + p1);
    if (d + 1 < n_disp) best = std::min(best, prev[d + 1] + p1);
    best = std::min(best, jump);
    const int value = cost[d] + best - prev_min;
    cur[d] = static_cast<std::uint16_t>(value);
    sum[d] = static_cast<std::uint16_t>(sum[d] + value);
    cur_min = std::min(cur_min, value);
  }
  return static_cast<std::uint16_t>(cur_min);
}

inline std::uint16_t path_start(const std::uint8_t* cost, std::uint16_t* cur, std::uint16_t* sum,
                                int n_disp) {
  int cur_min = 0xFFFF;
  for (int d = 0; d < n_disp; ++d) {
    cur[d] = cost[d];
    sum[d] = static_cast<std::uint16_t>(sum[d] + cost[d]);
    cur_min = std::min<int>(cur_min, cost[d]);
  }
  return static_cast<std::uint16_t>(cur_min);
}

void aggregate_path(const std::vector<std::uint8_t>& cost, std::vector<std::uint16_t>& sum, int w,
                    int h, int n_disp, int dx, int dy, int p1, int p2) {
  const auto idx = [&](int x, int y) {
    return (static_cast<std::size_t>(y) * w + x) * static_cast<std::size_t>(n_disp);
  };
  if (dy == 0) {
    std::vector<std::uint16_t> a(n_disp), b(n_disp);
    for (int y = 0; y < h; ++y) {
      const int x0 = dx > 0 ? 0 : w - 1;
      std::uint16_t* prev = a.data();
      std::uint16_t* cur = b.data();
      std::uint16_t prev_min = path_start(&cost[idx(x0, y)], prev, &sum[idx(x0, y)], n_disp);
      for (int x = x0 + dx; x >= 0 && x < w; x += dx) {
        prev_min = path_step(&cost[idx(x, y)], prev, prev_min, cur, &sum[idx(x, y)], n_disp, p1, p2);
        std::swap(prev, cur);
      }
    }
    return;
  }
  std::vector<std::uint16_t> prev_row(static_cast<std::size_t>(w) * n_disp);
  std::vector<std::uint16_t> cur_row(prev_row.size());
  std::vector<std::uint16_t> prev_min(w), cur_min(w);
  const int y0 = dy > 0 ? 0 : h - 1;
  for (int y = y0; y >= 0 && y < h; y += dy) {
    for (int x = 0; x < w; ++x) {
      const int px = x - dx;
      std::uint16_t* cur = &cur_row[static_cast<std::size_t>(x) * n_disp];
      if (y == y0 || px < 0 || px >= w) {
        cur_min[x] = path_start(&cost[idx(x, y)], cur, &sum[idx(x, y)], n_disp);
      } else {
        cur_min[x] = path_step(&cost[idx(x, y)], &prev_row[static_cast<std::size_t>(px) * n_disp],
                               prev_min[px], cur, &sum[idx(x, y)], n_disp, p1, p2);
      }
    }
    std::swap(prev_row, cur_row);
    std::swap(prev_min, cur_min);
  }
}

}  // namespace

DisparityMap compute_disparity(const GrayImage& left, const GrayImage& right,
                               const SgbmParams& params) {
  params.validate();
  if (left.rows() != right.rows() || left.cols() != right.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "left and right images differ in size");
  }
  const int w = static_cast<int>(left.cols());
  const int h = static_cast<int>(left.rows());
  if (w <= 0 || h <= 0) {
    throw Error(ErrorKind::InvalidArgument, "empty input images");
  }
  if (params.disparity_range > w) {
    throw Error(ErrorKind::InvalidArgument, "disparity_range " +
                                                std::to_string(params.disparity_range) +
                                                " exceeds image width " + std::to_string(w));
  }
  const int n_disp = params.disparity_range;
  const int d0 = params.min_disparity;
  const int n_bits = params.census_window * params.census_window - 1;

  const auto census_l = census_transform(left, params.census_window);
  const auto census_r = census_transform(right, params.census_window);

  const std::size_t volume = static_cast<std::size_t>(w) * h * n_disp;
  std::vector<std::uint8_t> cost(volume);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint64_t cl = census_l[static_cast<std::size_t>(y) * w + x];
      std::uint8_t* c = &cost[(static_cast<std::size_t>(y) * w + x) * n_disp];
      for (int d = 0; d < n_disp; ++d) {
        const int xr = x - (d0 + d);
        c[d] = (xr < 0 || xr >= w)
                   ? static_cast<std::uint8_t>(n_bits)
                   : static_cast<std::uint8_t>(
                         std::popcount(cl ^ census_r[static_cast<std::size_t>(y) * w + xr]));
      }
    }
  }

  std::vector<std::uint16_t> sum(volume, 0);
  static constexpr int kDirs[8][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1},
                                      {1, 1}, {-1, 1}, {1, -1}, {-1, -1}};
  for (int k = 0; k < params.path_count; ++k) {
    aggregate_path(cost, sum, w, h, n_disp, kDirs[k][0], kDirs[k][1], params.penalty_small,
                   params.penalty_large);
  }
  cost.clear();
  cost.shrink_to_fit();

  const auto aggregated = [&](int x, int y, int d) {
    return sum[(static_cast<std::size_t>(y) * w + x) * n_disp + d];
  };
  const auto in_image = [&](int x, int d) {
    const int xr = x - (d0 + d);
    return xr >= 0 && xr < w;
  };

  // Right-view winner for each right pixel, read diagonally from the left volume.
  std::vector<int> right_best(static_cast<std::size_t>(w) * h, -1);
  for (int y = 0; y < h; ++y) {
    for (int xr = 0; xr < w; ++xr) {
      int best = -1;
      int best_cost = 0;
      for (int d = 0; d < n_disp; ++d) {
        const int x = xr + d0 + d;
        if (x < 0 || x >= w) continue;
        const int c = aggregated(x, y, d);
        if (best < 0 || c < best_cost) {
          best = d;
          best_cost = c;
        }
      }
      right_best[static_cast<std::size_t>(y) * w + xr] = best;
    }
  }

  DisparityMap out(w, h);
  const int uniq = params.uniqueness_ratio;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int best = -1;
      int best_cost = 0;
      for (int d = 0; d < n_disp; ++d) {
        if (!in_image(x, d)) continue;
        const int c = aggregated(x, y, d);
        if (best < 0 || c < best_cost) {
          best = d;
          best_cost = c;
        }
      }
      if (best < 0) continue;

      bool unique = true;
      for (int d = 0; d < n_disp && unique; ++d) {
        if (std::abs(d - best) <= 1 || !in_image(x, d)) continue;
        if (static_cast<long>(aggregated(x, y, d)) * (100 - uniq) <
            static_cast<long>(best_cost) * 100) {
          unique = false;
        }
      }
      if (!unique) continue;

      double disparity = d0 + best;
      if (best > 0 && best + 1 < n_disp && in_image(x, best - 1) && in_image(x, best + 1)) {
        const double cm = aggregated(x, y, best - 1);
        const double cp = aggregated(x, y, best + 1);
        const double denom = cm + cp - 2.0 * best_cost;
        if (denom > 0.0) {
          disparity += std::clamp((cm - cp) / (2.0 * denom), -0.5, 0.5);
        }
      }

      const int xr = x - (d0 + best);
      const int rb = right_best[static_cast<std::size_t>(y) * w + xr];
      if (rb < 0 || std::abs(disparity - (d0 + rb)) > params.lr_consistency_threshold) continue;
      out(x, y) = disparity;
    }
  }
  return out;
}

}  // namespace msreg
