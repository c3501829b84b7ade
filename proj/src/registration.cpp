#include <chrono>
#include <cmath>
#include <limits>
#include <utility>

#include "msreg/registration.hpp"

namespace msreg {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::R: return "R";
    case Variant::RCs: return "RCs";
    case Variant::RCo: return "RCo";
    case Variant::RCsCo: return "RCsCo";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "R") return Variant::R;
  if (s == "RCs" || s == "R+Cs") return Variant::RCs;
  if (s == "RCo" || s == "R+Co") return Variant::RCo;
  if (s == "RCsCo" || s == "R+Cs+Co") return Variant::RCsCo;
  throw Error(ErrorKind::InvalidArgument, "unknown variant '" + s + "' (expected R, RCs, RCo or RCsCo)");
}

bool uses_constraint(Variant v) { return v == Variant::RCs || v == Variant::RCsCo; }
bool uses_colors(Variant v) { return v == Variant::RCo || v == Variant::RCsCo; }

namespace {

/// Runs `fn` as a named stage: records wall time and rethrows errors with
/// the stage name attached.
template <typename Fn>
auto run_stage(RegistrationDiagnostics& diag, const std::string& stage, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  auto finish = [&](std::size_t points) {
    const std::chrono::duration<double, std::milli> ms = std::chrono::steady_clock::now() - start;
    diag.stages.push_back({stage, ms.count(), points});
  };
  try {
    auto [value, points] = fn();
    finish(points);
    return std::move(value);
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.kind(), e.what());
  }
}

}  // namespace

RegistrationResult register_clouds(const LabeledCloud& cloud_a, const LabeledCloud& cloud_b,
                                   const RegistrationParams& params) {
  RegistrationResult result;
  RegistrationDiagnostics& diag = result.diagnostics;
  if (cloud_a.empty()) throw StageError("colorize_model", ErrorKind::Registration, "empty Cloud A");
  if (cloud_b.empty()) throw StageError("mask_cloud", ErrorKind::Registration, "empty Cloud B");
  cloud_a.validate();
  cloud_b.validate();
  params.ransac.validate();
  params.icp.validate();
  diag.cloud_a_points = cloud_a.size();
  diag.cloud_b_points = cloud_b.size();

  const bool colors = uses_colors(params.variant);
  const bool constraint = uses_constraint(params.variant);

  const double spacing = run_stage(diag, "median_spacing", [&] {
    return std::pair{median_spacing(cloud_a), cloud_a.size()};
  });
  const double voxel = params.coarse_factor * spacing;
  auto [normals_a, normals_b] = run_stage(diag, "estimate_normals", [&] {
    auto na = estimate_normals(voxel_downsample(cloud_a, voxel), params.normal_neighbors);
    auto nb = estimate_normals(voxel_downsample(cloud_b, voxel), params.normal_neighbors);
    const std::size_t n = na.size() + nb.size();
    return std::pair{std::pair{std::move(na), std::move(nb)}, n};
  });

  diag.inplane_angle = std::numeric_limits<double>::quiet_NaN();
  if (constraint) {
    diag.inplane_angle = run_stage(diag, "estimate_inplane_orientation", [&] {
      const auto ca = label_centroids_2d(cloud_a);
      return std::pair{estimate_inplane_orientation(ca, label_centroids_2d(cloud_b)), ca.size()};
    });
  }

  const RansacResult coarse = run_stage(diag, "ransac_coarse_align", [&] {
    RansacParams rp = params.ransac;
    rp.use_inplane_constraint = constraint;
    rp.use_labels = colors;
    if (rp.inlier_distance <= 0.0) rp.inlier_distance = 1.5 * voxel;
    return std::pair{ransac_coarse_align(normals_a, normals_b, rp, constraint ? diag.inplane_angle : 0.0),
                     normals_b.size()};
  });
  result.init = coarse.transform;
  diag.ransac_inliers = coarse.inliers;
  diag.ransac_inlier_fraction = coarse.inlier_fraction;

  const ColorIcpResult fine = run_stage(diag, "color_icp_refine", [&] {
    ColorIcpParams ip = params.icp;
    if (!colors) {
      ip.delta = 1.0;
      ip.label_strict = false;
    }
    if (params.multi_scale) {
      return std::pair{color_icp_multiscale(cloud_a, cloud_b, coarse.transform, ip, params.scale_factors,
                                            spacing, params.normal_neighbors),
                       cloud_b.size()};
    }
    NormalCloud b;
    b.cloud = cloud_b;
    b.normals.assign(cloud_b.size(), Eigen::Vector3d::Zero());
    b.normal_valid.assign(cloud_b.size(), 0);
    if (ip.correspondence_radius <= 0.0) ip.correspondence_radius = 5.0 * spacing;
    return std::pair{color_icp_refine(estimate_normals(cloud_a, params.normal_neighbors), b, coarse.transform, ip),
                     cloud_b.size()};
  });
  result.refined = fine.transform;
  diag.fitness = fine.fitness;
  diag.rmse = fine.rmse;
  diag.converged = fine.converged;
  diag.icp_iterations = fine.iterations;
  return result;
}

RegistrationResult register_frame(const LabeledCloud& model, const ModelAnnotation& annotation,
                                  const Frame& frame, const LabelPalette& palette,
                                  const CalibrationParams& calib, const RegistrationParams& params) {
  RegistrationDiagnostics pre;
  const LabeledCloud cloud_a = run_stage(pre, "colorize_model", [&] {
    LabeledCloud a = colorize_model(model, annotation, palette);
    const std::size_t n = a.size();
    return std::pair{std::move(a), n};
  });
  const LabeledCloud cloud_b = run_stage(pre, "mask_cloud", [&] {
    LabeledCloud b = mask_cloud(frame.disparity, frame.rgb, frame.mask, palette, calib);
    const std::size_t n = b.size();
    return std::pair{std::move(b), n};
  });
  RegistrationResult result = register_clouds(cloud_a, cloud_b, params);
  auto& stages = result.diagnostics.stages;
  stages.insert(stages.begin(), pre.stages.begin(), pre.stages.end());
  return result;
}

}  // namespace msreg
