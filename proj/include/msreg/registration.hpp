#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "msreg/geometry.hpp"
#include "msreg/labeling.hpp"
#include "msreg/projection.hpp"

namespace msreg {

/// LabeledCloud plus one unit normal per point. Normals face the camera
/// (n . (0,0,-1) >= 0). Degenerate neighbourhoods leave normal_valid false
/// and a zero normal.
struct NormalCloud {
  LabeledCloud cloud;
  std::vector<Eigen::Vector3d> normals;
  std::vector<std::uint8_t> normal_valid;

  std::size_t size() const { return cloud.size(); }
  std::size_t valid_normal_count() const;
};

NormalCloud transformed(const NormalCloud& cloud, const RigidTransformd& transform);

/// Smallest-eigenvector normals of the k-nearest-neighbour covariance.
NormalCloud estimate_normals(const LabeledCloud& cloud, int k);

/// Voxel-grid average per (voxel, label). Output order follows first
/// occurrence in the input.
LabeledCloud voxel_downsample(const LabeledCloud& cloud, double voxel_size);

/// Median nearest-neighbour distance (evaluated on at most `max_probes`
/// evenly strided points).
double median_spacing(const LabeledCloud& cloud, std::size_t max_probes = 4000);

/// Per-label centroid of the cloud projected onto the image plane (z dropped).
std::map<std::uint8_t, Eigen::Vector2d> label_centroids_2d(const LabeledCloud& cloud);

/// Rotation angle (rad, CCW) that best maps B's centroid constellation onto
/// A's: least-squares 2D Procrustes without scaling over shared labels.
double estimate_inplane_orientation(const std::map<std::uint8_t, Eigen::Vector2d>& cloud_a_2d,
                                    const std::map<std::uint8_t, Eigen::Vector2d>& cloud_b_2d);

struct RansacParams {
  int max_iterations = 60000;
  int sample_size = 3;
  double inlier_distance = 0.0;  // mm; <= 0 selects 1.5 x median spacing of A
  double normal_angle_max = deg2rad(30.0);
  double inplane_angle_window = deg2rad(25.0);
  bool use_inplane_constraint = true;
  /// Correspondences must join equal labels. Off treats both clouds as
  /// one class (colourless matching).
  bool use_labels = true;
  double edge_length_similarity = 0.9;
  int score_subsample = 400;  // B points used to score a hypothesis; 0 = all
  std::uint64_t rng_seed = 1;

  void validate() const;
};

struct RansacResult {
  RigidTransformd transform;
  std::size_t inliers = 0;
  double inlier_fraction = 0.0;
  double inlier_distance = 0.0;
  std::size_t hypotheses_scored = 0;
  std::size_t hypotheses_rejected_by_constraint = 0;
};

/// Hypothesise-and-verify coarse alignment mapping B onto A. Each hypothesis
/// is a closed-form rigid fit of three same-label correspondences, screened
/// by edge-length consistency and, when enabled, by the in-plane window
/// around `inplane`. The best-scoring hypothesis is refined by one
/// least-squares pass over its inliers. Deterministic given rng_seed.
RansacResult ransac_coarse_align(const NormalCloud& cloud_a, const NormalCloud& cloud_b,
                                 const RansacParams& params, double inplane);

struct ColorIcpParams {
  double delta = 0.968;  // weight of the geometric term
  int max_iterations = 30;
  double correspondence_radius = 0.0;  // mm; <= 0 selects 5 x median spacing of A
  double convergence_eps = 1e-6;
  bool label_strict = true;
  int gradient_neighbors = 16;

  void validate() const;
};

/// Objective of one accepted Gauss-Newton iteration, evaluated on that
/// iteration's correspondences before and after the step.
struct ObjectiveStep {
  double before = 0.0;
  double after = 0.0;
};

struct ColorIcpResult {
  RigidTransformd transform;
  double fitness = 0.0;  // matched fraction of B
  double rmse = 0.0;     // mm, over matched pairs
  bool converged = false;
  int iterations = 0;
  std::vector<ObjectiveStep> trace;
};

/// Coloured ICP (point-to-plane + tangent-plane colour field of A) refining
/// the B -> A transform. delta = 1 reduces it to point-to-plane ICP.
ColorIcpResult color_icp_refine(const NormalCloud& cloud_a, const NormalCloud& cloud_b,
                                const RigidTransformd& init, const ColorIcpParams& params);

/// Coarse-to-fine refinement: voxel sizes factor x base_spacing for each
/// factor, normals re-estimated per level, radius scaled with the factor.
ColorIcpResult color_icp_multiscale(const LabeledCloud& cloud_a, const LabeledCloud& cloud_b,
                                    const RigidTransformd& init, const ColorIcpParams& params,
                                    const std::vector<double>& factors, double base_spacing,
                                    int normal_neighbors);

/// Method combinations: R (RANSAC), Cs (in-plane constraint), Co (colours).
enum class Variant { R, RCs, RCo, RCsCo };
const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);
bool uses_constraint(Variant v);
bool uses_colors(Variant v);

struct RegistrationParams {
  Variant variant = Variant::RCsCo;
  RansacParams ransac;
  ColorIcpParams icp;
  int normal_neighbors = 12;
  double coarse_factor = 4.0;  // RANSAC voxel = coarse_factor x median spacing of A
  bool multi_scale = true;
  std::vector<double> scale_factors{4.0, 2.0, 1.0};
};

struct StageRecord {
  std::string stage;
  double ms = 0.0;
  std::size_t points = 0;
};

struct RegistrationDiagnostics {
  std::vector<StageRecord> stages;
  std::size_t cloud_a_points = 0;
  std::size_t cloud_b_points = 0;
  double inplane_angle = 0.0;  // rad; NaN when the constraint is off
  std::size_t ransac_inliers = 0;
  double ransac_inlier_fraction = 0.0;
  double fitness = 0.0;
  double rmse = 0.0;
  bool converged = false;
  int icp_iterations = 0;
};

struct RegistrationResult {
  RigidTransformd refined;
  RigidTransformd init;
  RegistrationDiagnostics diagnostics;
};

/// Registers colourised Cloud B (camera frame) to Cloud A (model frame); the
/// returned transforms map B into A.
RegistrationResult register_clouds(const LabeledCloud& cloud_a, const LabeledCloud& cloud_b,
                                   const RegistrationParams& params);

struct Frame {
  DisparityMap disparity;
  RgbImage rgb;
  LabelMask mask;
};

/// Full scheme: colorize_model, mask_cloud, then register_clouds.
RegistrationResult register_frame(const LabeledCloud& model, const ModelAnnotation& annotation,
                                  const Frame& frame, const LabelPalette& palette,
                                  const CalibrationParams& calib, const RegistrationParams& params);

}  // namespace msreg
