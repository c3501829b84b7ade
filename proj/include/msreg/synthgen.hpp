#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "msreg/calibration.hpp"
#include "msreg/imaging.hpp"
#include "msreg/labeling.hpp"
#include "msreg/projection.hpp"
#include "msreg/registration.hpp"

namespace msreg {

/// Bench geometry used by the generator: 0.077 mm pixels, 7 deg half
/// convergence (h_rho from the orthographic relation), d_e = 0 and the
/// principal point at the image centre.
CalibrationParams synthetic_calibration(int width, int height);

struct SkullParams {
  int width = 320;
  int height = 240;
  double base_depth = 2.0;        // mm, depth of the closest surface point before features
  double dome_amplitude = 0.45;   // x half-extent s
  double dome_sigma = 0.8;        // x s
  int secondary_bumps = 3;
  double ridge_height = 0.15;     // mm
  double ridge_sigma = 0.15;      // mm
  double suture_half_width = 0.3; // mm, label band
  double contrast_floor = 30.0;   // grey levels per 8x8 block
};

/// Analytic skull-like surface in camera coordinates (mm). Depth grows away
/// from the camera; sutures are ridges raised toward it.
class SkullGeometry {
 public:
  SkullGeometry() = default;
  SkullGeometry(std::uint64_t seed, const SkullParams& params, double half_extent);

  double depth(double x, double y) const;
  Eigen::Vector3d normal(double x, double y) const;  // unit, n_z < 0
  /// Class id (0 undefined, 1-4 sutures, 5-6 surface patches).
  std::uint8_t label(double x, double y) const;

  const Eigen::Vector2d& bregma() const { return bregma_; }
  const std::array<std::vector<Eigen::Vector2d>, 4>& sutures() const { return sutures_; }

 private:
  struct Bump {
    Eigen::Vector2d center;
    double amplitude, sigma;
  };
  struct Ellipse {
    Eigen::Vector2d center;
    double a, b, angle;
    bool contains(const Eigen::Vector2d& p) const;
  };

  double suture_distance(int k, const Eigen::Vector2d& p) const;

  SkullParams params_;
  double base_ = 0.0;
  std::vector<Bump> bumps_;  // first bump is the dome (subtracted: bulges toward the camera)
  Eigen::Vector2d bregma_ = Eigen::Vector2d::Zero();
  std::array<std::vector<Eigen::Vector2d>, 4> sutures_;
  std::array<Ellipse, 2> patches_{};
};

/// Ground-truth scene: every raster is exact for the analytic geometry.
struct SyntheticScene {
  SkullGeometry geometry;
  DisparityMap::Storage height;  // z per left pixel, mm
  RgbImage texture;              // also the left image
  LabelMask labels;
  DisparityMap disparity;        // h_rho (z - d_e), exact
  CalibrationParams calib;
  RigidTransformd pose;          // model -> camera
};

SyntheticScene make_skull_surface(std::uint64_t seed, const SkullParams& params = {});

/// The same skull seen under a model -> camera pose that rotates about the
/// viewing axis only (arbitrary translation). Rasters stay exact.
SyntheticScene render_posed_scene(std::uint64_t seed, const SkullParams& params, const RigidTransformd& pose);

/// Flat scene at constant disparity `h0` with the usual texture and no labels.
SyntheticScene make_flat_scene(std::uint64_t seed, int width, int height, double h0);

/// Greyscale value noise with octaves at 4..32 px periods, block contrast
/// stretched to at least `contrast_floor`.
RgbImage make_texture(std::uint64_t seed, int width, int height, double contrast_floor = 30.0);

struct StereoPair {
  RgbImage left;
  RgbImage right;
  GrayImage valid;  // 1 where the left pixel is visible in the right view
};

/// Right view by inverse warping x_r = x_l - h(x_l) with linear
/// interpolation along rows. Left pixels hidden by a nearer surface or
/// mapped outside the right image are marked invalid.
StereoPair render_stereo(const SyntheticScene& scene);

/// Raw step-height readings: z_true = k * increment for k < steps, readings
/// h = h_rho (z_true - d_e) + N(0, (noise_mm h_rho)^2), `repeats` per step.
std::vector<StepReading> make_step_readings(double h_rho, double d_e, int steps, double increment,
                                            double noise_mm, int repeats, std::uint64_t seed);

/// make_step_readings averaged per step.
std::vector<StepSample> make_step_log(double h_rho, double d_e, int steps, double increment,
                                      double noise_mm, int repeats, std::uint64_t seed);

/// Checkerboard corners on the pixel grid with Gaussian jitter (px).
CornerObservation make_corner_observation(int rows, int cols, double square_mm, double p_rho_x,
                                          double p_rho_y, double jitter_px, std::uint64_t seed);

/// Reconstructed plane with a column-wise bowl g(u) = A (u^2 - mean u^2),
/// u in [-1, 1] across the columns. `bowl` receives g per column.
LabeledCloud make_bowl_plane(int width, int height, const CalibrationParams& calib, double amplitude_mm,
                             std::vector<double>* bowl = nullptr);

struct ModelCloud {
  LabeledCloud cloud;  // colourless model points (grey), model frame
  ModelAnnotation annotation;
};

/// Samples the geometry on a square grid over the frame's footprint grown by
/// `margin` (fraction), mapped through `model_from_camera`.
ModelCloud sample_model(const SyntheticScene& scene, double spacing_mm, double margin,
                        const RigidTransformd& model_from_camera);

struct PosedPair {
  ModelCloud model;
  LabeledCloud cloud_a;  // colourised model features
  LabeledCloud cloud_b;  // colourised frame features (camera frame)
  RigidTransformd truth; // maps B into A
};

struct PerturbOptions {
  double model_spacing = 0.1;  // mm
  double model_margin = 0.1;
  std::uint64_t seed = 0;
};

/// Model copy moved by `delta`, frame cloud from the exact disparity with
/// isotropic point noise and a seeded fraction of labels flipped to another
/// feature class (recoloured). truth = delta.
PosedPair perturb_pose(const SyntheticScene& scene, const RigidTransformd& delta, double noise_sigma,
                       double mislabel_fraction, const PerturbOptions& options = {});

/// Adds isotropic Gaussian noise to every point.
void add_point_noise(LabeledCloud& cloud, double sigma, std::uint64_t seed);

/// Relabels round(fraction * n) distinct points, chosen uniformly, to a
/// different feature class of the palette and repaints them.
void mislabel_cloud(LabeledCloud& cloud, double fraction, const LabelPalette& palette, std::uint64_t seed);

/// Pose perturbation drawn uniformly: in-plane rotation within +-max_deg,
/// translation direction uniform (in the x-y plane when `planar_translation`)
/// with magnitude up to max_mm.
RigidTransformd random_inplane_pose(std::uint64_t seed, double max_mm, double max_deg,
                                    bool planar_translation = false);

struct PerspectiveCheck {
  double reference = 0.0;         // d_e cos phi + (B/2) sin phi
  double max_variation = 0.0;     // |dx| sin phi + |dz| cos phi at the volume corner
  double max_relative_error = 0.0;
};

/// Compares the perspective denominator z_l over the working volume with its
/// constant orthographic value.
PerspectiveCheck perspective_dominance(double d_e, double half_convergence, double baseline,
                                       double max_dx, double max_dz, int samples = 41);

/// Writes left.png, right.png, labels.png, disparity.pfm, calib.json,
/// pose.json, valid.png and palette.json into `dir`.
void write_scene_bundle(const std::filesystem::path& dir, const SyntheticScene& scene,
                        const StereoPair& pair, const LabelPalette& palette);

}  // namespace msreg
