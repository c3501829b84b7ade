#include "config.hpp"

namespace msreg::cli {

namespace fs = std::filesystem;

namespace {

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw Error(ErrorKind::Io, std::string(what) + " file not found: " + p.string());
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("config key '") + key + "': " + e.what());
  }
}

void read_deg(const Json& j, const char* key, double& rad) {
  double deg = rad2deg(rad);
  read(j, key, deg);
  rad = deg2rad(deg);
}

}  // namespace

PipelineConfig default_config() {
  PipelineConfig c;
  c.sgbm.disparity_range = 64;
  return c;
}

void PipelineConfig::validate() const {
  if (calib) require_file(*calib, "calibration");
  if (palette) require_file(*palette, "palette");
  if (distortion) {
    if (!distortion_field) throw Error(ErrorKind::InvalidArgument, "distortion enabled without a field file");
    require_file(*distortion_field, "distortion field");
  }
  sgbm.validate();
  registration.ransac.validate();
  registration.icp.validate();
  if (!(model_spacing > 0.0)) throw Error(ErrorKind::InvalidArgument, "model_spacing must be positive");
}

PipelineConfig load_config(const fs::path& path) {
  const Json j = read_json(path);
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  PipelineConfig c = default_config();
  if (j.contains("calib")) c.calib = resolve(j.at("calib").get<std::string>());
  if (j.contains("palette")) c.palette = resolve(j.at("palette").get<std::string>());
  if (j.contains("distortion")) {
    const Json& d = j.at("distortion");
    read(d, "enabled", c.distortion);
    if (d.contains("field")) c.distortion_field = resolve(d.at("field").get<std::string>());
  }
  if (j.contains("variant")) c.variant = variant_from_string(j.at("variant").get<std::string>());
  read(j, "seed", c.seed);
  read(j, "model_spacing_mm", c.model_spacing);
  if (j.contains("sgbm")) {
    const Json& s = j.at("sgbm");
    read(s, "min_disparity", c.sgbm.min_disparity);
    read(s, "disparity_range", c.sgbm.disparity_range);
    read(s, "census_window", c.sgbm.census_window);
    read(s, "penalty_small", c.sgbm.penalty_small);
    read(s, "penalty_large", c.sgbm.penalty_large);
    read(s, "path_count", c.sgbm.path_count);
    read(s, "uniqueness_ratio", c.sgbm.uniqueness_ratio);
    read(s, "lr_consistency_threshold", c.sgbm.lr_consistency_threshold);
  }
  auto& r = c.registration;
  if (j.contains("ransac")) {
    const Json& s = j.at("ransac");
    read(s, "max_iterations", r.ransac.max_iterations);
    read(s, "inlier_distance_mm", r.ransac.inlier_distance);
    read_deg(s, "normal_angle_max_deg", r.ransac.normal_angle_max);
    read_deg(s, "inplane_angle_window_deg", r.ransac.inplane_angle_window);
    read(s, "edge_length_similarity", r.ransac.edge_length_similarity);
    read(s, "score_subsample", r.ransac.score_subsample);
  }
  if (j.contains("icp")) {
    const Json& s = j.at("icp");
    read(s, "delta", r.icp.delta);
    read(s, "max_iterations", r.icp.max_iterations);
    read(s, "correspondence_radius_mm", r.icp.correspondence_radius);
    read(s, "convergence_eps", r.icp.convergence_eps);
    read(s, "label_strict", r.icp.label_strict);
    read(s, "gradient_neighbors", r.icp.gradient_neighbors);
  }
  read(j, "multi_scale", r.multi_scale);
  read(j, "normal_neighbors", r.normal_neighbors);
  c.validate();
  return c;
}

Json to_json(const PipelineConfig& c) {
  Json j;
  if (c.calib) j["calib"] = c.calib->string();
  if (c.palette) j["palette"] = c.palette->string();
  j["distortion"] = {{"enabled", c.distortion}};
  if (c.distortion_field) j["distortion"]["field"] = c.distortion_field->string();
  j["variant"] = to_string(c.variant);
  j["seed"] = c.seed;
  j["model_spacing_mm"] = c.model_spacing;
  j["sgbm"] = {{"min_disparity", c.sgbm.min_disparity},
               {"disparity_range", c.sgbm.disparity_range},
               {"census_window", c.sgbm.census_window},
               {"penalty_small", c.sgbm.penalty_small},
               {"penalty_large", c.sgbm.penalty_large},
               {"path_count", c.sgbm.path_count},
               {"uniqueness_ratio", c.sgbm.uniqueness_ratio},
               {"lr_consistency_threshold", c.sgbm.lr_consistency_threshold}};
  const auto& r = c.registration;
  j["ransac"] = {{"max_iterations", r.ransac.max_iterations},
                 {"inlier_distance_mm", r.ransac.inlier_distance},
                 {"normal_angle_max_deg", rad2deg(r.ransac.normal_angle_max)},
                 {"inplane_angle_window_deg", rad2deg(r.ransac.inplane_angle_window)},
                 {"edge_length_similarity", r.ransac.edge_length_similarity},
                 {"score_subsample", r.ransac.score_subsample}};
  j["icp"] = {{"delta", r.icp.delta},
              {"max_iterations", r.icp.max_iterations},
              {"correspondence_radius_mm", r.icp.correspondence_radius},
              {"convergence_eps", r.icp.convergence_eps},
              {"label_strict", r.icp.label_strict},
              {"gradient_neighbors", r.icp.gradient_neighbors}};
  j["multi_scale"] = r.multi_scale;
  j["normal_neighbors"] = r.normal_neighbors;
  return j;
}

}  // namespace msreg::cli
