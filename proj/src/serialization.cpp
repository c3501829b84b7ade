#include "msreg/serialization.hpp"

#include <fstream>
#include <limits>

namespace msreg {

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

namespace {

template <typename T>
T get(const Json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorKind::Format, std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("bad value for '") + key + "': " + e.what());
  }
}

std::optional<double> get_opt(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return get<double>(j, key);
}

void put_opt(Json& j, const char* key, const std::optional<double>& v) {
  if (v) j[key] = *v;
}

/// JSON has no NaN; non-finite values become null.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

Json to_json(const CalibrationParams& c) {
  Json j;
  j["h_rho"] = c.h_rho;
  j["P_rho_x"] = c.p_rho_x;
  j["P_rho_y"] = c.p_rho_y;
  j["c_x"] = c.c_x;
  j["c_y"] = c.c_y;
  j["d_e"] = c.d_e;
  put_opt(j, "f", c.optical.focal_length);
  put_opt(j, "m", c.optical.magnification);
  put_opt(j, "phi", c.optical.half_convergence);
  put_opt(j, "B", c.optical.baseline);
  put_opt(j, "d_w", c.optical.working_distance);
  return j;
}

CalibrationParams calibration_from_json(const Json& j) {
  CalibrationParams c;
  c.h_rho = get<double>(j, "h_rho");
  c.p_rho_x = get<double>(j, "P_rho_x");
  c.p_rho_y = get<double>(j, "P_rho_y");
  c.c_x = get<double>(j, "c_x");
  c.c_y = get<double>(j, "c_y");
  c.d_e = get<double>(j, "d_e");
  c.optical.focal_length = get_opt(j, "f");
  c.optical.magnification = get_opt(j, "m");
  c.optical.half_convergence = get_opt(j, "phi");
  c.optical.baseline = get_opt(j, "B");
  c.optical.working_distance = get_opt(j, "d_w");
  c.validate();
  return c;
}

Json to_json(const RigidTransformd& t) {
  const Eigen::Matrix4d m = t.matrix();
  Json rows = Json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return Json{{"matrix", rows}};
}

RigidTransformd transform_from_json(const Json& j) {
  const auto rows = get<std::vector<std::vector<double>>>(j, "matrix");
  if (rows.size() != 4) throw Error(ErrorKind::Format, "transform matrix must have 4 rows");
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    if (rows[r].size() != 4) throw Error(ErrorKind::Format, "transform matrix rows must have 4 entries");
    for (int c = 0; c < 4; ++c) m(r, c) = rows[r][c];
  }
  // Text round trips perturb orthonormality by ~1e-16; re-project once.
  Eigen::Matrix4d fixed = m;
  if (RigidTransformd::is_rotation(m.topLeftCorner<3, 3>(), 1e-6)) {
    fixed.topLeftCorner<3, 3>() = nearest_rotation(m.topLeftCorner<3, 3>());
  }
  return RigidTransformd::from_matrix(fixed);
}

Json to_json(const LabelPalette& palette) {
  Json classes = Json::array();
  for (const auto& [id, e] : palette.entries()) {
    classes.push_back({{"id", id}, {"rgb", {e.rgb[0], e.rgb[1], e.rgb[2]}}, {"role", to_string(e.role)}});
  }
  return Json{{"classes", classes}};
}

LabelPalette palette_from_json(const Json& j) {
  std::map<std::uint8_t, PaletteEntry> entries;
  for (const auto& c : get<Json>(j, "classes")) {
    const int id = get<int>(c, "id");
    if (id < 0 || id > 254) throw Error(ErrorKind::Format, "palette id out of range");
    const auto rgb = get<std::vector<int>>(c, "rgb");
    if (rgb.size() != 3) throw Error(ErrorKind::Format, "palette rgb must have 3 entries");
    PaletteEntry e;
    for (int k = 0; k < 3; ++k) {
      if (rgb[k] < 0 || rgb[k] > 255) throw Error(ErrorKind::Format, "palette rgb out of range");
      e.rgb[k] = static_cast<std::uint8_t>(rgb[k]);
    }
    e.role = feature_role_from_string(get<std::string>(c, "role"));
    if (!entries.emplace(static_cast<std::uint8_t>(id), e).second) {
      throw Error(ErrorKind::Format, "duplicate palette id");
    }
  }
  return LabelPalette(std::move(entries));
}

Json to_json(const CornerObservation& obs) {
  Json corners = Json::array();
  for (const auto& c : obs.corners) corners.push_back({c.x(), c.y()});
  return Json{{"grid", {obs.rows, obs.cols}}, {"square_size_mm", obs.square_size}, {"corners", corners}};
}

CornerObservation corners_from_json(const Json& j) {
  CornerObservation obs;
  const auto grid = get<std::vector<int>>(j, "grid");
  if (grid.size() != 2) throw Error(ErrorKind::Format, "grid must be [rows, cols]");
  obs.rows = grid[0];
  obs.cols = grid[1];
  obs.square_size = get<double>(j, "square_size_mm");
  for (const auto& c : get<std::vector<std::vector<double>>>(j, "corners")) {
    if (c.size() != 2) throw Error(ErrorKind::Format, "corner must be [x, y]");
    obs.corners.emplace_back(c[0], c[1]);
  }
  return obs;
}

Json to_json(const FitReport& r) {
  Json j;
  j["model"] = to_string(r.model);
  if (const auto* lin = std::get_if<LinearModel>(&r.params)) {
    j["params"] = {{"h_rho", lin->h_rho}, {"d_e", lin->d_e}};
  } else {
    const auto& p = std::get<PinholeFitParams>(r.params);
    j["params"] = {{"a", p.a}, {"b", p.b}, {"c", p.c}};
  }
  j["r_squared"] = r.r_squared;
  j["rmse_mm"] = r.rmse;
  j["mae_mm"] = r.mae;
  j["residuals_mm"] = r.residuals;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  return j;
}

Json to_json(const ModelComparison& c) {
  return Json{{"linear", to_json(c.linear)},
              {"pinhole", to_json(c.pinhole)},
              {"winner", to_string(c.winner)},
              {"f_statistic", number(c.f_statistic)},
              {"p_value", number(c.p_value)}};
}

Json to_json(const RegistrationDiagnostics& d) {
  Json stages = Json::array();
  for (const auto& s : d.stages) stages.push_back({{"stage", s.stage}, {"ms", s.ms}, {"points", s.points}});
  return Json{{"stages", stages},
              {"cloud_a_points", d.cloud_a_points},
              {"cloud_b_points", d.cloud_b_points},
              {"inplane_angle_rad", number(d.inplane_angle)},
              {"ransac_inliers", d.ransac_inliers},
              {"ransac_inlier_fraction", d.ransac_inlier_fraction},
              {"fitness", d.fitness},
              {"rmse_mm", d.rmse},
              {"converged", d.converged},
              {"icp_iterations", d.icp_iterations}};
}

}  // namespace msreg
