#pragma once

#include <filesystem>

#include <json.hpp>

#include "msreg/calibration.hpp"
#include "msreg/labeling.hpp"
#include "msreg/projection.hpp"
#include "msreg/registration.hpp"

namespace msreg {

using Json = nlohmann::ordered_json;

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

/// Flat keys h_rho, P_rho_x, P_rho_y, c_x, c_y, d_e and optional f, m, phi, B, d_w.
Json to_json(const CalibrationParams& calib);
CalibrationParams calibration_from_json(const Json& j);

/// 4x4 row-major matrix under "matrix".
Json to_json(const RigidTransformd& t);
RigidTransformd transform_from_json(const Json& j);

/// {"classes": [{"id", "rgb": [r,g,b], "role"}]}
Json to_json(const LabelPalette& palette);
LabelPalette palette_from_json(const Json& j);

/// {"grid": [rows, cols], "square_size_mm", "corners": [[x, y], ...]}
Json to_json(const CornerObservation& obs);
CornerObservation corners_from_json(const Json& j);

Json to_json(const FitReport& report);
Json to_json(const ModelComparison& cmp);
Json to_json(const RegistrationDiagnostics& diag);

}  // namespace msreg
