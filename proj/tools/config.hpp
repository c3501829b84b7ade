#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "msreg/registration.hpp"
#include "msreg/serialization.hpp"
#include "msreg/sgbm.hpp"

namespace msreg::cli {

/// Run configuration. File paths are resolved against the config file's
/// directory and must exist at load time.
struct PipelineConfig {
  std::optional<std::filesystem::path> calib;
  std::optional<std::filesystem::path> palette;
  bool distortion = false;
  std::optional<std::filesystem::path> distortion_field;
  Variant variant = Variant::RCsCo;
  std::uint64_t seed = 1;
  SgbmParams sgbm;
  RegistrationParams registration;
  double model_spacing = 0.1;  // mm, synthetic model sampling

  void validate() const;
};

PipelineConfig default_config();
PipelineConfig load_config(const std::filesystem::path& path);
Json to_json(const PipelineConfig& config);

}  // namespace msreg::cli
