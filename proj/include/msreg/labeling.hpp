#pragma once

#include <map>
#include <optional>
#include <vector>

#include "msreg/projection.hpp"

namespace msreg {

enum class FeatureRole { SutureLine, Surface, Undefined };
const char* to_string(FeatureRole role);
FeatureRole feature_role_from_string(const std::string& s);

struct PaletteEntry {
  Rgb8 rgb{};
  FeatureRole role = FeatureRole::Undefined;
};

/// Class id -> label colour. Exactly one class is Undefined; its pixels and
/// points never reach a registration cloud.
class LabelPalette {
 public:
  LabelPalette() = default;
  explicit LabelPalette(std::map<std::uint8_t, PaletteEntry> entries);

  /// Undefined class 0, four suture lines (1-4) and two surfaces (5-6) on the
  /// saturated corners of the RGB cube.
  static LabelPalette standard();

  const std::map<std::uint8_t, PaletteEntry>& entries() const { return entries_; }
  bool contains(std::uint8_t id) const { return entries_.count(id) > 0; }
  const PaletteEntry& at(std::uint8_t id) const;
  std::uint8_t undefined_id() const { return undefined_; }
  std::vector<std::uint8_t> feature_ids() const;
  std::optional<std::uint8_t> class_of(const Rgb8& rgb) const;

  /// Throws on duplicate colours or anything other than one Undefined class.
  void validate() const;

 private:
  std::map<std::uint8_t, PaletteEntry> entries_;
  std::uint8_t undefined_ = 0;
};

/// Per model point class id; the palette's undefined id marks "not a feature".
using ModelAnnotation = std::vector<std::uint8_t>;

/// Cloud A: annotated model points only, painted with their label colour.
LabeledCloud colorize_model(const LabeledCloud& model, const ModelAnnotation& annotation,
                            const LabelPalette& palette);

/// Cloud B: valid-disparity pixels of defined classes, reconstructed with the
/// linear model and painted with the palette colour of their class.
LabeledCloud mask_cloud(const DisparityMap& d, const RgbImage& rgb, const LabelMask& mask,
                        const LabelPalette& palette, const CalibrationParams& calib);

}  // namespace msreg
