#include "msreg/labeling.hpp"

#include <set>
#include <string>

namespace msreg {

const char* to_string(FeatureRole role) {
  switch (role) {
    case FeatureRole::SutureLine: return "suture-line";
    case FeatureRole::Surface: return "surface";
    case FeatureRole::Undefined: return "undefined";
  }
  return "undefined";
}

FeatureRole feature_role_from_string(const std::string& s) {
  if (s == "suture-line") return FeatureRole::SutureLine;
  if (s == "surface") return FeatureRole::Surface;
  if (s == "undefined") return FeatureRole::Undefined;
  throw Error(ErrorKind::Format, "unknown feature role '" + s + "'");
}

LabelPalette::LabelPalette(std::map<std::uint8_t, PaletteEntry> entries)
    : entries_(std::move(entries)) {
  validate();
  for (const auto& [id, e] : entries_) {
    if (e.role == FeatureRole::Undefined) undefined_ = id;
  }
}

LabelPalette LabelPalette::standard() {
  return LabelPalette({
      {0, {{0, 0, 0}, FeatureRole::Undefined}},
      {1, {{255, 0, 0}, FeatureRole::SutureLine}},
      {2, {{0, 255, 0}, FeatureRole::SutureLine}},
      {3, {{0, 0, 255}, FeatureRole::SutureLine}},
      {4, {{255, 255, 0}, FeatureRole::SutureLine}},
      {5, {{255, 0, 255}, FeatureRole::Surface}},
      {6, {{0, 255, 255}, FeatureRole::Surface}},
  });
}

const PaletteEntry& LabelPalette::at(std::uint8_t id) const {
  const auto it = entries_.find(id);
  if (it == entries_.end()) {
    throw Error(ErrorKind::InvalidArgument, "class id " + std::to_string(id) + " not in palette");
  }
  return it->second;
}

std::vector<std::uint8_t> LabelPalette::feature_ids() const {
  std::vector<std::uint8_t> ids;
  for (const auto& [id, e] : entries_) {
    if (e.role != FeatureRole::Undefined) ids.push_back(id);
  }
  return ids;
}

std::optional<std::uint8_t> LabelPalette::class_of(const Rgb8& rgb) const {
  for (const auto& [id, e] : entries_) {
    if (e.rgb == rgb) return id;
  }
  return std::nullopt;
}

void LabelPalette::validate() const {
  std::set<Rgb8> colours;
  int undefined = 0;
  for (const auto& [id, e] : entries_) {
    if (id == kNoLabel) throw Error(ErrorKind::InvalidArgument, "class id 255 is reserved");
    if (!colours.insert(e.rgb).second) {
      throw Error(ErrorKind::InvalidArgument, "palette colours must be distinct");
    }
    undefined += e.role == FeatureRole::Undefined;
  }
  if (undefined != 1) {
    throw Error(ErrorKind::InvalidArgument, "palette needs exactly one undefined class");
  }
}

LabeledCloud colorize_model(const LabeledCloud& model, const ModelAnnotation& annotation,
                            const LabelPalette& palette) {
  model.validate();
  if (annotation.size() != model.size()) {
    throw Error(ErrorKind::DimensionMismatch, "annotation length differs from model size");
  }
  LabeledCloud out;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const std::uint8_t id = annotation[i];
    if (!palette.contains(id)) {
      throw Error(ErrorKind::InvalidArgument, "unknown class id " + std::to_string(id));
    }
    if (id == palette.undefined_id()) continue;
    out.push_back(model.points[i], palette.at(id).rgb, id);
  }
  return out;
}

LabeledCloud mask_cloud(const DisparityMap& d, const RgbImage& rgb, const LabelMask& mask,
                        const LabelPalette& palette, const CalibrationParams& calib) {
  calib.validate();
  rgb.validate();
  if (d.width() != rgb.width || d.height() != rgb.height || mask.width() != d.width() ||
      mask.height() != d.height()) {
    throw Error(ErrorKind::DimensionMismatch, "disparity, image and mask differ in size");
  }
  LabeledCloud out;
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      const std::uint8_t id = mask(x, y);
      if (!palette.contains(id)) {
        throw Error(ErrorKind::InvalidArgument, "mask holds unknown class id " + std::to_string(id));
      }
      if (id == palette.undefined_id() || !d.valid(x, y)) continue;
      out.push_back(reconstruct_point<double>({x, y}, d(x, y), calib), palette.at(id).rgb, id);
      out.pixels.emplace_back(x, y);
    }
  }
  return out;
}

}  // namespace msreg
