#pragma once

#include <filesystem>
#include <iosfwd>

#include "msreg/projection.hpp"

namespace msreg {

/// ASCII PLY 1.0: float x y z, uchar red green blue, and uchar label when
/// `with_labels` (unlabelled points are written as 255).
void write_ply(std::ostream& os, const LabeledCloud& cloud, bool with_labels);
void write_ply(const std::filesystem::path& path, const LabeledCloud& cloud, bool with_labels);

/// Reads ASCII PLY vertices. Missing colour defaults to black, missing
/// label to kNoLabel. Unknown vertex properties are skipped.
LabeledCloud read_ply(std::istream& is);
LabeledCloud read_ply(const std::filesystem::path& path);

}  // namespace msreg
