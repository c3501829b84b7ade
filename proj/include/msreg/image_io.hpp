#pragma once

#include <filesystem>

#include "msreg/imaging.hpp"

namespace msreg {

void write_png(const std::filesystem::path& path, const RgbImage& img);
void write_png(const std::filesystem::path& path, const GrayImage& img);

/// Reads any 8-bit PNG, expanding gray/palette to RGB and dropping alpha.
RgbImage read_png_rgb(const std::filesystem::path& path);

/// Reads an 8-bit single-channel PNG. Palette images yield the raw indices.
GrayImage read_png_gray(const std::filesystem::path& path);

/// Little-endian PFM ("Pf", scale -1.0); invalid pixels are stored as NaN.
void write_pfm(const std::filesystem::path& path, const DisparityMap& d);
DisparityMap read_pfm(const std::filesystem::path& path);

}  // namespace msreg
