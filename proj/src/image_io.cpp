#include "msreg/image_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include <png.h>

namespace msreg {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return f;
}

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  (void)png;
  throw Error(ErrorKind::Format, std::string("png: ") + msg);
}

void png_warn(png_structp, png_const_charp) {}

void write_png_rows(const std::filesystem::path& path, int width, int height, int color_type,
                    int channels, const std::uint8_t* data) {
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<std::uint8_t*>(data + static_cast<std::size_t>(y) * width * channels));
  }
  png_write_end(png, nullptr);
}

struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;
};

DecodedPng decode_png(const std::filesystem::path& path, bool expand_to_rgb) {
  auto file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error(ErrorKind::Format, path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (expand_to_rgb) {
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
      if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
      png_set_gray_to_rgb(png);
    }
  } else {
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA) {
      throw Error(ErrorKind::Format, path.string() + " is not a single-channel PNG");
    }
    if (depth < 8) png_set_packing(png);
  }
  png_read_update_info(png, info);

  DecodedPng out;
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  out.data.resize(rowbytes * out.height);
  std::vector<png_bytep> rows(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = out.data.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  return out;
}

}  // namespace

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  img.validate();
  write_png_rows(path, img.width, img.height, PNG_COLOR_TYPE_RGB, 3, img.data.data());
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  if (img.size() == 0) throw Error(ErrorKind::InvalidArgument, "empty image");
  write_png_rows(path, static_cast<int>(img.cols()), static_cast<int>(img.rows()),
                 PNG_COLOR_TYPE_GRAY, 1, img.data());
}

RgbImage read_png_rgb(const std::filesystem::path& path) {
  auto decoded = decode_png(path, true);
  if (decoded.channels != 3) throw Error(ErrorKind::Format, "unexpected PNG channel layout");
  RgbImage img(decoded.width, decoded.height);
  img.data = std::move(decoded.data);
  return img;
}

GrayImage read_png_gray(const std::filesystem::path& path) {
  auto decoded = decode_png(path, false);
  if (decoded.channels != 1) throw Error(ErrorKind::Format, "unexpected PNG channel layout");
  GrayImage img(decoded.height, decoded.width);
  std::memcpy(img.data(), decoded.data.data(), decoded.data.size());
  return img;
}

void write_pfm(const std::filesystem::path& path, const DisparityMap& d) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path.string());
  os << "Pf\n" << d.width() << ' ' << d.height() << "\n-1.0\n";
  std::vector<float> row(d.width());
  // PFM stores the bottom row first.
  for (int y = d.height() - 1; y >= 0; --y) {
    for (int x = 0; x < d.width(); ++x) {
      row[x] = d.valid(x, y) ? static_cast<float>(d(x, y)) : std::numeric_limits<float>::quiet_NaN();
    }
    if constexpr (std::endian::native == std::endian::big) {
      for (auto& v : row) v = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(v)));
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
  }
  if (!os) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

DisparityMap read_pfm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  is >> magic >> w >> h >> scale;
  if (magic != "Pf" || w <= 0 || h <= 0 || scale == 0.0) {
    throw Error(ErrorKind::Format, path.string() + " is not a single-channel PFM");
  }
  is.get();
  const bool little = scale < 0.0;
  DisparityMap d(w, h);
  std::vector<std::uint32_t> row(w);
  for (int y = h - 1; y >= 0; --y) {
    if (!is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4))) {
      throw Error(ErrorKind::Format, path.string() + " is truncated");
    }
    for (int x = 0; x < w; ++x) {
      std::uint32_t bits = row[x];
      if ((std::endian::native == std::endian::little) != little) bits = __builtin_bswap32(bits);
      const float v = std::bit_cast<float>(bits);
      if (std::isfinite(v)) d(x, y) = v;
    }
  }
  return d;
}

}  // namespace msreg
