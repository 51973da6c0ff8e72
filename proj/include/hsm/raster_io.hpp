#pragma once

// Readers and writers for PFM, KITTI 16-bit disparity PNG, 8/16-bit PNG images
// and Middlebury-style calib.txt. All functions work on byte buffers.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hsm/core.hpp"

namespace hsm {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

enum class Endian { little, big };

/// A decoded PFM file. "Pf" yields a DisparityMap (non-finite pixels invalid), "PF" a 3-channel Image.
struct PfmFile {
  std::variant<DisparityMap, Image> raster;
  float scale = 1.0f;  // |scale| from the header
  Endian endian = Endian::little;
};

PfmFile read_pfm(ByteView bytes);

/// "Pf" with bottom-up rows; invalid pixels are written as +Inf.
Bytes write_pfm(const DisparityMap& map, float scale = 1.0f, Endian endian = Endian::little);
/// "Pf" or "PF" depending on the channel count.
Bytes write_pfm(const Image& image, float scale = 1.0f, Endian endian = Endian::little);
Bytes write_pfm(const PfmFile& file);

/// 16-bit grayscale PNG, disparity = stored / 256, stored 0 = invalid.
DisparityMap read_kitti_disparity(ByteView bytes);
/// Valid pixels are stored as round(d * 256) clamped to [1, 65535].
Bytes write_kitti_disparity(const DisparityMap& map);

/// Raw PNG samples.
struct PngRaster {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 gray, 2 gray+alpha, 3 RGB, 4 RGBA
  int bit_depth = 8;  // 8 or 16
  std::vector<std::uint16_t> samples;  // row-major, interleaved
};

PngRaster decode_png(ByteView bytes);
Bytes encode_png(const PngRaster& raster);

/// PNG image normalised to [0,1] by the maximum code value; alpha dropped.
struct LoadedImage {
  Image image;
  int bit_depth = 8;  // 32 for PFM
};

LoadedImage read_image(ByteView bytes);
/// Quantises [0,1] values to 8- or 16-bit codes.
Bytes write_png_image(const Image& image, int bit_depth = 8);

struct Calibration {
  int ndisp = 0;
  std::optional<double> baseline;  // metres
  std::optional<double> focal;     // pixels
  std::optional<double> doffs;
};

/// key=value lines. Middlebury files (with a cam0 matrix) give the baseline in millimetres
/// and the focal length as cam0[0]; otherwise baseline is in metres and focal is read from
/// "focal" or "f".
Calibration read_calib(std::string_view text);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, ByteView bytes);

/// Disparity from .pfm or KITTI .png by extension.
DisparityMap load_disparity(const std::filesystem::path& path);
void save_disparity(const std::filesystem::path& path, const DisparityMap& map);
LoadedImage load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const Image& image, int bit_depth = 8);

}  // namespace hsm
