#pragma once

// Asymmetric (target-view) augmentations for calibration error, photometric
// mismatch and occlusion, plus the symmetric scale/crop.

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "hsm/core.hpp"

namespace hsm {

struct YDisparity {
  double rotation_deg = 0.0;
  double ty = 0.0;
};

struct Chromatic {
  double brightness = 1.0;
  double gamma = 1.0;
  double contrast = 1.0;
};

struct MaskRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

struct ScaleCrop {
  double scale = 1.0;
  int crop_x = 0;
  int crop_y = 0;
  int crop_width = 768;
  int crop_height = 576;
};

struct AugmentationSpec {
  std::optional<YDisparity> ydisp;
  std::optional<Chromatic> chromatic_left;
  std::optional<Chromatic> chromatic_right;
  std::optional<MaskRect> mask;
  std::optional<ScaleCrop> symmetric;
  std::uint64_t seed = 0;
};

/// Rigid map about the image centre: p -> R(theta) (p - c) + c + (0, ty).
struct RigidWarp {
  Eigen::Vector2d centre;
  double cos_t = 1.0;
  double sin_t = 0.0;
  double ty = 0.0;

  RigidWarp(int width, int height, double rotation_deg, double ty);
  Eigen::Vector2d map(const Eigen::Vector2d& p) const;
};

/// Target view resampled at the rigidly transformed coordinates (bilinear, clamp-to-edge).
Image ydisparity_warp(const Image& target, double rotation_deg, double ty);

/// out = clamp01(((b in)^g - 0.5) c + 0.5), per channel.
Image asymmetric_chromatic(const Image& image, const Chromatic& c);

/// Fills the clipped rectangle with the whole image's per-channel means.
Image asymmetric_mask(const Image& target, const MaskRect& rect);

struct StereoTriple {
  Image left;
  Image right;
  DisparityMap gt;
};

/// Resamples both views and the ground truth by `scale` (disparities multiplied by the
/// horizontal factor) and crops the same window from all three.
StereoTriple symmetric_scale_crop(const Image& left, const Image& right, const DisparityMap& gt,
                                  const ScaleCrop& sc);

enum class AugmentPreset { identity, training, sweep };

AugmentPreset parse_augment_preset(const std::string& s);

struct SamplingConfig {
  AugmentPreset preset = AugmentPreset::training;
  int image_width = 0;  // 0 disables mask placement and scale/crop
  int image_height = 0;
  double ydisp_chance = 0.5;
  double max_rotation_deg = 0.1;
  double max_ty = 2.0;
  double brightness_lo = 0.5, brightness_hi = 2.0;
  double gamma_lo = 0.8, gamma_hi = 1.2;
  double contrast_lo = 0.8, contrast_hi = 1.2;
  double mask_chance = 0.5;
  int mask_lo = 50, mask_hi = 150;
  double scale_lo = 0.225, scale_hi = 1.2;
  int crop_width = 768;
  int crop_height = 576;
  bool scale_crop = false;

  static SamplingConfig for_preset(AugmentPreset preset, int width, int height);
};

/// Draws a spec from `rng`; identical rng state gives an identical spec.
AugmentationSpec sample_spec(std::mt19937_64& rng, const SamplingConfig& cfg);

struct AugmentedPair {
  Image left;
  Image right;
};

/// Applies chromatic changes to each view and the y-disparity warp and mask to the target.
AugmentedPair apply_spec(const Image& left, const Image& right, const AugmentationSpec& spec);

}  // namespace hsm
