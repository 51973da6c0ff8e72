#pragma once

// Synthetic ground-truthed stereo pairs. Every surface carries its own
// random-dot texture; the right view is rendered by sampling the visible
// surface at x_left = x_right + d, so ground truth is exact by construction.

#include <cstdint>
#include <string>

#include "hsm/core.hpp"

namespace hsm {

enum class SceneKind { constant, plane, two_plane, step };

SceneKind parse_scene_kind(const std::string& s);
std::string to_string(SceneKind k);

struct SceneParams {
  SceneKind kind = SceneKind::constant;
  int width = 640;
  int height = 512;
  double d0 = 16.0;  // constant
  // plane: d = a x + b y + c (left-image coordinates)
  double plane_a = 0.0;
  double plane_b = 0.0;
  double plane_c = 16.0;
  // two-plane: fronto-parallel near rectangle over a far background
  double baseline = 0.54;
  double focal = 3578.0;
  double near_depth = 10.0;
  double far_depth = 100.0;
  // step: disparity left / right of the vertical centre line
  double step_left = 16.0;
  double step_right = 32.0;
  double smoothing = 0.0;  // Gaussian sigma of the dot texture, pixels; 0 = raw dots
  int channels = 1;
  std::uint64_t seed = 0;
};

struct SyntheticScene {
  Image left;
  Image right;
  DisparityMap gt;
  SceneParams params;
};

/// Throws when the scene's largest disparity is not below width / 4.
SyntheticScene generate(const SceneParams& params);

/// Largest ground-truth disparity the parameters produce.
double max_scene_disparity(const SceneParams& params);

}  // namespace hsm
