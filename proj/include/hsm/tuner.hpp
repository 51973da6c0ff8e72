#pragma once

// Multi-scale smooth-L1 loss over the per-level readouts and a derivative-free
// coordinate search over the decoder's free parameters.

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "hsm/pipeline.hpp"

namespace hsm {

/// 0.5 e^2 for |e| <= 1, |e| - 0.5 beyond.
inline double smooth_l1(double e) {
  const double a = std::abs(e);
  return a <= 1.0 ? 0.5 * a * a : a - 0.5;
}

inline constexpr std::array<double, kPyramidLevels> kLevelLossWeights{1.0, 1.0 / 4.0, 1.0 / 16.0, 1.0 / 64.0};

struct LossBreakdown {
  std::array<double, kPyramidLevels> levels{};
  std::array<bool, kPyramidLevels> empty{};  // level had no valid ground-truth pixel
  double total = 0.0;
};

/// Weighted sum of per-level losses.
double combine_levels(const std::array<double, kPyramidLevels>& levels);

/// Area mean over divisor x divisor blocks of the valid pixels, divided by the divisor.
/// A cell is valid iff at least half of its in-image source pixels are valid.
DisparityMap downsample_ground_truth(const DisparityMap& gt, int divisor, int out_width, int out_height);

/// Predictions in level-native units. Pixels the matcher left invalid count as a prediction of 0.
LossBreakdown multiscale_loss(const LevelPredictions& preds, const DisparityMap& gt);

struct TuningSample {
  Image left;
  Image right;
  DisparityMap gt;
};

/// One searchable decoder parameter.
struct TunableParam {
  std::string name;
  bool continuous = true;
  double lo = 0.0, hi = 1.0;      // continuous bounds
  bool log_scale = false;         // golden-section on log(value)
  std::vector<double> grid;       // discrete candidates
  std::function<double(const DecoderConfig&)> get;
  std::function<void(DecoderConfig&, double)> set;
};

/// alpha, gamma, beta, the four kind weights, agg_blocks and the three window sides.
std::vector<TunableParam> default_tunable_params();

struct TraceEntry {
  int eval = 0;
  std::string param;
  double value = 0.0;
  double loss = 0.0;
  bool accepted = false;
};

struct TuneResult {
  MatcherConfig config;
  double initial_loss = 0.0;
  double loss = 0.0;
  int evals = 0;  // search evaluations, the baseline evaluation excluded
  std::vector<TraceEntry> trace;
};

struct TuneOptions {
  int budget_evals = 200;
  int golden_steps = 6;
  std::vector<std::string> params;  // empty: all defaults
};

/// Mean multiscale loss over the dataset.
double dataset_loss(const MatcherConfig& cfg, const std::vector<TuningSample>& data);

/// Cyclic coordinate search. The baseline loss is always evaluated; with a zero
/// budget the initial config comes back unchanged.
TuneResult tune(const MatcherConfig& initial, const std::vector<TuningSample>& data, const TuneOptions& opts = {});

}  // namespace hsm
