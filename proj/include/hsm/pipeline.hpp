#pragma once

// Anytime coarse-to-fine matcher. The level-4 volume only feeds fusion; levels
// 3, 2 and 1 each emit a report (stages 1, 2, 3). A stage never touches data
// of a finer level, so halting after stage s leaves finer volumes unbuilt.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hsm/core.hpp"
#include "hsm/decoder.hpp"
#include "hsm/feature_volume.hpp"
#include "hsm/pyramid.hpp"

namespace hsm {

inline constexpr int kStages = 3;

/// Input pre-scaling: full, half or quarter resolution.
enum class InputMode { full, half, quarter };

inline int prescale_factor(InputMode m) { return m == InputMode::full ? 1 : m == InputMode::half ? 2 : 4; }
inline char mode_letter(InputMode m) { return m == InputMode::full ? 'F' : m == InputMode::half ? 'H' : 'Q'; }
InputMode parse_input_mode(const std::string& s);

/// Pyramid level that produces a given stage (stage 1 = level 3).
inline constexpr int stage_level(int stage) { return kPyramidLevels - stage; }

/// Report name such as "F3" or "H2".
inline std::string stage_name(InputMode m, int stage) { return std::string(1, mode_letter(m)) + std::to_string(stage); }

struct MatcherConfig {
  int max_disparity = 256;  // full-resolution pixels
  InputMode mode = InputMode::full;
  EncoderConfig encoder;
  DecoderConfig decoder;
  StridePolicy strides;
  int stages = kStages;
  int threads = 1;

  void validate() const;
};

struct StageReport {
  int stage = 0;
  int level = 0;
  DisparityMap disparity;  // original resolution, original pixel units
  double elapsed_ms = 0.0;
  std::uint64_t work_counter = 0;  // cumulative array cells produced
  int finest_volume_level = kPyramidLevels + 1;
};

using ReportSink = std::function<void(const StageReport&)>;

/// Runs the hierarchy honouring cfg.mode. Stage 1 always completes; afterwards a
/// stage is skipped once the previous one finished at or past `budget_ms`.
std::vector<StageReport> match(const Image& left, const Image& right, const MatcherConfig& cfg,
                               std::optional<double> budget_ms = std::nullopt, const ReportSink& sink = {});

/// Same as match() for H/Q modes: images area-averaged by 2 or 4, search range scaled
/// alike, and reports mapped back to the original resolution and pixel units.
std::vector<StageReport> match_at_resolution(const Image& left, const Image& right, const MatcherConfig& cfg,
                                             std::optional<double> budget_ms = std::nullopt,
                                             const ReportSink& sink = {});

/// Per-level readouts at each level's own resolution, in level-native disparity units
/// (original-resolution pixels divided by `divisors[k-1]`).
struct LevelPredictions {
  std::array<DisparityMap, kPyramidLevels> levels;
  std::array<int, kPyramidLevels> divisors{};
};

LevelPredictions match_levels(const Image& left, const Image& right, const MatcherConfig& cfg);

/// Finest-level-only matcher with the same descriptors and decoder, no fusion.
DisparityMap match_single_scale(const Image& left, const Image& right, const MatcherConfig& cfg);

/// Safe stopping distance in metres for 25, 40 or 55 mph.
double stopping_distance(int mph);

}  // namespace hsm
