#pragma once

// Multi-scale descriptor pyramid. Each level holds dense per-pixel
// descriptors at 1/8, 1/16, 1/32 and 1/64 of the working resolution:
// intensity, central-difference gradients, a local rank transform, and
// box-pooled context channels kept on their own coarse grids.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "hsm/core.hpp"
#include "hsm/parallel.hpp"

namespace hsm {

inline constexpr int kPyramidLevels = 4;

/// Spatial divisor of pyramid level k (1 = finest).
inline constexpr int level_divisor(int k) { return 8 << (k - 1); }

enum class ChannelKind { intensity, gradient_x, gradient_y, rank, pooled, empty };

struct ChannelInfo {
  ChannelKind kind = ChannelKind::intensity;
  ChannelKind source = ChannelKind::intensity;  // pooled channels only
  int window = 1;
  int phase = 0;
};

struct EncoderConfig {
  std::array<int, kPyramidLevels> channels{16, 16, 16, 32};
  std::vector<int> pooled_windows{4, 8, 16, 32};
  int rank_radius = 2;
  double intensity_gain = 1.0;
  double gradient_gain = 2.0;
  double rank_gain = 1.0;

  void validate() const {
    for (int c : channels)
      if (c < 4) throw ConfigError("descriptor level needs at least 4 channels, got " + std::to_string(c));
    for (int w : pooled_windows)
      if (w < 1) throw ConfigError("pooled window must be >= 1");
    if (rank_radius < 1) throw ConfigError("rank radius must be >= 1");
  }
};

template <typename Scalar>
struct FeatureLevelT {
  int scale_index = 1;
  int divisor = 8;
  std::vector<ChannelInfo> layout;
  std::vector<Plane<Scalar>> channels;

  int num_channels() const { return static_cast<int>(channels.size()); }
  int height() const { return channels.empty() ? 0 : static_cast<int>(channels[0].rows()); }
  int width() const { return channels.empty() ? 0 : static_cast<int>(channels[0].cols()); }

  int find(ChannelKind kind) const {
    for (int c = 0; c < num_channels(); ++c)
      if (layout[c].kind == kind) return c;
    return -1;
  }
};

template <typename Scalar>
struct FeaturePyramidT {
  std::array<FeatureLevelT<Scalar>, kPyramidLevels> levels;
  const FeatureLevelT<Scalar>& level(int k) const { return levels[k - 1]; }
};

using FeatureLevel = FeatureLevelT<float>;
using FeaturePyramid = FeaturePyramidT<float>;

/// Box mean held on a grid of stride `window`, offset by `offset_*` pixels.
template <typename Scalar>
struct PooledChannelT {
  ChannelKind source = ChannelKind::intensity;
  int window = 1;
  int phase = 0;
  int offset_y = 0;
  int offset_x = 0;
  Plane<Scalar> grid;

  int cell_y(int y) const { return (y + offset_y) / window; }
  int cell_x(int x) const { return (x + offset_x) / window; }

  /// Nearest-cell lookup back to a height x width plane.
  Plane<Scalar> materialize(int height, int width) const {
    Plane<Scalar> out(height, width);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) out(y, x) = grid(cell_y(y), cell_x(x));
    return out;
  }
};

using PooledChannel = PooledChannelT<float>;

// ---------------------------------------------------------------------------

/// 2x2 mean pooling; an odd trailing row/column is paired with itself.
template <typename Scalar>
Plane<Scalar> downsample_half(const Plane<Scalar>& in) {
  const int h = static_cast<int>(in.rows()), w = static_cast<int>(in.cols());
  if (h < 2 || w < 2) throw Error("downsample_half needs at least 2x2 pixels");
  const int oh = ceil_div(h, 2), ow = ceil_div(w, 2);
  Plane<Scalar> out(oh, ow);
  parallel_for(oh, [&](int y) {
    const int y0 = 2 * y, y1 = std::min(2 * y + 1, h - 1);
    for (int x = 0; x < ow; ++x) {
      const int x0 = 2 * x, x1 = std::min(2 * x + 1, w - 1);
      const double s = double(in(y0, x0)) + double(in(y0, x1)) + double(in(y1, x0)) + double(in(y1, x1));
      out(y, x) = static_cast<Scalar>(s / 4.0);
    }
  });
  return out;
}

template <typename Scalar>
ImageT<Scalar> downsample_half(const ImageT<Scalar>& in) {
  std::vector<Plane<Scalar>> planes;
  for (int c = 0; c < in.channels(); ++c) planes.push_back(downsample_half(in.channel(c)));
  return ImageT<Scalar>::from_planes(std::move(planes));
}

namespace detail {

template <typename Scalar>
Plane<Scalar> central_gradient(const Plane<Scalar>& in, bool horizontal, double gain) {
  const int h = static_cast<int>(in.rows()), w = static_cast<int>(in.cols());
  Plane<Scalar> out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double a, b;
      if (horizontal) {
        a = in(y, std::max(x - 1, 0));
        b = in(y, std::min(x + 1, w - 1));
      } else {
        a = in(std::max(y - 1, 0), x);
        b = in(std::min(y + 1, h - 1), x);
      }
      out(y, x) = static_cast<Scalar>(gain * 0.5 * (b - a));
    }
  return out;
}

/// Fraction of in-bounds neighbours darker than the centre pixel. Uses only
/// comparisons, so any strictly monotonic remap of intensities leaves it unchanged.
template <typename Scalar>
Plane<Scalar> rank_transform(const Plane<Scalar>& in, int radius, double gain) {
  const int h = static_cast<int>(in.rows()), w = static_cast<int>(in.cols());
  Plane<Scalar> out(h, w);
  parallel_for(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const Scalar centre = in(y, x);
      int darker = 0, total = 0;
      for (int v = std::max(0, y - radius); v <= std::min(h - 1, y + radius); ++v)
        for (int u = std::max(0, x - radius); u <= std::min(w - 1, x + radius); ++u) {
          if (v == y && u == x) continue;
          ++total;
          darker += in(v, u) < centre;
        }
      out(y, x) = static_cast<Scalar>(total == 0 ? 0.0 : gain * double(darker) / double(total));
    }
  });
  return out;
}

inline void warn(std::vector<std::string>* sink, std::string msg) {
  if (sink) sink->push_back(std::move(msg));
}

inline std::array<int, 2> phase_offsets(int window, int phase) {
  const int half = window / 2;
  switch (phase) {
    case 1: return {half, half};
    case 2: return {0, half};
    case 3: return {half, 0};
    default: return {0, 0};
  }
}

}  // namespace detail

/// Box-mean of `source` over cells of side `window`, kept at the coarse grid resolution.
/// Edge cells average only their in-bounds pixels.
template <typename Scalar>
PooledChannelT<Scalar> pool_grid(const Plane<Scalar>& source, int window, int phase = 0,
                                 ChannelKind kind = ChannelKind::intensity) {
  if (window < 1) throw ConfigError("pool window must be >= 1");
  const int h = static_cast<int>(source.rows()), w = static_cast<int>(source.cols());
  PooledChannelT<Scalar> p;
  p.source = kind;
  p.window = window;
  p.phase = phase;
  const auto off = detail::phase_offsets(window, phase);
  p.offset_y = off[0];
  p.offset_x = off[1];
  const int gh = p.cell_y(h - 1) + 1, gw = p.cell_x(w - 1) + 1;
  Planed sum = Planed::Zero(gh, gw);
  Planed count = Planed::Zero(gh, gw);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      sum(p.cell_y(y), p.cell_x(x)) += source(y, x);
      count(p.cell_y(y), p.cell_x(x)) += 1.0;
    }
  p.grid = (sum / count).template cast<Scalar>();
  return p;
}

/// Pooled intensity context for each window. Windows larger than the level are
/// skipped and reported through `warnings`.
template <typename Scalar>
std::vector<PooledChannelT<Scalar>> pooled_context(const FeatureLevelT<Scalar>& level, const std::vector<int>& windows,
                                                   std::vector<std::string>* warnings = nullptr) {
  const int c = level.find(ChannelKind::intensity);
  if (c < 0) throw Error("level has no intensity channel");
  std::vector<PooledChannelT<Scalar>> out;
  for (int w : windows) {
    if (w > level.height() || w > level.width()) {
      detail::warn(warnings, "level " + std::to_string(level.scale_index) + ": pooled window " + std::to_string(w) +
                                 " exceeds level size, skipped");
      continue;
    }
    out.push_back(pool_grid(level.channels[c], w, 0, ChannelKind::intensity));
  }
  return out;
}

/// Descriptors for one level from the grayscale image at that level's resolution.
/// Base channels come first; remaining slots take pooled context ordered by
/// (grid phase, source channel, ascending window). Slots left over once every
/// combination is used stay zero.
template <typename Scalar>
FeatureLevelT<Scalar> extract_descriptors(const Plane<Scalar>& gray, int scale_index, int num_channels,
                                          const EncoderConfig& cfg, std::vector<std::string>* warnings = nullptr) {
  if (num_channels < 4) throw ConfigError("descriptor level needs at least 4 channels");
  FeatureLevelT<Scalar> level;
  level.scale_index = scale_index;
  level.divisor = level_divisor(scale_index);
  const int h = static_cast<int>(gray.rows()), w = static_cast<int>(gray.cols());

  level.channels.push_back((gray.template cast<double>() * cfg.intensity_gain).template cast<Scalar>());
  level.layout.push_back({ChannelKind::intensity});
  level.channels.push_back(detail::central_gradient(gray, true, cfg.gradient_gain));
  level.layout.push_back({ChannelKind::gradient_x});
  level.channels.push_back(detail::central_gradient(gray, false, cfg.gradient_gain));
  level.layout.push_back({ChannelKind::gradient_y});
  level.channels.push_back(detail::rank_transform(gray, cfg.rank_radius, cfg.rank_gain));
  level.layout.push_back({ChannelKind::rank});

  std::vector<int> windows;
  for (int win : cfg.pooled_windows) {
    if (win > h || win > w) {
      detail::warn(warnings, "level " + std::to_string(scale_index) + ": pooled window " + std::to_string(win) +
                                 " exceeds level size, skipped");
      continue;
    }
    windows.push_back(win);
  }
  std::sort(windows.begin(), windows.end());
  windows.erase(std::unique(windows.begin(), windows.end()), windows.end());

  constexpr std::array<int, 4> source_slots{0, 3, 1, 2};  // intensity, rank, gx, gy
  for (int phase = 0; phase < 4 && level.num_channels() < num_channels; ++phase) {
    for (int s : source_slots) {
      for (int win : windows) {
        if (level.num_channels() >= num_channels) break;
        if (phase > 0 && win / 2 == 0) continue;  // all phases coincide
        auto pooled = pool_grid(level.channels[s], win, phase, level.layout[s].kind);
        level.channels.push_back(pooled.materialize(h, w));
        level.layout.push_back({ChannelKind::pooled, level.layout[s].kind, win, phase});
      }
    }
  }
  if (level.num_channels() < num_channels) {
    detail::warn(warnings, "level " + std::to_string(scale_index) + ": " +
                               std::to_string(num_channels - level.num_channels()) + " descriptor slots left empty");
    while (level.num_channels() < num_channels) {
      level.channels.push_back(Plane<Scalar>::Zero(h, w));
      level.layout.push_back({ChannelKind::empty});
    }
  }
  return level;
}

/// Lazily extracts pyramid levels. The grayscale chain down to 1/64 is built
/// up front; descriptors for a level are computed on first request.
template <typename Scalar>
class PyramidBuilder {
 public:
  PyramidBuilder(const ImageT<Scalar>& image, EncoderConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (image.width() < 64 || image.height() < 64)
      throw Error("image smaller than 64x64 leaves the coarsest pyramid level empty");
    Plane<Scalar> g = image.gray();
    for (int i = 0; i < 3; ++i) g = downsample_half(g);
    gray_[0] = std::move(g);
    for (int k = 1; k < kPyramidLevels; ++k) gray_[k] = downsample_half(gray_[k - 1]);
  }

  const FeatureLevelT<Scalar>& level(int k, std::vector<std::string>* warnings = nullptr) {
    auto& slot = levels_[k - 1];
    if (!slot) slot = extract_descriptors(gray_[k - 1], k, cfg_.channels[k - 1], cfg_, warnings);
    return *slot;
  }

  bool has_level(int k) const { return levels_[k - 1].has_value(); }
  const Plane<Scalar>& gray(int k) const { return gray_[k - 1]; }

 private:
  EncoderConfig cfg_;
  std::array<Plane<Scalar>, kPyramidLevels> gray_;
  std::array<std::optional<FeatureLevelT<Scalar>>, kPyramidLevels> levels_;
};

template <typename Scalar>
FeaturePyramidT<Scalar> build_feature_pyramid(const ImageT<Scalar>& image, const EncoderConfig& cfg = {},
                                              std::vector<std::string>* warnings = nullptr) {
  PyramidBuilder<Scalar> builder(image, cfg);
  FeaturePyramidT<Scalar> pyr;
  for (int k = 1; k <= kPyramidLevels; ++k) pyr.levels[k - 1] = builder.level(k, warnings);
  return pyr;
}

}  // namespace hsm
