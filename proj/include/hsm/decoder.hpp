#pragma once

// Volume decoder: residual box aggregation, volumetric pyramid pooling,
// coarse-to-fine fusion, reduction to a scalar cost volume and the
// soft-argmin (expected disparity) readout.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hsm/core.hpp"
#include "hsm/feature_volume.hpp"
#include "hsm/parallel.hpp"

namespace hsm {

enum class FuseMode { feature, cost };

/// Cost weight per descriptor kind; expanded to per-channel weights from a volume's layout.
struct KindWeights {
  double intensity = 1.0;
  double gradient = 1.0;
  double rank = 1.0;
  double pooled = 1.0;

  double operator()(const ChannelInfo& info) const {
    switch (info.kind) {
      case ChannelKind::intensity: return intensity;
      case ChannelKind::gradient_x:
      case ChannelKind::gradient_y: return gradient;
      case ChannelKind::rank: return rank;
      case ChannelKind::pooled: return pooled;
      case ChannelKind::empty: return 0.0;
    }
    return 0.0;
  }
};

struct DecoderConfig {
  int agg_blocks = 3;
  std::array<int, 3> window{3, 3, 3};  // (d, y, x)
  double alpha = 0.5;
  std::vector<int> vpp_grids{2, 4, 8};
  double gamma = 0.25;
  KindWeights weights;
  std::vector<double> channel_weights;  // explicit per-channel override when non-empty
  double beta = 1.0;
  FuseMode fuse_mode = FuseMode::feature;

  void validate() const {
    if (agg_blocks < 0) throw ConfigError("agg_blocks must be >= 0");
    for (int w : window)
      if (w < 1 || w % 2 == 0) throw ConfigError("aggregation window sides must be odd and >= 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1]");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0,1]");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be positive");
    for (int g : vpp_grids)
      if (g < 1) throw ConfigError("vpp grid sizes must be >= 1");
    for (double w : {weights.intensity, weights.gradient, weights.rank, weights.pooled})
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("channel weights must be finite and >= 0");
    for (double w : channel_weights)
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("channel weights must be finite and >= 0");
  }

  std::vector<double> resolve_weights(const std::vector<ChannelInfo>& layout) const {
    std::vector<double> w;
    if (!channel_weights.empty()) {
      if (channel_weights.size() != layout.size())
        throw ConfigError("channel weight count " + std::to_string(channel_weights.size()) +
                          " does not match volume channels " + std::to_string(layout.size()));
      w = channel_weights;
    } else {
      for (const auto& info : layout) w.push_back(weights(info));
    }
    bool any = false;
    for (double v : w) {
      if (!(v >= 0.0)) throw ConfigError("channel weights must be >= 0");
      any = any || v > 0.0;
    }
    if (!any) throw ConfigError("all channel weights are zero");
    return w;
  }
};

/// Scalar matching cost laid out (bin, row, col); lower is better.
template <typename Scalar>
struct CostVolumeT {
  int scale_index = 1;
  int divisor = 8;
  int stride = 1;
  int bins = 0;
  int height = 0;
  int width = 0;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> data;
  Mask reach;

  CostVolumeT() = default;
  CostVolumeT(int k, int div, int s, int d, int h, int w)
      : scale_index(k), divisor(div), stride(s), bins(d), height(h), width(w),
        data(Eigen::Array<Scalar, Eigen::Dynamic, 1>::Zero(Eigen::Index(d) * h * w)),
        reach(Mask::Constant(d, w, true)) {}

  std::size_t cells() const { return static_cast<std::size_t>(data.size()); }
  Eigen::Index index(int d, int y, int x) const { return (Eigen::Index(d) * height + y) * width + x; }
  Scalar& operator()(int d, int y, int x) { return data[index(d, y, x)]; }
  Scalar operator()(int d, int y, int x) const { return data[index(d, y, x)]; }
  double bin_disparity(int d) const { return double(d) * stride * divisor; }
};

using CostVolume = CostVolumeT<float>;

namespace detail {

/// Clamped box mean along one axis of a (n_outer, n, n_inner) block.
inline void box_axis(const std::vector<double>& in, std::vector<double>& out, int n_outer, int n, int n_inner,
                     int window) {
  const int r = window / 2;
  const double inv = 1.0 / window;
  for (int o = 0; o < n_outer; ++o)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n_inner; ++j) {
        double s = 0.0;
        for (int t = -r; t <= r; ++t) {
          const int ii = std::clamp(i + t, 0, n - 1);
          s += in[(std::size_t(o) * n + ii) * n_inner + j];
        }
        out[(std::size_t(o) * n + i) * n_inner + j] = s * inv;
      }
}

struct LerpTap {
  int i0 = 0;
  int i1 = 0;
  double t = 0.0;
};

inline LerpTap lerp_tap(double coord, int n) {
  coord = std::clamp(coord, 0.0, double(n - 1));
  LerpTap tap;
  tap.i0 = static_cast<int>(std::floor(coord));
  tap.i1 = std::min(tap.i0 + 1, n - 1);
  tap.t = coord - tap.i0;
  return tap;
}

/// Taps mapping fine pixel centres onto a grid `ratio` times coarser.
inline std::vector<LerpTap> spatial_taps(int n_fine, int n_coarse, double ratio) {
  std::vector<LerpTap> taps(n_fine);
  for (int i = 0; i < n_fine; ++i) taps[i] = lerp_tap((i + 0.5) / ratio - 0.5, n_coarse);
  return taps;
}

/// Taps resampling disparity bins in full-resolution units.
inline std::vector<LerpTap> disparity_taps(int bins_fine, double step_fine, int bins_coarse, double step_coarse) {
  std::vector<LerpTap> taps(bins_fine);
  for (int j = 0; j < bins_fine; ++j) taps[j] = lerp_tap(j * step_fine / step_coarse, bins_coarse);
  return taps;
}

inline double lerp(double a, double b, double t) { return t == 0.0 ? a : a + (b - a) * t; }

}  // namespace detail

/// R residual blocks of per-channel 3D box filtering: V <- (1-alpha) V + alpha box(V).
template <typename Scalar>
FeatureVolumeT<Scalar> aggregate(const FeatureVolumeT<Scalar>& in, const DecoderConfig& cfg) {
  cfg.validate();
  FeatureVolumeT<Scalar> out = in;
  if (cfg.agg_blocks == 0 || cfg.alpha == 0.0) return out;
  const std::size_t block = std::size_t(in.bins) * in.height * in.width;
  parallel_for(in.channels, [&](int c) {
    std::vector<double> v(block), a(block), b(block);
    const Scalar* src = in.data.data() + in.index(c, 0, 0, 0);
    for (std::size_t i = 0; i < block; ++i) v[i] = src[i];
    for (int r = 0; r < cfg.agg_blocks; ++r) {
      detail::box_axis(v, a, in.bins * in.height, in.width, 1, cfg.window[2]);
      detail::box_axis(a, b, in.bins, in.height, in.width, cfg.window[1]);
      detail::box_axis(b, a, 1, in.bins, in.height * in.width, cfg.window[0]);
      for (std::size_t i = 0; i < block; ++i) v[i] = (1.0 - cfg.alpha) * v[i] + cfg.alpha * a[i];
    }
    Scalar* dst = out.data.data() + out.index(c, 0, 0, 0);
    for (std::size_t i = 0; i < block; ++i) dst[i] = static_cast<Scalar>(v[i]);
  });
  return out;
}

/// Multi-grid average pooling over (y, x) cells spanning all bins, broadcast back and
/// blended: V <- (1-gamma) V + gamma mean_g(pool_g(V)). Grids larger than the volume are skipped.
template <typename Scalar>
FeatureVolumeT<Scalar> volumetric_pyramid_pool(const FeatureVolumeT<Scalar>& in, const DecoderConfig& cfg,
                                               std::vector<std::string>* warnings = nullptr) {
  cfg.validate();
  std::vector<int> grids;
  for (int g : cfg.vpp_grids) {
    if (g > in.height || g > in.width) {
      if (warnings)
        warnings->push_back("level " + std::to_string(in.scale_index) + ": vpp grid " + std::to_string(g) +
                            " exceeds volume size, skipped");
      continue;
    }
    grids.push_back(g);
  }
  FeatureVolumeT<Scalar> out = in;
  if (grids.empty() || cfg.gamma == 0.0) return out;

  parallel_for(in.channels, [&](int c) {
    Planed pooled = Planed::Zero(in.height, in.width);
    for (int g : grids) {
      std::vector<int> row_cell(in.height), col_cell(in.width);
      for (int y = 0; y < in.height; ++y) row_cell[y] = int((long long)y * g / in.height);
      for (int x = 0; x < in.width; ++x) col_cell[x] = int((long long)x * g / in.width);
      Planed sum = Planed::Zero(g, g), count = Planed::Zero(g, g);
      for (int d = 0; d < in.bins; ++d)
        for (int y = 0; y < in.height; ++y)
          for (int x = 0; x < in.width; ++x) {
            sum(row_cell[y], col_cell[x]) += in(c, d, y, x);
            count(row_cell[y], col_cell[x]) += 1.0;
          }
      const Planed mean = sum / count;
      for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) pooled(y, x) += mean(row_cell[y], col_cell[x]);
    }
    pooled /= double(grids.size());
    for (int d = 0; d < in.bins; ++d)
      for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x)
          out(c, d, y, x) = static_cast<Scalar>((1.0 - cfg.gamma) * double(in(c, d, y, x)) + cfg.gamma * pooled(y, x));
  });
  return out;
}

/// Adds the coarse volume (level k+1) to the fine volume (level k) after trilinear
/// resampling onto the fine (bin, row, col) grid. Disparity is resampled in full-resolution
/// pixel units; when the coarse level has twice the channels, channel pairs are averaged.
template <typename Scalar>
FeatureVolumeT<Scalar> upsample_fuse(const FeatureVolumeT<Scalar>& coarse, const FeatureVolumeT<Scalar>& fine) {
  if (coarse.scale_index != fine.scale_index + 1)
    throw Error("upsample_fuse needs adjacent levels, got " + std::to_string(coarse.scale_index) + " -> " +
                std::to_string(fine.scale_index));
  int group;
  if (coarse.channels == fine.channels)
    group = 1;
  else if (coarse.channels == 2 * fine.channels)
    group = 2;
  else
    throw Error("cannot fuse " + std::to_string(coarse.channels) + " channels into " + std::to_string(fine.channels));

  const double ratio = double(coarse.divisor) / fine.divisor;
  const auto ty = detail::spatial_taps(fine.height, coarse.height, ratio);
  const auto tx = detail::spatial_taps(fine.width, coarse.width, ratio);
  const auto td = detail::disparity_taps(fine.bins, double(fine.stride) * fine.divisor, coarse.bins,
                                         double(coarse.stride) * coarse.divisor);

  FeatureVolumeT<Scalar> out = fine;
  parallel_for(fine.channels, [&](int c) {
    for (int d = 0; d < fine.bins; ++d)
      for (int y = 0; y < fine.height; ++y)
        for (int x = 0; x < fine.width; ++x) {
          double acc = 0.0;
          for (int g = 0; g < group; ++g) {
            const int cc = c * group + g;
            auto at = [&](int dd, int yy, int xx) { return double(coarse(cc, dd, yy, xx)); };
            auto bil = [&](int dd) {
              const double top = detail::lerp(at(dd, ty[y].i0, tx[x].i0), at(dd, ty[y].i0, tx[x].i1), tx[x].t);
              const double bot = detail::lerp(at(dd, ty[y].i1, tx[x].i0), at(dd, ty[y].i1, tx[x].i1), tx[x].t);
              return detail::lerp(top, bot, ty[y].t);
            };
            acc += detail::lerp(bil(td[d].i0), bil(td[d].i1), td[d].t);
          }
          out(c, d, y, x) = static_cast<Scalar>(double(fine(c, d, y, x)) + acc / group);
        }
  });
  return out;
}

namespace detail {

/// Unreachable bins get the column's largest reachable cost plus one.
template <typename Scalar>
void fill_unreachable(CostVolumeT<Scalar>& cost) {
  parallel_for(cost.height, [&](int y) {
    for (int x = 0; x < cost.width; ++x) {
      double hi = -std::numeric_limits<double>::infinity();
      bool any_blocked = false;
      for (int d = 0; d < cost.bins; ++d) {
        if (cost.reach(d, x))
          hi = std::max(hi, double(cost(d, y, x)));
        else
          any_blocked = true;
      }
      if (!any_blocked || !std::isfinite(hi)) continue;
      for (int d = 0; d < cost.bins; ++d)
        if (!cost.reach(d, x)) cost(d, y, x) = static_cast<Scalar>(hi + 1.0);
    }
  });
}

}  // namespace detail

/// cost[d,y,x] = sum_c w_c |V[c,d,y,x]|.
template <typename Scalar>
CostVolumeT<Scalar> to_cost_volume(const FeatureVolumeT<Scalar>& vol, const DecoderConfig& cfg) {
  const auto w = cfg.resolve_weights(vol.layout.empty() ? std::vector<ChannelInfo>(vol.channels) : vol.layout);
  if (int(w.size()) != vol.channels) throw ConfigError("channel weight count does not match volume");
  CostVolumeT<Scalar> cost(vol.scale_index, vol.divisor, vol.stride, vol.bins, vol.height, vol.width);
  cost.reach = vol.reach;
  parallel_for(vol.bins * vol.height, [&](int row) {
    const int d = row / vol.height, y = row % vol.height;
    for (int x = 0; x < vol.width; ++x) {
      double s = 0.0;
      for (int c = 0; c < vol.channels; ++c)
        if (w[c] != 0.0) s += w[c] * std::abs(double(vol(c, d, y, x)));
      cost(d, y, x) = static_cast<Scalar>(s);
    }
  });
  detail::fill_unreachable(cost);
  return cost;
}

/// Cost-volume fusion: fine + trilinearly resampled coarse cost (the ablation path).
template <typename Scalar>
CostVolumeT<Scalar> upsample_fuse(const CostVolumeT<Scalar>& coarse, const CostVolumeT<Scalar>& fine) {
  if (coarse.scale_index != fine.scale_index + 1) throw Error("upsample_fuse needs adjacent levels");
  const double ratio = double(coarse.divisor) / fine.divisor;
  const auto ty = detail::spatial_taps(fine.height, coarse.height, ratio);
  const auto tx = detail::spatial_taps(fine.width, coarse.width, ratio);
  const auto td = detail::disparity_taps(fine.bins, double(fine.stride) * fine.divisor, coarse.bins,
                                         double(coarse.stride) * coarse.divisor);
  CostVolumeT<Scalar> out = fine;
  parallel_for(fine.bins, [&](int d) {
    for (int y = 0; y < fine.height; ++y)
      for (int x = 0; x < fine.width; ++x) {
        auto at = [&](int dd, int yy, int xx) { return double(coarse(dd, yy, xx)); };
        auto bil = [&](int dd) {
          const double top = detail::lerp(at(dd, ty[y].i0, tx[x].i0), at(dd, ty[y].i0, tx[x].i1), tx[x].t);
          const double bot = detail::lerp(at(dd, ty[y].i1, tx[x].i0), at(dd, ty[y].i1, tx[x].i1), tx[x].t);
          return detail::lerp(top, bot, ty[y].t);
        };
        out(d, y, x) = static_cast<Scalar>(double(fine(d, y, x)) + detail::lerp(bil(td[d].i0), bil(td[d].i1), td[d].t));
      }
  });
  detail::fill_unreachable(out);
  return out;
}

/// Softmax-weighted mean bin index at level resolution, p(d) ~ exp(-beta cost).
/// Entries are NaN where no bin of the column is reachable.
template <typename Scalar>
Planed expected_bins(const CostVolumeT<Scalar>& cost, double beta) {
  if (!(beta > 0.0)) throw ConfigError("softmax temperature beta must be positive");
  Planed out(cost.height, cost.width);
  parallel_for(cost.height, [&](int y) {
    std::vector<double> z(cost.bins);
    for (int x = 0; x < cost.width; ++x) {
      double lo = std::numeric_limits<double>::infinity();
      bool any = false;
      for (int d = 0; d < cost.bins; ++d) {
        if (!cost.reach(d, x)) continue;
        any = true;
        lo = std::min(lo, double(cost(d, y, x)));
      }
      if (!any) {
        out(y, x) = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      double num = 0.0, den = 0.0;
      for (int d = 0; d < cost.bins; ++d) {
        const double p = std::exp(-beta * (double(cost(d, y, x)) - lo));
        num += d * p;
        den += p;
      }
      out(y, x) = num / den;
    }
  });
  return out;
}

/// Output raster for a readout. `upscale` > 1 maps a pre-scaled working resolution
/// back to the original one (pixel grid and disparity units alike).
struct OutputGeometry {
  int height = 0;
  int width = 0;
  double upscale = 1.0;
};

/// Expected disparity in full-resolution pixels, bilinearly resampled to `geom`.
template <typename Scalar>
DisparityMapT<Scalar> expected_disparity(const CostVolumeT<Scalar>& cost, double beta, const OutputGeometry& geom) {
  const Planed bins = expected_bins(cost, beta);
  const double unit = double(cost.stride) * cost.divisor * geom.upscale;
  const double ratio = cost.divisor * geom.upscale;
  const auto ty = detail::spatial_taps(geom.height, cost.height, ratio);
  const auto tx = detail::spatial_taps(geom.width, cost.width, ratio);
  DisparityMapT<Scalar> out(geom.width, geom.height);
  parallel_for(geom.height, [&](int y) {
    for (int x = 0; x < geom.width; ++x) {
      const int ny = ty[y].t < 0.5 ? ty[y].i0 : ty[y].i1;
      const int nx = tx[x].t < 0.5 ? tx[x].i0 : tx[x].i1;
      if (std::isnan(bins(ny, nx))) {
        out.invalidate(y, x);
        continue;
      }
      double acc = 0.0, wsum = 0.0;
      const int ys[2] = {ty[y].i0, ty[y].i1};
      const int xs[2] = {tx[x].i0, tx[x].i1};
      const double wy[2] = {1.0 - ty[y].t, ty[y].t};
      const double wx[2] = {1.0 - tx[x].t, tx[x].t};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          const double w = wy[i] * wx[j];
          const double v = bins(ys[i], xs[j]);
          if (w == 0.0 || std::isnan(v)) continue;
          acc += w * v;
          wsum += w;
        }
      out.disparity(y, x) = static_cast<Scalar>(acc / wsum * unit);
    }
  });
  return out;
}

/// Expected disparity at the level's own resolution, in full-resolution pixels.
template <typename Scalar>
DisparityMapT<Scalar> expected_disparity(const CostVolumeT<Scalar>& cost, double beta) {
  const Planed bins = expected_bins(cost, beta);
  const double unit = double(cost.stride) * cost.divisor;
  DisparityMapT<Scalar> out(cost.width, cost.height);
  for (int y = 0; y < cost.height; ++y)
    for (int x = 0; x < cost.width; ++x) {
      if (std::isnan(bins(y, x)))
        out.invalidate(y, x);
      else
        out.disparity(y, x) = static_cast<Scalar>(bins(y, x) * unit);
    }
  return out;
}

}  // namespace hsm
