#pragma once

#include <array>
#include <string>

#include "hsm/core.hpp"
#include "hsm/parallel.hpp"
#include "hsm/pyramid.hpp"

namespace hsm {

/// Disparity stride per level, in level pixels per bin.
struct StridePolicy {
  std::array<int, kPyramidLevels> strides{2, 2, 1, 1};

  int operator()(int k) const {
    if (k < 1 || k > kPyramidLevels) throw ConfigError("pyramid level out of range: " + std::to_string(k));
    return strides[k - 1];
  }

  void validate() const {
    for (int s : strides)
      if (s < 1) throw ConfigError("disparity stride must be >= 1");
  }

  static StridePolicy uniform(int s) { return StridePolicy{{s, s, s, s}}; }

  /// Bin counts in the ratio {1/4, 1/2, 1, 1} across levels 1..4.
  static StridePolicy ratio_table() { return StridePolicy{{32, 8, 2, 1}}; }
};

/// Bins needed so that bins * stride * divisor covers max_disparity full-resolution pixels.
inline int disparity_bins(int max_disparity, int divisor, int stride) {
  return ceil_div(max_disparity, divisor * stride);
}

/// Signed descriptor differences laid out (channel, bin, row, col).
template <typename Scalar>
struct FeatureVolumeT {
  int scale_index = 1;
  int divisor = 8;
  int stride = 1;
  int channels = 0;
  int bins = 0;
  int height = 0;
  int width = 0;
  std::vector<ChannelInfo> layout;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> data;
  Mask reach;  // (bin, col): true when col - bin * stride >= 0

  using SlabMap = Eigen::Map<Plane<Scalar>>;
  using ConstSlabMap = Eigen::Map<const Plane<Scalar>>;

  FeatureVolumeT() = default;
  FeatureVolumeT(int k, int div, int s, int c, int d, int h, int w)
      : scale_index(k), divisor(div), stride(s), channels(c), bins(d), height(h), width(w),
        data(Eigen::Array<Scalar, Eigen::Dynamic, 1>::Zero(Eigen::Index(c) * d * h * w)),
        reach(Mask::Constant(d, w, true)) {}

  std::size_t cells() const { return static_cast<std::size_t>(data.size()); }
  Eigen::Index index(int c, int d, int y, int x) const {
    return ((Eigen::Index(c) * bins + d) * height + y) * width + x;
  }
  Scalar& operator()(int c, int d, int y, int x) { return data[index(c, d, y, x)]; }
  Scalar operator()(int c, int d, int y, int x) const { return data[index(c, d, y, x)]; }

  SlabMap slab(int c, int d) { return SlabMap(data.data() + index(c, d, 0, 0), height, width); }
  ConstSlabMap slab(int c, int d) const { return ConstSlabMap(data.data() + index(c, d, 0, 0), height, width); }

  /// Full-resolution disparity represented by bin d.
  double bin_disparity(int d) const { return double(d) * stride * divisor; }

  bool same_shape(const FeatureVolumeT& o) const {
    return channels == o.channels && bins == o.bins && height == o.height && width == o.width;
  }
};

using FeatureVolume = FeatureVolumeT<float>;

/// V[c,d,y,x] = left[c,y,x] - right[c,y,x - d*stride], right sampled clamp-to-edge.
template <typename Scalar>
FeatureVolumeT<Scalar> build_feature_volume(const FeatureLevelT<Scalar>& left, const FeatureLevelT<Scalar>& right,
                                            int max_disparity, int stride) {
  if (left.scale_index != right.scale_index || left.num_channels() != right.num_channels() ||
      left.height() != right.height() || left.width() != right.width())
    throw Error("left/right descriptor levels differ in shape or scale");
  if (max_disparity <= 0) throw ConfigError("max disparity must be positive");
  if (stride < 1) throw ConfigError("disparity stride must be >= 1");

  const int bins = disparity_bins(max_disparity, left.divisor, stride);
  FeatureVolumeT<Scalar> vol(left.scale_index, left.divisor, stride, left.num_channels(), bins, left.height(),
                             left.width());
  vol.layout = left.layout;
  for (int d = 0; d < bins; ++d)
    for (int x = 0; x < vol.width; ++x) vol.reach(d, x) = x - d * stride >= 0;

  parallel_for(bins * vol.height, [&](int row) {
    const int d = row / vol.height, y = row % vol.height;
    const int shift = d * stride;
    for (int c = 0; c < vol.channels; ++c) {
      const auto& fl = left.channels[c];
      const auto& fr = right.channels[c];
      Scalar* out = vol.data.data() + vol.index(c, d, y, 0);
      for (int x = 0; x < vol.width; ++x) out[x] = fl(y, x) - fr(y, std::max(x - shift, 0));
    }
  });
  return vol;
}

template <typename Scalar>
FeatureVolumeT<Scalar> build_feature_volume(const FeatureLevelT<Scalar>& left, const FeatureLevelT<Scalar>& right,
                                            int max_disparity, const StridePolicy& policy) {
  return build_feature_volume(left, right, max_disparity, policy(left.scale_index));
}

}  // namespace hsm
