#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hsm {

/// Row-major 2D array indexed (row, col) = (y, x).
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Planef = Plane<float>;
using Planed = Plane<double>;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input bytes. `offset` is the byte position the reader stopped at.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Planar raster with 1 or 3 channels. Photometric values are nominally in [0,1].
template <typename Scalar>
class ImageT {
 public:
  using scalar_type = Scalar;

  ImageT() = default;
  ImageT(int width, int height, int channels, Scalar fill = Scalar(0)) : width_(width), height_(height) {
    if (channels != 1 && channels != 3) throw Error("image must have 1 or 3 channels");
    if (width < 0 || height < 0) throw Error("negative image size");
    planes_.assign(channels, Plane<Scalar>::Constant(height, width, fill));
  }

  static ImageT from_plane(Plane<Scalar> plane) {
    ImageT img;
    img.width_ = static_cast<int>(plane.cols());
    img.height_ = static_cast<int>(plane.rows());
    img.planes_.push_back(std::move(plane));
    return img;
  }

  static ImageT from_planes(std::vector<Plane<Scalar>> planes) {
    if (planes.size() != 1 && planes.size() != 3) throw Error("image must have 1 or 3 channels");
    ImageT img;
    img.height_ = static_cast<int>(planes.front().rows());
    img.width_ = static_cast<int>(planes.front().cols());
    for (const auto& p : planes)
      if (p.rows() != img.height_ || p.cols() != img.width_) throw Error("channel shape mismatch");
    img.planes_ = std::move(planes);
    return img;
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return static_cast<int>(planes_.size()); }
  bool empty() const { return planes_.empty() || width_ == 0 || height_ == 0; }

  Plane<Scalar>& channel(int c) { return planes_[c]; }
  const Plane<Scalar>& channel(int c) const { return planes_[c]; }

  Scalar& operator()(int c, int y, int x) { return planes_[c](y, x); }
  Scalar operator()(int c, int y, int x) const { return planes_[c](y, x); }

  /// Luma with BT.601 weights; single-channel images are returned as-is.
  Plane<Scalar> gray() const {
    if (channels() == 1) return planes_[0];
    Plane<Scalar> out(height_, width_);
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x)
        out(y, x) = static_cast<Scalar>(0.299 * planes_[0](y, x) + 0.587 * planes_[1](y, x) +
                                        0.114 * planes_[2](y, x));
    return out;
  }

  bool all_finite() const {
    for (const auto& p : planes_)
      if (!p.isFinite().all()) return false;
    return true;
  }

  template <typename Other>
  ImageT<Other> cast() const {
    std::vector<Plane<Other>> planes;
    for (const auto& p : planes_) planes.push_back(p.template cast<Other>());
    return ImageT<Other>::from_planes(std::move(planes));
  }

  friend bool operator==(const ImageT& a, const ImageT& b) {
    if (a.width_ != b.width_ || a.height_ != b.height_ || a.channels() != b.channels()) return false;
    for (int c = 0; c < a.channels(); ++c)
      if (!(a.planes_[c] == b.planes_[c]).all()) return false;
    return true;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Plane<Scalar>> planes_;
};

using Image = ImageT<float>;

/// Disparity in pixels plus a validity mask. Invalid pixels carry +Inf.
template <typename Scalar>
struct DisparityMapT {
  Plane<Scalar> disparity;
  Mask valid;

  DisparityMapT() = default;
  DisparityMapT(int width, int height, Scalar fill = Scalar(0))
      : disparity(Plane<Scalar>::Constant(height, width, fill)), valid(Mask::Constant(height, width, true)) {}

  /// Non-finite entries become invalid.
  static DisparityMapT from_plane(Plane<Scalar> values) {
    DisparityMapT m;
    m.valid = values.isFinite();
    m.disparity = std::move(values);
    m.disparity = m.valid.select(m.disparity, std::numeric_limits<Scalar>::infinity());
    return m;
  }

  int width() const { return static_cast<int>(disparity.cols()); }
  int height() const { return static_cast<int>(disparity.rows()); }
  bool empty() const { return disparity.size() == 0; }
  std::size_t valid_count() const { return static_cast<std::size_t>(valid.count()); }

  void invalidate(int y, int x) {
    valid(y, x) = false;
    disparity(y, x) = std::numeric_limits<Scalar>::infinity();
  }

  /// Equal masks and bitwise-equal values on valid pixels.
  friend bool operator==(const DisparityMapT& a, const DisparityMapT& b) {
    if (a.width() != b.width() || a.height() != b.height()) return false;
    if (!(a.valid == b.valid).all()) return false;
    for (Eigen::Index i = 0; i < a.disparity.size(); ++i)
      if (a.valid(i) && a.disparity(i) != b.disparity(i)) return false;
    return true;
  }
};

using DisparityMap = DisparityMapT<float>;

inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace hsm
