#include "hsm/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hsm {

RigidWarp::RigidWarp(int width, int height, double rotation_deg, double ty_px)
    : centre(0.5 * (width - 1), 0.5 * (height - 1)), ty(ty_px) {
  const double t = rotation_deg * std::numbers::pi / 180.0;
  cos_t = std::cos(t);
  sin_t = std::sin(t);
}

Eigen::Vector2d RigidWarp::map(const Eigen::Vector2d& p) const {
  const Eigen::Vector2d q = p - centre;
  return Eigen::Vector2d(cos_t * q.x() - sin_t * q.y(), sin_t * q.x() + cos_t * q.y()) + centre +
         Eigen::Vector2d(0.0, ty);
}

namespace {

double sample_bilinear(const Planef& p, double x, double y) {
  const int w = static_cast<int>(p.cols()), h = static_cast<int>(p.rows());
  x = std::clamp(x, 0.0, double(w - 1));
  y = std::clamp(y, 0.0, double(h - 1));
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double tx = x - x0, ty = y - y0;
  auto row = [&](int yy) {
    const double a = p(yy, x0);
    return tx == 0.0 ? a : a + (double(p(yy, x1)) - a) * tx;
  };
  const double top = row(y0);
  return ty == 0.0 ? top : top + (row(y1) - top) * ty;
}

}  // namespace

Image ydisparity_warp(const Image& target, double rotation_deg, double ty) {
  if (!std::isfinite(rotation_deg) || !std::isfinite(ty)) throw Error("warp parameters must be finite");
  const RigidWarp warp(target.width(), target.height(), rotation_deg, ty);
  Image out(target.width(), target.height(), target.channels());
  for (int y = 0; y < target.height(); ++y)
    for (int x = 0; x < target.width(); ++x) {
      const Eigen::Vector2d src = warp.map(Eigen::Vector2d(x, y));
      for (int c = 0; c < target.channels(); ++c)
        out(c, y, x) = static_cast<float>(sample_bilinear(target.channel(c), src.x(), src.y()));
    }
  return out;
}

Image asymmetric_chromatic(const Image& image, const Chromatic& cc) {
  if (!(cc.brightness > 0.0) || !(cc.gamma > 0.0) || !(cc.contrast > 0.0))
    throw Error("chromatic parameters must be positive");
  Image out = image;
  for (int c = 0; c < image.channels(); ++c) {
    auto& p = out.channel(c);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double lit = cc.brightness * std::max(0.0, double(p(i)));
      const double v = (std::pow(lit, cc.gamma) - 0.5) * cc.contrast + 0.5;
      p(i) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

Image asymmetric_mask(const Image& target, const MaskRect& rect) {
  const int x0 = std::max(rect.x, 0), y0 = std::max(rect.y, 0);
  const int x1 = std::min(rect.x + rect.width, target.width());
  const int y1 = std::min(rect.y + rect.height, target.height());
  if (x0 >= x1 || y0 >= y1) throw Error("mask rectangle does not intersect the image");
  Image out = target;
  for (int c = 0; c < target.channels(); ++c) {
    const auto& src = target.channel(c);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < src.size(); ++i) sum += src(i);
    const float mean = static_cast<float>(sum / double(src.size()));
    out.channel(c).block(y0, x0, y1 - y0, x1 - x0).setConstant(mean);
  }
  return out;
}

StereoTriple symmetric_scale_crop(const Image& left, const Image& right, const DisparityMap& gt, const ScaleCrop& sc) {
  if (!(sc.scale > 0.0)) throw Error("scale must be positive");
  if (left.width() != right.width() || left.height() != right.height() || gt.width() != left.width() ||
      gt.height() != left.height())
    throw Error("scale/crop inputs differ in size");
  const int nw = static_cast<int>(std::lround(left.width() * sc.scale));
  const int nh = static_cast<int>(std::lround(left.height() * sc.scale));
  if (sc.crop_x < 0 || sc.crop_y < 0 || sc.crop_width <= 0 || sc.crop_height <= 0 || sc.crop_x + sc.crop_width > nw ||
      sc.crop_y + sc.crop_height > nh)
    throw Error("crop window exceeds the scaled image (" + std::to_string(nw) + "x" + std::to_string(nh) + ")");
  const double sx = double(nw) / left.width(), sy = double(nh) / left.height();

  auto src_coord = [](int i, double s) { return (i + 0.5) / s - 0.5; };
  auto resample = [&](const Image& img) {
    Image out(sc.crop_width, sc.crop_height, img.channels());
    for (int y = 0; y < sc.crop_height; ++y)
      for (int x = 0; x < sc.crop_width; ++x) {
        const double u = src_coord(x + sc.crop_x, sx), v = src_coord(y + sc.crop_y, sy);
        for (int c = 0; c < img.channels(); ++c)
          out(c, y, x) = static_cast<float>(sample_bilinear(img.channel(c), u, v));
      }
    return out;
  };

  StereoTriple t;
  t.left = resample(left);
  t.right = resample(right);
  t.gt = DisparityMap(sc.crop_width, sc.crop_height);
  for (int y = 0; y < sc.crop_height; ++y)
    for (int x = 0; x < sc.crop_width; ++x) {
      const int u = std::clamp(static_cast<int>(std::lround(src_coord(x + sc.crop_x, sx))), 0, gt.width() - 1);
      const int v = std::clamp(static_cast<int>(std::lround(src_coord(y + sc.crop_y, sy))), 0, gt.height() - 1);
      if (gt.valid(v, u))
        t.gt.disparity(y, x) = static_cast<float>(double(gt.disparity(v, u)) * sx);
      else
        t.gt.invalidate(y, x);
    }
  return t;
}

AugmentPreset parse_augment_preset(const std::string& s) {
  if (s == "identity") return AugmentPreset::identity;
  if (s == "training") return AugmentPreset::training;
  if (s == "sweep") return AugmentPreset::sweep;
  throw ConfigError("unknown augmentation preset '" + s + "'");
}

SamplingConfig SamplingConfig::for_preset(AugmentPreset preset, int width, int height) {
  SamplingConfig cfg;
  cfg.preset = preset;
  cfg.image_width = width;
  cfg.image_height = height;
  if (preset == AugmentPreset::sweep) {
    cfg.ydisp_chance = 1.0;
    cfg.max_rotation_deg = 0.4;
    cfg.max_ty = 4.0;
    cfg.mask_chance = 0.0;
  }
  return cfg;
}

AugmentationSpec sample_spec(std::mt19937_64& rng, const SamplingConfig& cfg) {
  AugmentationSpec spec;
  if (cfg.preset == AugmentPreset::identity) return spec;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  auto coin = [&](double p) { return unit(rng) < p; };

  if (coin(cfg.ydisp_chance))
    spec.ydisp = YDisparity{uniform(0.0, cfg.max_rotation_deg), uniform(0.0, cfg.max_ty)};

  if (cfg.preset == AugmentPreset::training) {
    auto chroma = [&] {
      return Chromatic{uniform(cfg.brightness_lo, cfg.brightness_hi), uniform(cfg.gamma_lo, cfg.gamma_hi),
                       uniform(cfg.contrast_lo, cfg.contrast_hi)};
    };
    spec.chromatic_left = chroma();
    spec.chromatic_right = chroma();
  }

  const bool masked = coin(cfg.mask_chance);
  if (masked && cfg.image_width > 0 && cfg.image_height > 0) {
    std::uniform_int_distribution<int> side(cfg.mask_lo, cfg.mask_hi);
    MaskRect r;
    r.width = side(rng);
    r.height = side(rng);
    r.x = std::uniform_int_distribution<int>(0, std::max(0, cfg.image_width - r.width))(rng);
    r.y = std::uniform_int_distribution<int>(0, std::max(0, cfg.image_height - r.height))(rng);
    spec.mask = r;
  }

  if (cfg.scale_crop && cfg.image_width > 0 && cfg.image_height > 0) {
    // Smallest scale whose result still contains the crop window.
    const double need = std::max(double(cfg.crop_width) / cfg.image_width, double(cfg.crop_height) / cfg.image_height);
    const double lo = std::max(cfg.scale_lo, need * 1.0001);
    if (lo <= cfg.scale_hi) {
      ScaleCrop sc;
      sc.scale = uniform(lo, cfg.scale_hi);
      sc.crop_width = cfg.crop_width;
      sc.crop_height = cfg.crop_height;
      const int nw = static_cast<int>(std::lround(cfg.image_width * sc.scale));
      const int nh = static_cast<int>(std::lround(cfg.image_height * sc.scale));
      sc.crop_x = std::uniform_int_distribution<int>(0, std::max(0, nw - sc.crop_width))(rng);
      sc.crop_y = std::uniform_int_distribution<int>(0, std::max(0, nh - sc.crop_height))(rng);
      spec.symmetric = sc;
    }
  }
  return spec;
}

AugmentedPair apply_spec(const Image& left, const Image& right, const AugmentationSpec& spec) {
  AugmentedPair out{left, right};
  if (spec.chromatic_left) out.left = asymmetric_chromatic(out.left, *spec.chromatic_left);
  if (spec.chromatic_right) out.right = asymmetric_chromatic(out.right, *spec.chromatic_right);
  if (spec.ydisp) out.right = ydisparity_warp(out.right, spec.ydisp->rotation_deg, spec.ydisp->ty);
  if (spec.mask) out.right = asymmetric_mask(out.right, *spec.mask);
  return out;
}

}  // namespace hsm
