#include "hsm/rds.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace hsm {

SceneKind parse_scene_kind(const std::string& s) {
  if (s == "constant") return SceneKind::constant;
  if (s == "plane") return SceneKind::plane;
  if (s == "two-plane" || s == "two_plane") return SceneKind::two_plane;
  if (s == "step") return SceneKind::step;
  throw ConfigError("unknown scene kind '" + s + "'");
}

std::string to_string(SceneKind k) {
  switch (k) {
    case SceneKind::constant: return "constant";
    case SceneKind::plane: return "plane";
    case SceneKind::two_plane: return "two-plane";
    case SceneKind::step: return "step";
  }
  return "?";
}

namespace {

/// Planar surface patch in left-image coordinates: d(x, y) = a x + b y + c on [x0,x1) x [y0,y1).
struct Layer {
  double x0, x1;
  int y0, y1;
  double a, b, c;
  int texture;

  double disparity(double x, int y) const { return a * x + b * y + c; }
  bool covers(double x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

/// Dot texture on an extended lattice, sampled with linear interpolation along x.
class Texture {
 public:
  Texture(int width, int height, int margin, double sigma, std::mt19937_64& rng)
      : margin_(margin), values_(height, width + 2 * margin) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (Eigen::Index i = 0; i < values_.size(); ++i) values_(i) = uni(rng);
    if (sigma > 0.0) blur(sigma);
  }

  double operator()(double x, int y) const {
    const double u = std::clamp(x + margin_, 0.0, double(values_.cols() - 1));
    const int i0 = static_cast<int>(std::floor(u));
    const int i1 = std::min<int>(i0 + 1, values_.cols() - 1);
    const double t = u - i0;
    if (t == 0.0) return values_(y, i0);
    return values_(y, i0) + (values_(y, i1) - values_(y, i0)) * t;
  }

 private:
  void blur(double sigma) {
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * r + 1);
    double ks = 0.0;
    for (int i = -r; i <= r; ++i) ks += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (double& v : k) v /= ks;
    const int h = values_.rows(), w = values_.cols();
    Planed tmp(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += k[i + r] * values_(y, std::clamp(x + i, 0, w - 1));
        tmp(y, x) = s;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += k[i + r] * tmp(std::clamp(y + i, 0, h - 1), x);
        values_(y, x) = s;
      }
    // Restore the contrast of uniform noise.
    const double mean = values_.mean();
    const double sd = std::sqrt((values_ - mean).square().mean());
    const double gain = sd > 0.0 ? std::sqrt(1.0 / 12.0) / sd : 1.0;
    values_ = ((values_ - mean) * gain + 0.5).max(0.0).min(1.0);
  }

  int margin_;
  Planed values_;
};

std::vector<Layer> scene_layers(const SceneParams& p) {
  const double w = p.width;
  const int h = p.height;
  const double big = 1e9;
  switch (p.kind) {
    case SceneKind::constant: return {{-big, big, 0, h, 0.0, 0.0, p.d0, 0}};
    case SceneKind::plane: return {{-big, big, 0, h, p.plane_a, p.plane_b, p.plane_c, 0}};
    case SceneKind::two_plane: {
      const double bf = p.baseline * p.focal;
      return {{-big, big, 0, h, 0.0, 0.0, bf / p.far_depth, 0},
              {std::floor(w * 3 / 8), std::floor(w * 5 / 8), h / 4, 3 * h / 4, 0.0, 0.0, bf / p.near_depth, 1}};
    }
    case SceneKind::step: {
      const double mid = std::floor(w / 2);
      return {{-big, mid, 0, h, 0.0, 0.0, p.step_left, 0}, {mid, big, 0, h, 0.0, 0.0, p.step_right, 1}};
    }
  }
  return {};
}

/// Layer index visible in the right view at continuous column xr, or -1.
int visible_layer(const std::vector<Layer>& layers, double xr, int y, double* x_left) {
  int best = -1;
  double best_d = -1e300;
  for (int i = 0; i < static_cast<int>(layers.size()); ++i) {
    const Layer& L = layers[i];
    if (L.a >= 1.0) continue;
    const double xl = (xr + L.b * y + L.c) / (1.0 - L.a);
    if (!L.covers(xl, y)) continue;
    const double d = L.disparity(xl, y);
    if (d > best_d) {
      best_d = d;
      best = i;
      *x_left = xl;
    }
  }
  return best;
}

int left_layer(const std::vector<Layer>& layers, int x, int y) {
  for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i)
    if (layers[i].covers(x, y)) return i;
  return -1;
}

}  // namespace

double max_scene_disparity(const SceneParams& p) {
  double hi = 0.0;
  for (const Layer& L : scene_layers(p)) {
    const double xa = std::max(L.x0, 0.0), xb = std::min(L.x1, double(p.width - 1));
    const double ya = std::max(L.y0, 0), yb = std::min(L.y1 - 1, p.height - 1);
    for (double x : {xa, xb})
      for (double y : {ya, yb}) hi = std::max(hi, L.a * x + L.b * y + L.c);
  }
  return hi;
}

SyntheticScene generate(const SceneParams& p) {
  if (p.width < 4 || p.height < 1) throw Error("scene too small");
  if (p.channels != 1 && p.channels != 3) throw Error("scene must have 1 or 3 channels");
  const double dmax = max_scene_disparity(p);
  if (!(dmax < p.width / 4.0))
    throw Error("scene disparity " + std::to_string(dmax) + " must stay below width/4 = " +
                std::to_string(p.width / 4.0));
  const auto layers = scene_layers(p);
  for (const Layer& L : layers)
    if (L.a >= 1.0) throw Error("plane slope along x must be below 1");

  std::mt19937_64 rng(p.seed);
  std::vector<Texture> textures;
  const int margin = p.width;
  for (std::size_t i = 0; i < layers.size(); ++i) textures.emplace_back(p.width, p.height, margin, p.smoothing, rng);
  std::vector<double> tint(p.channels, 1.0);
  if (p.channels == 3) {
    std::uniform_real_distribution<double> uni(0.6, 1.0);
    for (double& t : tint) t = uni(rng);
  }

  Planef left(p.height, p.width), right(p.height, p.width);
  DisparityMap gt(p.width, p.height);
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      const int li = left_layer(layers, x, y);
      left(y, x) = static_cast<float>(textures[layers[li].texture](x, y));
      const double d = layers[li].disparity(x, y);
      gt.disparity(y, x) = static_cast<float>(d);
      double xl_seen = 0.0;
      const double xr = x - d;
      const bool in_view = xr >= 0.0 && xr <= p.width - 1;
      if (!in_view || visible_layer(layers, xr, y, &xl_seen) != li) gt.invalidate(y, x);
    }
    for (int xr = 0; xr < p.width; ++xr) {
      double xl = 0.0;
      const int vi = visible_layer(layers, xr, y, &xl);
      right(y, xr) = vi < 0 ? 0.5f : static_cast<float>(textures[layers[vi].texture](xl, y));
    }
  }

  SyntheticScene scene;
  scene.params = p;
  scene.gt = std::move(gt);
  if (p.channels == 1) {
    scene.left = Image::from_plane(std::move(left));
    scene.right = Image::from_plane(std::move(right));
  } else {
    std::vector<Planef> lp, rp;
    for (double t : tint) {
      lp.push_back((left * float(t)).eval());
      rp.push_back((right * float(t)).eval());
    }
    scene.left = Image::from_planes(std::move(lp));
    scene.right = Image::from_planes(std::move(rp));
  }
  return scene;
}

}  // namespace hsm
