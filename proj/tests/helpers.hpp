#pragma once

#include <cstring>
#include <random>

#include "hsm/core.hpp"

namespace hsm::test {

inline Planef random_plane(std::mt19937_64& rng, int h, int w, float lo = 0.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  Planef p(h, w);
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = u(rng);
  return p;
}

inline Image random_image(std::mt19937_64& rng, int w, int h, int channels = 1) {
  std::vector<Planef> planes;
  for (int c = 0; c < channels; ++c) planes.push_back(random_plane(rng, h, w));
  return Image::from_planes(std::move(planes));
}

inline bool bitwise_equal(const Planef& a, const Planef& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.data(), b.data(), sizeof(float) * a.size()) == 0;
}

}  // namespace hsm::test
