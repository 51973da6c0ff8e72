#pragma once

// Disparity error metrics, the stopping-distance depth-range protocol and
// calibration-error robustness sweeps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hsm/core.hpp"

namespace hsm {

inline const std::vector<double> kDefaultTaus{1.0, 2.0, 4.0};
inline const std::vector<int> kDefaultQuantiles{90, 95, 99};

struct Metrics {
  std::map<double, double> bad;  // tau -> percent of evaluated pixels with |e| > tau
  double avgerr = 0.0;
  double rms = 0.0;
  std::map<int, double> quantiles;  // q -> nearest-rank q-th percentile of |e|
  std::size_t n_valid = 0;          // gt-valid and prediction-valid pixels
  std::size_t n_total = 0;          // gt-valid pixels (denominator of bad-tau)
};

/// bad-tau counts prediction-invalid pixels as bad; avgerr, rms and quantiles use only
/// pixels valid in both maps. `region`, when given, restricts evaluation further.
template <typename Scalar>
Metrics compute_metrics(const DisparityMapT<Scalar>& pred, const DisparityMapT<Scalar>& gt,
                        const std::vector<double>& taus = kDefaultTaus,
                        const std::vector<int>& quantiles = kDefaultQuantiles, const Mask* region = nullptr) {
  if (pred.width() != gt.width() || pred.height() != gt.height())
    throw Error("prediction and ground truth differ in size");
  if (region && (region->rows() != gt.height() || region->cols() != gt.width()))
    throw Error("evaluation region differs in size");
  std::vector<double> errors;
  std::size_t total = 0, invalid_pred = 0;
  std::vector<std::size_t> over(taus.size(), 0);
  double sum = 0.0, sum_sq = 0.0;
  for (Eigen::Index i = 0; i < gt.disparity.size(); ++i) {
    if (!gt.valid(i) || (region && !(*region)(i))) continue;
    ++total;
    if (!pred.valid(i)) {
      ++invalid_pred;
      continue;
    }
    const double e = std::abs(double(pred.disparity(i)) - double(gt.disparity(i)));
    errors.push_back(e);
    sum += e;
    sum_sq += e * e;
    for (std::size_t t = 0; t < taus.size(); ++t) over[t] += e > taus[t];
  }
  if (errors.empty()) throw Error("no pixel is valid in both prediction and ground truth");
  Metrics m;
  m.n_total = total;
  m.n_valid = errors.size();
  const double n = double(errors.size());
  m.avgerr = sum / n;
  m.rms = std::sqrt(sum_sq / n);
  for (std::size_t t = 0; t < taus.size(); ++t)
    m.bad[taus[t]] = 100.0 * double(over[t] + invalid_pred) / double(total);
  std::sort(errors.begin(), errors.end());
  for (int q : quantiles) {
    if (q < 1 || q > 100) throw Error("quantile must lie in 1..100");
    const std::size_t rank = (std::size_t(q) * errors.size() + 99) / 100;  // ceil(q/100 * n)
    m.quantiles[q] = errors[std::max<std::size_t>(rank, 1) - 1];
  }
  return m;
}

/// Z = b f / d.
double disparity_to_depth(double disparity, double baseline, double focal);

/// First-order depth error dZ = Z^2 dd / (b f).
double depth_error(double depth, double disparity_error, double baseline, double focal);

enum class DepthRange { short_range, middle_range, long_range, all };

inline constexpr double kShortRangeEnd = 25.0;
inline constexpr double kMiddleRangeEnd = 60.0;
inline constexpr double kLongRangeEnd = 115.0;

std::string range_label(DepthRange r);

struct EvalReport {
  std::map<DepthRange, Metrics> ranges;  // absent key = no pixel in that range
  std::map<DepthRange, std::size_t> pixel_counts;
  double baseline = 0.0;
  double focal = 0.0;

  const Metrics* find(DepthRange r) const {
    auto it = ranges.find(r);
    return it == ranges.end() ? nullptr : &it->second;
  }
};

/// Range membership of one ground-truth depth; depths beyond 115 m belong to All only.
std::optional<DepthRange> classify_depth(double depth);

/// Partitions gt-valid pixels by ground-truth depth into S [0,25), M [25,60), L [60,115]
/// and All, and evaluates each populated range.
EvalReport evaluate_protocol(const DisparityMap& pred, const DisparityMap& gt, double baseline, double focal,
                             const std::vector<double>& taus = kDefaultTaus);

/// Metrics over all gt-valid pixels only (no depth partition).
EvalReport evaluate_all(const DisparityMap& pred, const DisparityMap& gt, const std::vector<double>& taus = kDefaultTaus);

/// CSV with header range,bad<tau>...,avgerr,rms,A90,A95,A99,n.
std::string to_csv(const EvalReport& report, const std::vector<double>& taus = kDefaultTaus);

std::string format_tau(double tau);

// ---------------------------------------------------------------------------

enum class SweepKind { rotation, y_translation, occlusion };

SweepKind parse_sweep_kind(const std::string& s);

/// Rotation 0..0.4 deg step 0.05; y-translation 0..4 px step 0.5; occlusion patch side 0..200 px step 25.
std::vector<double> default_sweep_grid(SweepKind kind);

using Matcher = std::function<DisparityMap(const Image& left, const Image& right)>;

struct SweepPoint {
  double param = 0.0;
  double avgerr = 0.0;
};

/// Perturbs only the target (right) view at each grid value and records avgerr.
/// Occlusion patches are centred squares filled with the image's channel means.
std::vector<SweepPoint> robustness_sweep(const Matcher& matcher, const Image& left, const Image& right,
                                         const DisparityMap& gt, SweepKind kind, const std::vector<double>& grid,
                                         const Mask* region = nullptr);

/// Applies one sweep perturbation to the target view.
Image perturb_target(const Image& right, SweepKind kind, double param);

}  // namespace hsm
