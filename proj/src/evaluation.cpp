#include "hsm/evaluation.hpp"

#include <charconv>
#include <sstream>

#include "hsm/augmentation.hpp"

namespace hsm {

double disparity_to_depth(double disparity, double baseline, double focal) {
  if (!(disparity > 0.0)) throw Error("disparity must be positive to convert to depth");
  return baseline * focal / disparity;
}

double depth_error(double depth, double disparity_error, double baseline, double focal) {
  if (!(depth > 0.0) || !(baseline > 0.0) || !(focal > 0.0) || disparity_error < 0.0)
    throw Error("depth_error needs positive depth, baseline and focal and a non-negative disparity error");
  return depth * depth * disparity_error / (baseline * focal);
}

std::string range_label(DepthRange r) {
  switch (r) {
    case DepthRange::short_range: return "S";
    case DepthRange::middle_range: return "M";
    case DepthRange::long_range: return "L";
    case DepthRange::all: return "All";
  }
  return "?";
}

std::optional<DepthRange> classify_depth(double z) {
  if (z < kShortRangeEnd) return DepthRange::short_range;
  if (z < kMiddleRangeEnd) return DepthRange::middle_range;
  if (z <= kLongRangeEnd) return DepthRange::long_range;
  return std::nullopt;
}

EvalReport evaluate_protocol(const DisparityMap& pred, const DisparityMap& gt, double baseline, double focal,
                             const std::vector<double>& taus) {
  if (!(baseline > 0.0) || !(focal > 0.0)) throw Error("depth-range protocol needs positive baseline and focal");
  if (pred.width() != gt.width() || pred.height() != gt.height())
    throw Error("prediction and ground truth differ in size");
  EvalReport report;
  report.baseline = baseline;
  report.focal = focal;
  std::map<DepthRange, Mask> masks;
  for (DepthRange r : {DepthRange::short_range, DepthRange::middle_range, DepthRange::long_range, DepthRange::all})
    masks[r] = Mask::Constant(gt.height(), gt.width(), false);
  for (Eigen::Index i = 0; i < gt.disparity.size(); ++i) {
    if (!gt.valid(i)) continue;
    masks[DepthRange::all](i) = true;
    if (!(gt.disparity(i) > 0.0f)) continue;  // infinitely far: All only
    if (auto r = classify_depth(disparity_to_depth(gt.disparity(i), baseline, focal))) masks[*r](i) = true;
  }
  for (auto& [range, mask] : masks) {
    const auto count = static_cast<std::size_t>(mask.count());
    report.pixel_counts[range] = count;
    if (count == 0) continue;
    // Ranges whose pixels all lack a prediction cannot report error magnitudes.
    Mask both = mask && pred.valid;
    if (both.count() == 0) continue;
    report.ranges[range] = compute_metrics(pred, gt, taus, kDefaultQuantiles, &mask);
  }
  return report;
}

EvalReport evaluate_all(const DisparityMap& pred, const DisparityMap& gt, const std::vector<double>& taus) {
  EvalReport report;
  report.ranges[DepthRange::all] = compute_metrics(pred, gt, taus);
  report.pixel_counts[DepthRange::all] = gt.valid_count();
  return report;
}

std::string format_tau(double tau) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, tau);
  return std::string(buf, res.ptr);
}

namespace {
std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}
}  // namespace

std::string to_csv(const EvalReport& report, const std::vector<double>& taus) {
  std::ostringstream os;
  os << "range";
  for (double t : taus) os << ",bad" << format_tau(t);
  os << ",avgerr,rms";
  for (int q : kDefaultQuantiles) os << ",A" << q;
  os << ",n\n";
  for (const auto& [range, m] : report.ranges) {
    os << range_label(range);
    for (double t : taus) os << ',' << num(m.bad.at(t));
    os << ',' << num(m.avgerr) << ',' << num(m.rms);
    for (int q : kDefaultQuantiles) os << ',' << num(m.quantiles.at(q));
    os << ',' << m.n_total << '\n';
  }
  return os.str();
}

SweepKind parse_sweep_kind(const std::string& s) {
  if (s == "rotation") return SweepKind::rotation;
  if (s == "ytrans" || s == "y-translation") return SweepKind::y_translation;
  if (s == "occlusion") return SweepKind::occlusion;
  throw ConfigError("unknown sweep kind '" + s + "'");
}

std::vector<double> default_sweep_grid(SweepKind kind) {
  std::vector<double> g;
  switch (kind) {
    case SweepKind::rotation:
      for (int i = 0; i <= 8; ++i) g.push_back(i * 0.05);
      break;
    case SweepKind::y_translation:
      for (int i = 0; i <= 8; ++i) g.push_back(i * 0.5);
      break;
    case SweepKind::occlusion:
      for (int i = 0; i <= 8; ++i) g.push_back(i * 25.0);
      break;
  }
  return g;
}

Image perturb_target(const Image& right, SweepKind kind, double param) {
  if (param == 0.0) return right;
  switch (kind) {
    case SweepKind::rotation: return ydisparity_warp(right, param, 0.0);
    case SweepKind::y_translation: return ydisparity_warp(right, 0.0, param);
    case SweepKind::occlusion: {
      const int side = static_cast<int>(std::lround(param));
      MaskRect rect{(right.width() - side) / 2, (right.height() - side) / 2, side, side};
      return asymmetric_mask(right, rect);
    }
  }
  return right;
}

std::vector<SweepPoint> robustness_sweep(const Matcher& matcher, const Image& left, const Image& right,
                                         const DisparityMap& gt, SweepKind kind, const std::vector<double>& grid,
                                         const Mask* region) {
  std::vector<SweepPoint> curve;
  for (double v : grid) {
    const DisparityMap pred = matcher(left, perturb_target(right, kind, v));
    curve.push_back({v, compute_metrics(pred, gt, {}, {}, region).avgerr});
  }
  return curve;
}

}  // namespace hsm
