// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "hsm/augmentation.hpp"
#include "hsm/config_io.hpp"
#include "hsm/decoder.hpp"
#include "hsm/evaluation.hpp"
#include "hsm/pipeline.hpp"
#include "hsm/raster_io.hpp"
#include "hsm/rds.hpp"
#include "hsm/tuner.hpp"

using namespace hsm;

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 512;
constexpr int kMargin = 32;
constexpr double kTexture = 16.0;

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail, double seconds) {
  std::printf("%s %2d %s: %s (%.1f s)\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++failures;
}

void criterion(int id, const std::string& name, const std::function<bool(std::string&)>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  report(id, name, ok, detail, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::uint64_t ulp_distance(double a, double b) {
  const auto ia = std::bit_cast<std::int64_t>(a), ib = std::bit_cast<std::int64_t>(b);
  return ia > ib ? std::uint64_t(ia - ib) : std::uint64_t(ib - ia);
}

MatcherConfig tuned_config() { return load_config(HSM_TUNED_CONFIG); }

Mask interior(const DisparityMap& gt) {
  Mask m = Mask::Constant(gt.height(), gt.width(), false);
  m.block(kMargin, kMargin, gt.height() - 2 * kMargin, gt.width() - 2 * kMargin).setConstant(true);
  return m;
}

Metrics interior_metrics(const DisparityMap& pred, const DisparityMap& gt) {
  const Mask m = interior(gt);
  return compute_metrics(pred, gt, kDefaultTaus, kDefaultQuantiles, &m);
}

SyntheticScene constant_scene(double d0, std::uint64_t seed) {
  SceneParams p;
  p.width = kWidth;
  p.height = kHeight;
  p.d0 = d0;
  p.smoothing = kTexture;
  p.seed = seed;
  return generate(p);
}

// 25 constant and 25 slanted-plane scenes with disparities inside [8, 96].
std::vector<SyntheticScene> mixed_suite() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SyntheticScene> out;
  for (int i = 0; i < 50; ++i) {
    SceneParams p;
    p.width = kWidth;
    p.height = kHeight;
    p.smoothing = kTexture;
    p.seed = 5000 + i;
    if (i % 2 == 0) {
      p.d0 = 8.0 + 88.0 * u(rng);
    } else {
      p.kind = SceneKind::plane;
      p.plane_a = 0.04 * (u(rng) - 0.5);
      p.plane_b = 0.04 * (u(rng) - 0.5);
      p.plane_c = 30.0 + 40.0 * u(rng);
    }
    out.push_back(generate(p));
  }
  return out;
}

bool anytime_ok(const std::vector<StageReport>& reps) {
  for (std::size_t i = 1; i < reps.size(); ++i)
    if (!(reps[i].elapsed_ms > reps[i - 1].elapsed_ms) || !(reps[i].work_counter > reps[i - 1].work_counter))
      return false;
  return true;
}

int anytime_violations = 0;
int anytime_runs = 0;

std::vector<StageReport> run_full(const SyntheticScene& s, const MatcherConfig& cfg) {
  auto reps = match(s.left, s.right, cfg);
  ++anytime_runs;
  if (reps.size() != std::size_t(cfg.stages) || !anytime_ok(reps)) ++anytime_violations;
  return reps;
}

// ---------------------------------------------------------------------------

bool metric_oracle(std::string& detail) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> val(0.0f, 64.0f), noise(-6.0f, 6.0f);
  std::bernoulli_distribution drop(0.1);
  const std::vector<double> taus = kDefaultTaus;
  std::uint64_t worst = 0;
  int mismatched_counts = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    DisparityMap gt(32, 32), pred(32, 32);
    for (int i = 0; i < 32 * 32; ++i) {
      gt.disparity(i) = val(rng);
      pred.disparity(i) = gt.disparity(i) + noise(rng);
      if (drop(rng)) gt.invalidate(i / 32, i % 32);
      if (drop(rng)) pred.invalidate(i / 32, i % 32);
    }
    std::size_t total = 0, both = 0;
    std::vector<std::size_t> bad(taus.size(), 0);
    double sum = 0.0, sq = 0.0;
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        if (!std::isfinite(gt.disparity(y, x))) continue;
        ++total;
        const bool pv = std::isfinite(pred.disparity(y, x));
        const double e = pv ? std::fabs(double(pred.disparity(y, x)) - double(gt.disparity(y, x))) : 0.0;
        for (std::size_t t = 0; t < taus.size(); ++t)
          if (!pv || e > taus[t]) ++bad[t];
        if (pv) {
          ++both;
          sum += e;
          sq += e * e;
        }
      }
    const Metrics m = compute_metrics(pred, gt, taus);
    if (m.n_total != total || m.n_valid != both) ++mismatched_counts;
    for (std::size_t t = 0; t < taus.size(); ++t)
      if (std::llround(m.bad.at(taus[t]) * double(total) / 100.0) != std::int64_t(bad[t]) ||
          m.bad.at(taus[t]) != 100.0 * double(bad[t]) / double(total))
        ++mismatched_counts;
    worst = std::max({worst, ulp_distance(m.avgerr, sum / double(both)), ulp_distance(m.rms, std::sqrt(sq / double(both)))});
  }
  detail = "count mismatches " + std::to_string(mismatched_counts) + ", worst mean ulp " + std::to_string(worst);
  return mismatched_counts == 0 && worst <= 1;
}

bool depth_anchors(std::string& detail) {
  const double near = disparity_to_depth(768, 0.54, 3578), far = disparity_to_depth(9.66, 0.54, 3578);
  detail = fmt("Z(768)=%.4f m, Z(9.66)=%.2f m", near, far);
  return near >= 2.50 && near <= 2.53 && far >= 199 && far <= 201 && stopping_distance(25) == 25.0 &&
         stopping_distance(40) == 60.0 && stopping_distance(55) == 115.0;
}

bool shift_oracle(std::string& detail) {
  MatcherConfig cfg = tuned_config();
  cfg.threads = 1;
  double err = 0.0, bad = 0.0;
  std::size_t n = 0, bad_n = 0;
  for (int i = 0; i < 64; ++i) {
    const double d0 = 8.0 + 88.0 * i / 63.0;
    const auto s = constant_scene(d0, 100 + i);
    const auto reps = run_full(s, cfg);
    const Metrics m = interior_metrics(reps.back().disparity, s.gt);
    err += m.avgerr * double(m.n_valid);
    bad += m.bad.at(2.0) * double(m.n_total) / 100.0;
    n += m.n_valid;
    bad_n += m.n_total;
  }
  const double avgerr = err / double(n), bad2 = 100.0 * bad / double(bad_n);
  detail = fmt("avgerr %.3f px (<= 1.0), bad-2.0 %.2f%% (<= 5)", avgerr, bad2);
  return avgerr <= 1.0 && bad2 <= 5.0;
}

bool anytime_contract(std::string& detail) {
  MatcherConfig cfg = tuned_config();
  int zero_ok = 0;
  for (int i = 0; i < 5; ++i) {
    const auto s = constant_scene(12.0 + 16.0 * i, 300 + i);
    const auto reps = match(s.left, s.right, cfg, 0.0);
    zero_ok += reps.size() == 1 && reps[0].stage == 1 && reps[0].finest_volume_level == 3;
  }
  cfg.max_disparity = 256;
  const auto s = constant_scene(40, 400);
  const auto reps = run_full(s, cfg);
  const double ratio = double(reps.front().work_counter) / double(reps.back().work_counter);
  detail = "ordering violations " + std::to_string(anytime_violations) + "/" + std::to_string(anytime_runs) +
           ", budget-0 ok " + std::to_string(zero_ok) + "/5" + fmt(", stage-1/stage-3 work %.4f", ratio);
  return anytime_violations == 0 && zero_ok == 5 && ratio <= 0.25;
}

struct SuiteRuns {
  std::vector<SyntheticScene> scenes;
  std::vector<std::vector<StageReport>> feature;
};

bool coarse_to_fine(const SuiteRuns& suite, std::string& detail) {
  int ok = 0;
  for (std::size_t i = 0; i < suite.scenes.size(); ++i) {
    const auto& reps = suite.feature[i];
    const double b1 = interior_metrics(reps.front().disparity, suite.scenes[i].gt).bad.at(2.0);
    const double b3 = interior_metrics(reps.back().disparity, suite.scenes[i].gt).bad.at(2.0);
    ok += b3 <= b1;
  }
  const double frac = double(ok) / double(suite.scenes.size());
  detail = fmt("stage-3 <= stage-1 bad-2.0 on %.0f%% of scenes (>= 90)", 100.0 * frac);
  return frac >= 0.9;
}

bool fusion_ablation(const SuiteRuns& suite, std::string& detail) {
  MatcherConfig cost = tuned_config();
  cost.decoder.fuse_mode = FuseMode::cost;
  double f = 0.0, c = 0.0;
  for (std::size_t i = 0; i < suite.scenes.size(); ++i) {
    const auto& s = suite.scenes[i];
    f += interior_metrics(suite.feature[i].back().disparity, s.gt).bad.at(1.0);
    c += interior_metrics(run_full(s, cost).back().disparity, s.gt).bad.at(1.0);
  }
  f /= double(suite.scenes.size());
  c /= double(suite.scenes.size());
  detail = fmt("mean bad-1.0 feature %.2f%%, cost %.2f%%", f, c);
  return f <= c;
}

bool hierarchy_robustness(const SuiteRuns& suite, std::string& detail) {
  const MatcherConfig cfg = tuned_config();
  int ok = 0;
  double full_gain = 0.0, single_gain = 0.0;
  for (std::size_t i = 0; i < suite.scenes.size(); ++i) {
    const auto& s = suite.scenes[i];
    const Image moved = perturb_target(s.right, SweepKind::y_translation, 1.0);
    const double f0 = interior_metrics(suite.feature[i].back().disparity, s.gt).avgerr;
    const double f1 = interior_metrics(run_full(SyntheticScene{s.left, moved, s.gt, s.params}, cfg).back().disparity, s.gt).avgerr;
    const double s0 = interior_metrics(match_single_scale(s.left, s.right, cfg), s.gt).avgerr;
    const double s1 = interior_metrics(match_single_scale(s.left, moved, cfg), s.gt).avgerr;
    ok += (f1 - f0) <= (s1 - s0);
    full_gain += f1 - f0;
    single_gain += s1 - s0;
  }
  const double n = double(suite.scenes.size());
  detail = fmt("full increase <= single-scale on %.0f%% of scenes (>= 80); mean increase %.3f vs %.3f px",
               100.0 * ok / n, full_gain / n, single_gain / n);
  return ok >= 0.8 * n;
}

bool softmax_identities(std::string& detail) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> bins(2, 24), size(1, 6), k(0, 44);
  std::uniform_real_distribution<double> beta(0.05, 5.0), gamma(0.1, 10.0);
  int shift_fail = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    CostVolumeT<double> c(1, 8, 1, bins(rng), size(rng), size(rng));
    for (Eigen::Index i = 0; i < c.data.size(); ++i) c.data[i] = k(rng) / 64.0;  // dyadic, so + 7.3 is exact
    CostVolumeT<double> shifted = c, scaled = c;
    shifted.data += 7.3;
    const double b = beta(rng), g = gamma(rng);
    scaled.data *= g;
    const auto a = expected_disparity(c, b), s = expected_disparity(shifted, b);
    if (!(a == s) || std::memcmp(a.disparity.data(), s.disparity.data(), sizeof(double) * a.disparity.size()) != 0)
      ++shift_fail;
    const auto lhs = expected_disparity(scaled, b), rhs = expected_disparity(c, g * b);
    worst = std::max(worst, (lhs.disparity - rhs.disparity).abs().maxCoeff());
  }
  detail = "offset mismatches " + std::to_string(shift_fail) + fmt(", worst temperature gap %.3g px", worst);
  return shift_fail == 0 && worst <= 1e-9;
}

bool loss_weights(std::string& detail) {
  DisparityMap gt(128, 128, 40.0f);
  double worst_ulps = 0;
  for (double e : {0.25, 0.5, 2.0, 3.5}) {
    LevelPredictions lp;
    for (int k = 1; k <= kPyramidLevels; ++k) {
      const int div = level_divisor(k);
      lp.divisors[k - 1] = div;
      lp.levels[k - 1] = DisparityMap(ceil_div(128, div), ceil_div(128, div), float(40.0 / div + e));
    }
    const LossBreakdown lb = multiscale_loss(lp, gt);
    const double l = smooth_l1(e);
    worst_ulps = std::max<double>(worst_ulps, double(ulp_distance(lb.total, l * 85.0 / 64.0)));
  }

  std::vector<TuningSample> data;
  for (int i = 0; i < 5; ++i) {
    SceneParams p;
    p.width = 320;
    p.height = 256;
    p.smoothing = kTexture / 2;
    p.seed = 700 + i;
    if (i % 2) {
      p.kind = SceneKind::plane;
      p.plane_a = 0.02;
      p.plane_c = 20.0 + 5.0 * i;
    } else {
      p.d0 = 10.0 + 6.0 * i;
    }
    const auto s = generate(p);
    data.push_back({s.left, s.right, s.gt});
  }
  MatcherConfig start;
  start.max_disparity = 64;
  TuneOptions opts;
  opts.budget_evals = 200;
  const TuneResult r = tune(start, data, opts);
  int rises = 0;
  double last = r.initial_loss;
  for (const auto& t : r.trace)
    if (t.accepted) {
      rises += t.loss > last;
      last = t.loss;
    }
  detail = fmt("worst %.0f ulp; tune %.4f -> %.4f over %.0f evals", worst_ulps, r.initial_loss, r.loss, r.evals) +
           ", trace rises " + std::to_string(rises);
  return worst_ulps <= 1 && rises == 0 && r.loss <= r.initial_loss && r.evals <= 200;
}

bool augmentation_exactness(std::string& detail) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(97, 61, 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 61; ++y)
      for (int x = 0; x < 97; ++x) img(c, y, x) = u(rng);

  bool identity = ydisparity_warp(img, 0.0, 0.0) == img && asymmetric_chromatic(img, Chromatic{}) == img;
  const AugmentedPair same = apply_spec(img, img, AugmentationSpec{});
  identity = identity && same.left == img && same.right == img;

  bool shift = true;
  for (int ty : {-3, 1, 2}) {
    const Image w = ydisparity_warp(img, 0.0, ty);
    for (int c = 0; c < 3; ++c)
      for (int y = std::max(0, -ty); y < std::min(61, 61 - ty); ++y)
        for (int x = 0; x < 97; ++x) shift = shift && w(c, y, x) == img(c, y + ty, x);
  }

  const Image masked = asymmetric_mask(img, MaskRect{10, 5, 30, 20});
  std::uint64_t mask_ulps = 0;
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0;
    for (int y = 0; y < 61; ++y)
      for (int x = 0; x < 97; ++x) sum += img(c, y, x);
    const float mean = float(sum / (61.0 * 97.0));
    for (int y = 5; y < 25; ++y)
      for (int x = 10; x < 40; ++x) {
        const auto a = std::bit_cast<std::int32_t>(masked(c, y, x)), b = std::bit_cast<std::int32_t>(mean);
        mask_ulps = std::max<std::uint64_t>(mask_ulps, std::uint64_t(std::abs(std::int64_t(a) - b)));
      }
  }

  const SamplingConfig sc = SamplingConfig::for_preset(AugmentPreset::training, 1242, 375);
  std::mt19937_64 srng(11);
  int out_of_range = 0, ydisp = 0, masks = 0;
  const int draws = 100000;
  auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  for (int i = 0; i < draws; ++i) {
    const AugmentationSpec s = sample_spec(srng, sc);
    if (s.ydisp) {
      ++ydisp;
      out_of_range += !in(s.ydisp->rotation_deg, 0.0, 0.1) || !in(s.ydisp->ty, 0.0, 2.0);
    }
    for (const auto& c : {s.chromatic_left, s.chromatic_right}) {
      if (!c) {
        ++out_of_range;
        continue;
      }
      out_of_range += !in(c->brightness, 0.5, 2.0) || !in(c->gamma, 0.8, 1.2) || !in(c->contrast, 0.8, 1.2);
    }
    if (s.mask) {
      ++masks;
      out_of_range += !in(s.mask->width, 50, 150) || !in(s.mask->height, 50, 150);
    }
  }
  const double fy = double(ydisp) / draws, fm = double(masks) / draws;

  const RigidWarp rw(2464, 2464, 0.05, 0.0);
  const Eigen::Vector2d p = rw.centre + Eigen::Vector2d(1232.0, 0.0);
  const double disp = (rw.map(p) - p).norm();

  detail = std::string(identity ? "identity exact" : "identity changed") + (shift ? ", rows shifted exactly" : ", row shift inexact") +
           ", mask " + std::to_string(mask_ulps) + " ulp, " + std::to_string(out_of_range) + " out of range" +
           fmt(", gates %.4f / %.4f, 0.05 deg at 1232 px = %.4f px", fy, fm, disp);
  return identity && shift && mask_ulps <= 1 && out_of_range == 0 && std::abs(fy - 0.5) <= 0.02 &&
         std::abs(fm - 0.5) <= 0.02 && std::abs(disp - 1.07) <= 0.01;
}

bool format_round_trips(std::string& detail) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> dim(1, 48), code(1, 65535);
  std::uniform_real_distribution<float> val(-1e3f, 1e3f);
  std::bernoulli_distribution hole(0.15);
  int bad_pfm = 0, bad_kitti = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int w = dim(rng), h = dim(rng);
    DisparityMap m(w, h), k(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        m.disparity(y, x) = val(rng);
        if (hole(rng)) m.invalidate(y, x);
        k.disparity(y, x) = float(code(rng) / 256.0);
        if (hole(rng)) k.invalidate(y, x);
      }
    const Endian e = trial % 2 ? Endian::big : Endian::little;
    const Bytes pfm = write_pfm(m, 1.0f, e);
    const PfmFile back = read_pfm(pfm);
    const auto& mb = std::get<DisparityMap>(back.raster);
    bad_pfm += !(mb == m) ||
               std::memcmp(mb.disparity.data(), m.disparity.data(), sizeof(float) * m.disparity.size()) != 0 ||
               write_pfm(back) != pfm;

    Image rgb(w, h, 3);
    for (int c = 0; c < 3; ++c) rgb.channel(c) = m.disparity;
    bad_pfm += !(std::get<Image>(read_pfm(write_pfm(rgb)).raster) == rgb);

    const Bytes png = write_kitti_disparity(k);
    const DisparityMap kb = read_kitti_disparity(png);
    bad_kitti += !(kb == k) || write_kitti_disparity(kb) != png;
  }
  detail = "pfm failures " + std::to_string(bad_pfm) + ", kitti failures " + std::to_string(bad_kitti);
  return bad_pfm == 0 && bad_kitti == 0;
}

bool determinism(const SuiteRuns& suite, std::string& detail) {
  int mismatches = 0;
  for (int i = 0; i < 10; ++i) {
    const auto& s = suite.scenes[i];
    MatcherConfig one = tuned_config(), many = tuned_config();
    one.threads = 1;
    many.threads = 4;
    if (i % 3 == 1) one.mode = many.mode = InputMode::half;
    const auto a = match(s.left, s.right, one), b = match(s.left, s.right, many);
    if (a.size() != b.size()) {
      ++mismatches;
      continue;
    }
    for (std::size_t j = 0; j < a.size(); ++j) {
      const bool same = a[j].stage == b[j].stage && a[j].level == b[j].level &&
                        a[j].work_counter == b[j].work_counter &&
                        a[j].finest_volume_level == b[j].finest_volume_level &&
                        std::memcmp(a[j].disparity.disparity.data(), b[j].disparity.disparity.data(),
                                    sizeof(float) * a[j].disparity.disparity.size()) == 0;
      mismatches += !same;
    }
  }
  detail = std::to_string(mismatches) + " differing stage reports over 10 scenes (1 vs 4 threads)";
  return mismatches == 0;
}

}  // namespace

int main() {
  criterion(1, "metric oracle", metric_oracle);
  criterion(2, "depth anchors", depth_anchors);
  criterion(3, "shift oracle", shift_oracle);

  SuiteRuns suite;
  suite.scenes = mixed_suite();
  const MatcherConfig cfg = tuned_config();
  for (const auto& s : suite.scenes) suite.feature.push_back(run_full(s, cfg));

  criterion(4, "anytime contract", anytime_contract);
  criterion(5, "coarse-to-fine", [&](std::string& d) { return coarse_to_fine(suite, d); });
  criterion(6, "fusion ablation", [&](std::string& d) { return fusion_ablation(suite, d); });
  criterion(7, "hierarchy robustness", [&](std::string& d) { return hierarchy_robustness(suite, d); });
  criterion(8, "softmax identities", softmax_identities);
  criterion(9, "loss weights and tuner trace", loss_weights);
  criterion(10, "augmentation exactness", augmentation_exactness);
  criterion(11, "format round trips", format_round_trips);
  criterion(12, "determinism", [&](std::string& d) { return determinism(suite, d); });
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
