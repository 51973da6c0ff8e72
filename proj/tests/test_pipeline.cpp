#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "hsm/config_io.hpp"
#include "hsm/pipeline.hpp"
#include "hsm/rds.hpp"
#include "hsm/tuner.hpp"

using namespace hsm;

namespace {

SyntheticScene small_scene(double d0, std::uint64_t seed = 1) {
  SceneParams p;
  p.width = 256;
  p.height = 128;
  p.d0 = d0;
  p.smoothing = 4.0;
  p.seed = seed;
  return generate(p);
}

MatcherConfig small_config() {
  MatcherConfig cfg;
  cfg.max_disparity = 64;
  return cfg;
}

}  // namespace

TEST_CASE("match: one report per stage with increasing clocks") {
  const auto s = small_scene(16);
  const auto reps = match(s.left, s.right, small_config());
  REQUIRE(reps.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(reps[i].stage == i + 1);
    CHECK(reps[i].level == 3 - i);
    CHECK(reps[i].disparity.width() == 256);
    CHECK(reps[i].disparity.height() == 128);
  }
  CHECK(reps[0].elapsed_ms < reps[1].elapsed_ms);
  CHECK(reps[1].work_counter < reps[2].work_counter);
  CHECK(reps[2].finest_volume_level == 1);
  CHECK(stage_name(InputMode::half, 2) == "H2");
}

TEST_CASE("match: zero budget stops after stage 1 without finer volumes") {
  const auto s = small_scene(16);
  const auto reps = match(s.left, s.right, small_config(), 0.0);
  REQUIRE(reps.size() == 1);
  CHECK(reps[0].finest_volume_level == 3);
}

TEST_CASE("match: errors before any work") {
  const auto s = small_scene(16);
  MatcherConfig cfg = small_config();
  cfg.max_disparity = 256;
  CHECK_THROWS_AS(match(s.left, s.right, cfg), ConfigError);
  const auto other = generate(SceneParams{SceneKind::constant, 128, 128});
  CHECK_THROWS(match(s.left, other.right, small_config()));
}

TEST_CASE("match: half and quarter modes report at input resolution") {
  SceneParams p;
  p.width = 256;
  p.height = 256;
  const auto s = generate(p);
  for (InputMode m : {InputMode::half, InputMode::quarter}) {
    MatcherConfig cfg = small_config();
    cfg.mode = m;
    const auto reps = match(s.left, s.right, cfg);
    REQUIRE_FALSE(reps.empty());
    CHECK(reps.back().disparity.width() == 256);
  }
}

TEST_CASE("match: thread count does not change results") {
  const auto s = small_scene(24);
  MatcherConfig a = small_config(), b = small_config();
  b.threads = 4;
  const auto ra = match(s.left, s.right, a), rb = match(s.left, s.right, b);
  REQUIRE(ra.size() == rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    CHECK(ra[i].disparity == rb[i].disparity);
    CHECK(ra[i].work_counter == rb[i].work_counter);
  }
}

TEST_CASE("match_levels: native units and divisors") {
  const auto s = small_scene(16);
  const LevelPredictions lp = match_levels(s.left, s.right, small_config());
  for (int k = 1; k <= 4; ++k) {
    CHECK(lp.divisors[k - 1] == level_divisor(k));
    CHECK(lp.levels[k - 1].width() == ceil_div(256, level_divisor(k)));
  }
}

TEST_CASE("stopping distances") {
  CHECK(stopping_distance(25) == 25.0);
  CHECK(stopping_distance(40) == 60.0);
  CHECK(stopping_distance(55) == 115.0);
  CHECK_THROWS(stopping_distance(30));
}

TEST_CASE("rds: constant scene is a shifted copy") {
  SceneParams p;
  p.d0 = 16;
  p.seed = 9;
  const auto s = generate(p);
  for (int y = 0; y < p.height; y += 37)
    for (int x = 0; x + 16 < p.width; x += 13) CHECK(s.right(0, y, x) == s.left(0, y, x + 16));
  CHECK_FALSE(s.gt.valid(5, 3));
  CHECK(s.gt.valid(5, 100));
  CHECK(s.gt.disparity(5, 100) == 16.0f);
}

TEST_CASE("rds: degenerate plane equals constant, two-plane disparities, range check") {
  SceneParams c;
  c.d0 = 20;
  c.seed = 4;
  SceneParams p = c;
  p.kind = SceneKind::plane;
  p.plane_c = 20;
  const auto a = generate(c), b = generate(p);
  CHECK(a.right == b.right);
  CHECK(a.gt == b.gt);

  SceneParams t;
  t.kind = SceneKind::two_plane;
  t.width = 1024;
  t.height = 256;
  const auto tp = generate(t);
  CHECK(tp.gt.disparity(128, 512) == doctest::Approx(193.212).epsilon(1e-4));
  CHECK(tp.gt.disparity(10, 900) == doctest::Approx(19.3212).epsilon(1e-4));

  SceneParams big;
  big.d0 = 200;
  CHECK_THROWS(generate(big));
}

TEST_CASE("rds: subpixel warp consistency within bilinear tolerance") {
  SceneParams p;
  p.d0 = 12.25;
  p.smoothing = 3.0;
  p.seed = 2;
  const auto s = generate(p);
  double worst = 0.0;
  for (int y = 0; y < p.height; y += 7)
    for (int x = 40; x < p.width - 40; x += 5) {
      const double u = x - s.gt.disparity(y, x);
      const int u0 = static_cast<int>(std::floor(u));
      const double t = u - u0;
      const double r = (1 - t) * s.right(0, y, u0) + t * s.right(0, y, u0 + 1);
      worst = std::max(worst, std::abs(r - s.left(0, y, x)));
    }
  CHECK(worst < 0.05);
}

TEST_CASE("config text round trip") {
  MatcherConfig cfg;
  cfg.max_disparity = 192;
  cfg.mode = InputMode::quarter;
  cfg.decoder.beta = 0.1 + 0.2;
  cfg.decoder.channel_weights = {0.5, 1.0 / 3.0};
  cfg.decoder.fuse_mode = FuseMode::cost;
  cfg.strides = StridePolicy::ratio_table();
  const MatcherConfig back = parse_config_text(to_config_text(cfg));
  CHECK(to_config_text(back) == to_config_text(cfg));
  CHECK(back.decoder.beta == cfg.decoder.beta);
  CHECK_THROWS_AS(parse_config_text("nope=1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("decoder.alpha=2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("decoder.window=3,3\n"), ConfigError);
}

TEST_CASE("smooth L1 and loss weights") {
  CHECK(smooth_l1(0.5) == 0.125);
  CHECK(smooth_l1(-3.0) == 2.5);
  CHECK(smooth_l1(1.0 - 1e-6) == doctest::Approx(smooth_l1(1.0 + 1e-6)).epsilon(1e-5));
  CHECK(combine_levels({0.7, 0, 0, 0}) == 0.7);
  CHECK(combine_levels({2, 2, 2, 2}) == 2.0 * 85.0 / 64.0);
}

TEST_CASE("multiscale loss: perfect predictions and empty levels") {
  DisparityMap gt(64, 64, 32.0f);
  LevelPredictions lp;
  for (int k = 1; k <= 4; ++k) {
    const int div = level_divisor(k);
    lp.divisors[k - 1] = div;
    lp.levels[k - 1] = DisparityMap(ceil_div(64, div), ceil_div(64, div), 32.0f / div);
  }
  const LossBreakdown perfect = multiscale_loss(lp, gt);
  CHECK(perfect.total == 0.0);

  gt.valid.setConstant(false);
  const LossBreakdown empty = multiscale_loss(lp, gt);
  CHECK(empty.empty[0]);
  CHECK(empty.total == 0.0);
}

TEST_CASE("ground truth downsampling keeps half-valid blocks") {
  DisparityMap gt(2, 2, 8.0f);
  gt.invalidate(0, 0);
  CHECK(downsample_ground_truth(gt, 2, 1, 1).disparity(0, 0) == 4.0f);
  gt.invalidate(0, 1);
  CHECK(downsample_ground_truth(gt, 2, 1, 1).valid(0, 0));
  gt.invalidate(1, 1);
  CHECK_FALSE(downsample_ground_truth(gt, 2, 1, 1).valid(0, 0));
}

TEST_CASE("tune: zero budget and fixed point") {
  const auto s = small_scene(16);
  std::vector<TuningSample> data{{s.left, s.right, s.gt}};
  MatcherConfig cfg = small_config();
  TuneOptions opts;
  opts.budget_evals = 0;
  const TuneResult none = tune(cfg, data, opts);
  CHECK(to_config_text(none.config) == to_config_text(cfg));

  // agg_blocks: pick the best grid value by hand, then the search must keep it.
  double best_loss = 1e300;
  int best = 0;
  for (int b = 0; b <= 4; ++b) {
    MatcherConfig c = cfg;
    c.decoder.agg_blocks = b;
    const double l = dataset_loss(c, data);
    if (l < best_loss) best_loss = l, best = b;
  }
  cfg.decoder.agg_blocks = best;
  opts.budget_evals = 10;
  opts.params = {"agg_blocks"};
  const TuneResult fixed = tune(cfg, data, opts);
  CHECK(fixed.config.decoder.agg_blocks == best);
  CHECK(fixed.loss == fixed.initial_loss);
}
