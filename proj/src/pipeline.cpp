#include "hsm/pipeline.hpp"

#include <chrono>

#include "hsm/parallel.hpp"

namespace hsm {

InputMode parse_input_mode(const std::string& s) {
  if (s == "F" || s == "f" || s == "full") return InputMode::full;
  if (s == "H" || s == "h" || s == "half") return InputMode::half;
  if (s == "Q" || s == "q" || s == "quarter") return InputMode::quarter;
  throw ConfigError("unknown input mode '" + s + "' (expected F, H or Q)");
}

void MatcherConfig::validate() const {
  if (max_disparity <= 0) throw ConfigError("max disparity must be positive");
  if (stages < 1 || stages > kStages) throw ConfigError("stages must lie in 1..3");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  encoder.validate();
  decoder.validate();
  strides.validate();
}

namespace {

using Clock = std::chrono::steady_clock;

class Engine {
 public:
  Engine(const Image& left, const Image& right, const MatcherConfig& cfg) : cfg_(cfg), start_(Clock::now()) {
    cfg_.validate();
    if (left.width() != right.width() || left.height() != right.height())
      throw Error("left and right images differ in size");
    if (left.empty()) throw Error("empty input image");
    if (cfg_.max_disparity >= left.width())
      throw ConfigError("max disparity " + std::to_string(cfg_.max_disparity) + " must be below the image width " +
                        std::to_string(left.width()));
    factor_ = prescale_factor(cfg_.mode);
    out_height_ = left.height();
    out_width_ = left.width();
    Image l = left, r = right;
    for (int f = factor_; f > 1; f /= 2) {
      l = downsample_half(l);
      r = downsample_half(r);
      count(2 * std::size_t(l.width()) * l.height() * l.channels());
    }
    work_max_disparity_ = ceil_div(cfg_.max_disparity, factor_);
    left_.emplace(l, cfg_.encoder);
    right_.emplace(r, cfg_.encoder);
    for (int k = 1; k <= kPyramidLevels; ++k) count(2 * std::size_t(left_->gray(k).size()));
  }

  double elapsed_ms() const { return std::chrono::duration<double, std::milli>(Clock::now() - start_).count(); }
  std::uint64_t work() const { return work_; }
  int finest_built() const { return finest_built_; }
  int factor() const { return factor_; }

  FeatureVolume raw_volume(int k) {
    const auto& fl = left_->level(k, &warnings_);
    const auto& fr = right_->level(k, &warnings_);
    count(2 * std::size_t(fl.num_channels()) * fl.height() * fl.width());
    FeatureVolume v = build_feature_volume(fl, fr, work_max_disparity_, cfg_.strides(k));
    count(v.cells());
    finest_built_ = std::min(finest_built_, k);
    return v;
  }

  FeatureVolume filter(const FeatureVolume& v) {
    FeatureVolume a = aggregate(v, cfg_.decoder);
    count(v.cells() * std::size_t(cfg_.decoder.agg_blocks));
    FeatureVolume p = volumetric_pyramid_pool(a, cfg_.decoder, &warnings_);
    count(p.cells());
    return p;
  }

  CostVolume cost(const FeatureVolume& v) {
    CostVolume c = to_cost_volume(v, cfg_.decoder);
    count(c.cells());
    return c;
  }

  CostVolume fuse_costs(const CostVolume& coarse, const CostVolume& fine) {
    CostVolume c = upsample_fuse(coarse, fine);
    count(c.cells());
    return c;
  }

  FeatureVolume fuse(const FeatureVolume& coarse, const FeatureVolume& fine) {
    FeatureVolume f = upsample_fuse(coarse, fine);
    count(f.cells());
    return f;
  }

  DisparityMap readout(const CostVolume& c) {
    DisparityMap d = expected_disparity(c, cfg_.decoder.beta, OutputGeometry{out_height_, out_width_, double(factor_)});
    count(std::size_t(d.width()) * d.height());
    return d;
  }

  const MatcherConfig& cfg() const { return cfg_; }

 private:
  void count(std::size_t cells) { work_ += cells; }

  MatcherConfig cfg_;
  Clock::time_point start_;
  int factor_ = 1;
  int out_height_ = 0;
  int out_width_ = 0;
  int work_max_disparity_ = 0;
  std::optional<PyramidBuilder<float>> left_;
  std::optional<PyramidBuilder<float>> right_;
  std::vector<std::string> warnings_;
  std::uint64_t work_ = 0;
  int finest_built_ = kPyramidLevels + 1;
};

/// Walks levels 4..1. `on_level` receives each level's cost volume; returning false stops.
template <typename OnLevel>
void run_hierarchy(Engine& engine, OnLevel&& on_level) {
  const FuseMode mode = engine.cfg().decoder.fuse_mode;
  std::optional<FeatureVolume> carried;
  std::optional<CostVolume> carried_cost;
  for (int k = kPyramidLevels; k >= 1; --k) {
    FeatureVolume raw = engine.raw_volume(k);
    CostVolume cost;
    if (mode == FuseMode::feature) {
      FeatureVolume fused = carried ? engine.fuse(*carried, raw) : std::move(raw);
      carried = engine.filter(fused);
      cost = engine.cost(*carried);
    } else {
      CostVolume own = engine.cost(engine.filter(raw));
      cost = carried_cost ? engine.fuse_costs(*carried_cost, own) : std::move(own);
      carried_cost = cost;
    }
    if (!on_level(k, cost)) return;
  }
}

}  // namespace

std::vector<StageReport> match_at_resolution(const Image& left, const Image& right, const MatcherConfig& cfg,
                                             std::optional<double> budget_ms, const ReportSink& sink) {
  ThreadScope threads(cfg.threads);
  Engine engine(left, right, cfg);
  std::vector<StageReport> reports;
  run_hierarchy(engine, [&](int k, const CostVolume& cost) {
    if (k == kPyramidLevels) return true;  // fusion only
    StageReport rep;
    rep.level = k;
    rep.stage = kPyramidLevels - k;
    rep.disparity = engine.readout(cost);
    rep.work_counter = engine.work();
    rep.finest_volume_level = engine.finest_built();
    rep.elapsed_ms = engine.elapsed_ms();
    reports.push_back(std::move(rep));
    if (sink) sink(reports.back());
    if (reports.back().stage >= engine.cfg().stages) return false;
    if (budget_ms && reports.back().elapsed_ms >= *budget_ms) return false;
    return true;
  });
  return reports;
}

std::vector<StageReport> match(const Image& left, const Image& right, const MatcherConfig& cfg,
                               std::optional<double> budget_ms, const ReportSink& sink) {
  return match_at_resolution(left, right, cfg, budget_ms, sink);
}

LevelPredictions match_levels(const Image& left, const Image& right, const MatcherConfig& cfg) {
  ThreadScope threads(cfg.threads);
  Engine engine(left, right, cfg);
  LevelPredictions out;
  run_hierarchy(engine, [&](int k, const CostVolume& cost) {
    const Planed bins = expected_bins(cost, engine.cfg().decoder.beta);
    DisparityMap& m = out.levels[k - 1];
    m = DisparityMap(cost.width, cost.height);
    for (int y = 0; y < cost.height; ++y)
      for (int x = 0; x < cost.width; ++x) {
        if (std::isnan(bins(y, x)))
          m.invalidate(y, x);
        else
          m.disparity(y, x) = static_cast<float>(bins(y, x) * cost.stride);
      }
    out.divisors[k - 1] = cost.divisor * engine.factor();
    return true;
  });
  return out;
}

DisparityMap match_single_scale(const Image& left, const Image& right, const MatcherConfig& cfg) {
  ThreadScope threads(cfg.threads);
  Engine engine(left, right, cfg);
  FeatureVolume raw = engine.raw_volume(1);
  return engine.readout(engine.cost(engine.filter(raw)));
}

double stopping_distance(int mph) {
  switch (mph) {
    case 25: return 25.0;
    case 40: return 60.0;
    case 55: return 115.0;
    default: throw Error("no stopping distance tabulated for " + std::to_string(mph) + " mph");
  }
}

}  // namespace hsm
