#include "hsm/tuner.hpp"

#include <cmath>

#include "hsm/parallel.hpp"

namespace hsm {

double combine_levels(const std::array<double, kPyramidLevels>& levels) {
  double total = 0.0;
  for (int k = 0; k < kPyramidLevels; ++k) total += kLevelLossWeights[k] * levels[k];
  return total;
}

DisparityMap downsample_ground_truth(const DisparityMap& gt, int divisor, int out_width, int out_height) {
  if (divisor < 1) throw Error("divisor must be >= 1");
  DisparityMap out(out_width, out_height);
  for (int y = 0; y < out_height; ++y)
    for (int x = 0; x < out_width; ++x) {
      const int y0 = y * divisor, x0 = x * divisor;
      const int y1 = std::min(y0 + divisor, gt.height()), x1 = std::min(x0 + divisor, gt.width());
      int total = 0, valid = 0;
      double sum = 0.0;
      for (int v = y0; v < y1; ++v)
        for (int u = x0; u < x1; ++u) {
          ++total;
          if (!gt.valid(v, u)) continue;
          ++valid;
          sum += gt.disparity(v, u);
        }
      if (total == 0 || 2 * valid < total)
        out.invalidate(y, x);
      else
        out.disparity(y, x) = static_cast<float>(sum / valid / divisor);
    }
  return out;
}

LossBreakdown multiscale_loss(const LevelPredictions& preds, const DisparityMap& gt) {
  LossBreakdown out;
  for (int k = 0; k < kPyramidLevels; ++k) {
    const DisparityMap& p = preds.levels[k];
    const DisparityMap g = downsample_ground_truth(gt, preds.divisors[k], p.width(), p.height());
    double sum = 0.0;
    std::size_t n = 0;
    for (Eigen::Index i = 0; i < g.disparity.size(); ++i) {
      if (!g.valid(i)) continue;
      const double pred = p.valid(i) ? double(p.disparity(i)) : 0.0;
      sum += smooth_l1(pred - g.disparity(i));
      ++n;
    }
    out.empty[k] = n == 0;
    out.levels[k] = n == 0 ? 0.0 : sum / double(n);
  }
  out.total = combine_levels(out.levels);
  return out;
}

namespace {

TunableParam continuous(std::string name, double lo, double hi, std::function<double(const DecoderConfig&)> get,
                        std::function<void(DecoderConfig&, double)> set) {
  TunableParam p;
  p.name = std::move(name);
  p.lo = lo;
  p.hi = hi;
  p.get = std::move(get);
  p.set = std::move(set);
  return p;
}

TunableParam discrete(std::string name, std::vector<double> grid, std::function<double(const DecoderConfig&)> get,
                      std::function<void(DecoderConfig&, double)> set) {
  TunableParam p;
  p.name = std::move(name);
  p.continuous = false;
  p.grid = std::move(grid);
  p.get = std::move(get);
  p.set = std::move(set);
  return p;
}

}  // namespace

std::vector<TunableParam> default_tunable_params() {
  std::vector<TunableParam> ps;
  ps.push_back(continuous(
      "beta", 0.5, 500.0, [](const DecoderConfig& d) { return d.beta; }, [](DecoderConfig& d, double v) { d.beta = v; }));
  ps.back().log_scale = true;
  ps.push_back(continuous(
      "alpha", 0.0, 1.0, [](const DecoderConfig& d) { return d.alpha; },
      [](DecoderConfig& d, double v) { d.alpha = v; }));
  ps.push_back(continuous(
      "gamma", 0.0, 1.0, [](const DecoderConfig& d) { return d.gamma; },
      [](DecoderConfig& d, double v) { d.gamma = v; }));
  ps.push_back(continuous(
      "w_intensity", 0.0, 4.0, [](const DecoderConfig& d) { return d.weights.intensity; },
      [](DecoderConfig& d, double v) { d.weights.intensity = v; }));
  ps.push_back(continuous(
      "w_gradient", 0.0, 4.0, [](const DecoderConfig& d) { return d.weights.gradient; },
      [](DecoderConfig& d, double v) { d.weights.gradient = v; }));
  ps.push_back(continuous(
      "w_rank", 0.0, 4.0, [](const DecoderConfig& d) { return d.weights.rank; },
      [](DecoderConfig& d, double v) { d.weights.rank = v; }));
  ps.push_back(continuous(
      "w_pooled", 0.0, 4.0, [](const DecoderConfig& d) { return d.weights.pooled; },
      [](DecoderConfig& d, double v) { d.weights.pooled = v; }));
  ps.push_back(discrete(
      "agg_blocks", {0, 1, 2, 3, 4}, [](const DecoderConfig& d) { return double(d.agg_blocks); },
      [](DecoderConfig& d, double v) { d.agg_blocks = static_cast<int>(v); }));
  const char* axes[3] = {"window_d", "window_y", "window_x"};
  for (int a = 0; a < 3; ++a)
    ps.push_back(discrete(
        axes[a], {1, 3, 5, 7}, [a](const DecoderConfig& d) { return double(d.window[a]); },
        [a](DecoderConfig& d, double v) { d.window[a] = static_cast<int>(v); }));
  return ps;
}

double dataset_loss(const MatcherConfig& cfg, const std::vector<TuningSample>& data) {
  if (data.empty()) throw Error("tuning dataset is empty");
  std::vector<double> losses(data.size());
  // Scenes run in parallel; each scene's matcher then runs single-threaded.
  MatcherConfig inner = cfg;
  inner.threads = 1;
  ThreadScope scope(cfg.threads);
  parallel_for(static_cast<int>(data.size()), [&](int i) {
    const auto& s = data[i];
    losses[i] = multiscale_loss(match_levels(s.left, s.right, inner), s.gt).total;
  });
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / double(losses.size());
}

TuneResult tune(const MatcherConfig& initial, const std::vector<TuningSample>& data, const TuneOptions& opts) {
  initial.validate();
  std::vector<TunableParam> params = default_tunable_params();
  if (!opts.params.empty()) {
    std::vector<TunableParam> chosen;
    for (const auto& name : opts.params) {
      auto it = std::find_if(params.begin(), params.end(), [&](const TunableParam& p) { return p.name == name; });
      if (it == params.end()) throw ConfigError("unknown tunable parameter '" + name + "'");
      chosen.push_back(*it);
    }
    params = std::move(chosen);
  }

  TuneResult r;
  r.config = initial;
  r.initial_loss = r.loss = dataset_loss(initial, data);
  if (opts.budget_evals <= 0 || params.empty()) return r;

  // Returns false once the budget is spent.
  auto try_value = [&](const TunableParam& p, double v, double& loss_out) {
    if (r.evals >= opts.budget_evals) return false;
    MatcherConfig cand = r.config;
    p.set(cand.decoder, v);
    ++r.evals;
    try {
      cand.validate();
      loss_out = dataset_loss(cand, data);
    } catch (const ConfigError&) {
      loss_out = std::numeric_limits<double>::infinity();
    }
    const bool accepted = loss_out < r.loss;
    r.trace.push_back({r.evals, p.name, v, loss_out, accepted});
    if (accepted) {
      r.config = cand;
      r.loss = loss_out;
    }
    return true;
  };

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  bool improved_in_cycle = true;
  while (r.evals < opts.budget_evals && improved_in_cycle) {
    improved_in_cycle = false;
    for (const auto& p : params) {
      const double before = r.loss;
      double loss = 0.0;
      if (!p.continuous) {
        const double current = p.get(r.config.decoder);
        for (double v : p.grid) {
          if (v == current) continue;
          if (!try_value(p, v, loss)) break;
        }
      } else {
        // Golden-section on [lo, hi]; every probe is also an acceptance candidate.
        auto to_value = [&](double t) { return p.log_scale ? std::exp(t) : t; };
        double a = p.log_scale ? std::log(p.lo) : p.lo, b = p.log_scale ? std::log(p.hi) : p.hi;
        double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
        double fc = 0.0, fd = 0.0;
        if (!try_value(p, to_value(c), fc) || !try_value(p, to_value(d), fd)) break;
        for (int s = 0; s < opts.golden_steps; ++s) {
          if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            if (!try_value(p, to_value(c), fc)) break;
          } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            if (!try_value(p, to_value(d), fd)) break;
          }
        }
      }
      if (r.loss < before) improved_in_cycle = true;
      if (r.evals >= opts.budget_evals) break;
    }
  }
  return r;
}

}  // namespace hsm
