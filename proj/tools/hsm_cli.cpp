// hsm: command-line front end for matching, evaluation, augmentation, sweeps,
// tuning and synthetic scene generation.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "hsm/augmentation.hpp"
#include "hsm/config_io.hpp"
#include "hsm/evaluation.hpp"
#include "hsm/pipeline.hpp"
#include "hsm/raster_io.hpp"
#include "hsm/rds.hpp"
#include "hsm/tuner.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace hsm;

namespace {

struct Common {
  int threads = 1;
  std::uint64_t seed = 0;
  std::string config;
};

MatcherConfig load_matcher_config(const Common& c) {
  MatcherConfig cfg = c.config.empty() ? MatcherConfig{} : load_config(c.config);
  cfg.threads = c.threads;
  cfg.validate();
  return cfg;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + tok + "'");
    }
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

json base_manifest(const std::string& command, const Common& c) {
  json m;
  m["command"] = command;
  m["config"] = c.config;
  m["seed"] = c.seed;
  m["threads"] = c.threads;
  return m;
}

// ---------------------------------------------------------------------------

struct MatchArgs {
  std::string left, right, prefix = "out", mode = "F";
  std::optional<int> dmax;
  std::optional<double> budget_ms;
};

int cmd_match(const MatchArgs& a, const Common& c) {
  MatcherConfig cfg = load_matcher_config(c);
  if (a.dmax) cfg.max_disparity = *a.dmax;
  cfg.mode = parse_input_mode(a.mode);
  cfg.validate();
  const Image left = load_image(a.left).image;
  const Image right = load_image(a.right).image;
  json m = base_manifest("match", c);
  m["inputs"] = {a.left, a.right};
  m["max_disparity"] = cfg.max_disparity;
  m["mode"] = std::string(1, mode_letter(cfg.mode));
  if (a.budget_ms) m["budget_ms"] = *a.budget_ms;
  m["stages"] = json::array();
  m["outputs"] = json::array();
  const auto reports = match(left, right, cfg, a.budget_ms);
  for (const auto& r : reports) {
    const std::string path = a.prefix + "-" + stage_name(cfg.mode, r.stage) + ".pfm";
    save_disparity(path, r.disparity);
    m["stages"].push_back({{"stage", r.stage},
                           {"level", r.level},
                           {"elapsed_ms", r.elapsed_ms},
                           {"work_counter", r.work_counter},
                           {"finest_volume_level", r.finest_volume_level}});
    m["outputs"].push_back(path);
  }
  write_text(a.prefix + "-manifest.json", m.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string pred, gt, calib, out, tau = "1,2,4";
  std::optional<double> baseline, focal;
};

int cmd_eval(const EvalArgs& a) {
  const DisparityMap pred = load_disparity(a.pred);
  const DisparityMap gt = load_disparity(a.gt);
  const std::vector<double> taus = parse_doubles(a.tau);
  std::optional<double> baseline = a.baseline, focal = a.focal;
  if (!a.calib.empty()) {
    const std::string text = [&] {
      const Bytes b = read_file(a.calib);
      return std::string(b.begin(), b.end());
    }();
    const Calibration cal = read_calib(text);
    if (!baseline) baseline = cal.baseline;
    if (!focal) focal = cal.focal;
    if (!baseline || !focal) throw ConfigError("calib file lacks baseline or focal length");
  }
  if (baseline.has_value() != focal.has_value())
    throw ConfigError("the depth-range protocol needs both --baseline and --focal");
  const EvalReport report =
      baseline ? evaluate_protocol(pred, gt, *baseline, *focal, taus) : evaluate_all(pred, gt, taus);
  const std::string csv = to_csv(report, taus);
  if (a.out.empty())
    std::cout << csv;
  else
    write_text(a.out, csv);
  return 0;
}

// ---------------------------------------------------------------------------

json spec_to_json(const AugmentationSpec& s) {
  json j;
  j["seed"] = s.seed;
  if (s.ydisp) j["ydisparity"] = {{"rotation_deg", s.ydisp->rotation_deg}, {"ty", s.ydisp->ty}};
  auto chroma = [](const Chromatic& c) {
    return json{{"brightness", c.brightness}, {"gamma", c.gamma}, {"contrast", c.contrast}};
  };
  if (s.chromatic_left) j["chromatic_left"] = chroma(*s.chromatic_left);
  if (s.chromatic_right) j["chromatic_right"] = chroma(*s.chromatic_right);
  if (s.mask) j["mask"] = {{"x", s.mask->x}, {"y", s.mask->y}, {"width", s.mask->width}, {"height", s.mask->height}};
  return j;
}

struct AugmentArgs {
  std::string left, right, out_left, out_right, out_spec, preset = "training";
};

int cmd_augment(const AugmentArgs& a, const Common& c) {
  const LoadedImage left = load_image(a.left);
  const LoadedImage right = load_image(a.right);
  const AugmentPreset preset = parse_augment_preset(a.preset);
  std::mt19937_64 rng(c.seed);
  AugmentationSpec spec =
      sample_spec(rng, SamplingConfig::for_preset(preset, right.image.width(), right.image.height()));
  spec.seed = c.seed;
  const AugmentedPair out = apply_spec(left.image, right.image, spec);
  auto save = [](const std::string& path, const Image& img, int depth) {
    if (fs::path(path).extension() == ".pfm" || depth == 32)
      write_file(path, write_pfm(img));
    else
      write_file(path, write_png_image(img, depth));
  };
  save(a.out_left, out.left, left.bit_depth);
  save(a.out_right, out.right, right.bit_depth);
  json j = spec_to_json(spec);
  j["preset"] = a.preset;
  j["inputs"] = {a.left, a.right};
  j["outputs"] = {a.out_left, a.out_right};
  write_text(a.out_spec, j.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string left, right, gt, kind, grid, out;
};

int cmd_sweep(const SweepArgs& a, const Common& c) {
  const MatcherConfig cfg = load_matcher_config(c);
  const Image left = load_image(a.left).image;
  const Image right = load_image(a.right).image;
  const DisparityMap gt = load_disparity(a.gt);
  const SweepKind kind = parse_sweep_kind(a.kind);
  const std::vector<double> grid = a.grid.empty() ? default_sweep_grid(kind) : parse_doubles(a.grid);
  const Matcher matcher = [&](const Image& l, const Image& r) { return match(l, r, cfg).back().disparity; };
  const auto curve = robustness_sweep(matcher, left, right, gt, kind, grid);
  std::ostringstream os;
  os << "param,avgerr\n";
  for (const auto& p : curve) os << format_tau(p.param) << ',' << format_tau(p.avgerr) << '\n';
  if (a.out.empty())
    std::cout << os.str();
  else
    write_text(a.out, os.str());
  return 0;
}

// ---------------------------------------------------------------------------

struct TuneArgs {
  std::string dataset, out, trace;
  int budget = 200;
  std::string params;
};

int cmd_tune(const TuneArgs& a, const Common& c) {
  const MatcherConfig initial = load_matcher_config(c);
  std::ifstream in(a.dataset);
  if (!in) throw Error("cannot open dataset manifest " + a.dataset);
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("dataset manifest: ") + e.what());
  }
  const fs::path root = fs::path(a.dataset).parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : root / p; };
  std::vector<TuningSample> data;
  for (const auto& s : manifest.at("scenes")) {
    TuningSample t;
    t.left = load_image(resolve(s.at("left").get<std::string>())).image;
    t.right = load_image(resolve(s.at("right").get<std::string>())).image;
    t.gt = load_disparity(resolve(s.at("gt").get<std::string>()));
    data.push_back(std::move(t));
  }
  TuneOptions opts;
  opts.budget_evals = a.budget;
  if (!a.params.empty()) {
    std::stringstream ss(a.params);
    std::string tok;
    while (std::getline(ss, tok, ',')) opts.params.push_back(tok);
  }
  const TuneResult r = tune(initial, data, opts);
  MatcherConfig out = r.config;
  out.threads = 1;
  save_config(a.out, out);
  std::ostringstream os;
  os << "eval,param,value,loss,accepted\n";
  os << "0,initial,0," << format_tau(r.initial_loss) << ",1\n";
  for (const auto& t : r.trace)
    os << t.eval << ',' << t.param << ',' << format_tau(t.value) << ',' << format_tau(t.loss) << ','
       << (t.accepted ? 1 : 0) << '\n';
  write_text(a.trace.empty() ? a.out + ".trace.csv" : a.trace, os.str());
  std::cerr << "loss " << r.initial_loss << " -> " << r.loss << " in " << r.evals << " evaluations\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  SceneParams params;
  std::string kind = "constant", prefix = "scene";
};

int cmd_generate(GenerateArgs a, const Common& c) {
  a.params.kind = parse_scene_kind(a.kind);
  a.params.seed = c.seed;
  const SyntheticScene s = generate(a.params);
  write_file(a.prefix + "-left.pfm", write_pfm(s.left));
  write_file(a.prefix + "-right.pfm", write_pfm(s.right));
  save_disparity(a.prefix + "-gt.pfm", s.gt);
  json m = base_manifest("generate", c);
  m["kind"] = a.kind;
  m["outputs"] = {a.prefix + "-left.pfm", a.prefix + "-right.pfm", a.prefix + "-gt.pfm"};
  write_text(a.prefix + "-manifest.json", m.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anytime hierarchical stereo matcher"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub, bool with_config) {
    sub->add_option("--threads", common.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", common.seed, "random seed");
    if (with_config) sub->add_option("--config", common.config, "key=value config file")->check(CLI::ExistingFile);
  };

  MatchArgs ma;
  auto* match_cmd = app.add_subcommand("match", "run the anytime matcher");
  match_cmd->add_option("left", ma.left)->required()->check(CLI::ExistingFile);
  match_cmd->add_option("right", ma.right)->required()->check(CLI::ExistingFile);
  match_cmd->add_option("--dmax", ma.dmax, "search range in pixels");
  match_cmd->add_option("--mode", ma.mode, "F, H or Q");
  match_cmd->add_option("--budget-ms", ma.budget_ms, "stop after the stage that crosses this budget");
  match_cmd->add_option("--out-prefix", ma.prefix);
  add_common(match_cmd, true);

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "score a disparity map");
  eval_cmd->add_option("pred", ea.pred)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("gt", ea.gt)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--calib", ea.calib)->check(CLI::ExistingFile);
  eval_cmd->add_option("--baseline", ea.baseline, "metres");
  eval_cmd->add_option("--focal", ea.focal, "pixels");
  eval_cmd->add_option("--tau", ea.tau, "comma-separated thresholds");
  eval_cmd->add_option("--out", ea.out, "CSV file (default stdout)");

  AugmentArgs aa;
  auto* aug_cmd = app.add_subcommand("augment", "apply a sampled augmentation");
  aug_cmd->add_option("left", aa.left)->required()->check(CLI::ExistingFile);
  aug_cmd->add_option("right", aa.right)->required()->check(CLI::ExistingFile);
  aug_cmd->add_option("--preset", aa.preset, "identity, training or sweep");
  aug_cmd->add_option("--out-left", aa.out_left)->required();
  aug_cmd->add_option("--out-right", aa.out_right)->required();
  aug_cmd->add_option("--out-spec", aa.out_spec)->required();
  add_common(aug_cmd, false);

  SweepArgs sa;
  auto* sweep_cmd = app.add_subcommand("sweep", "calibration-error robustness curve");
  sweep_cmd->add_option("left", sa.left)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("right", sa.right)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("gt", sa.gt)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--kind", sa.kind, "rotation, ytrans or occlusion")->required();
  sweep_cmd->add_option("--grid", sa.grid, "comma-separated parameter values");
  sweep_cmd->add_option("--out", sa.out, "CSV file (default stdout)");
  add_common(sweep_cmd, true);

  TuneArgs ta;
  auto* tune_cmd = app.add_subcommand("tune", "coordinate search on the multi-scale loss");
  tune_cmd->add_option("dataset", ta.dataset, "JSON with scenes[{left,right,gt}]")->required()->check(CLI::ExistingFile);
  tune_cmd->add_option("--budget", ta.budget, "loss evaluations")->check(CLI::NonNegativeNumber);
  tune_cmd->add_option("--params", ta.params, "comma-separated subset of tunable parameters");
  tune_cmd->add_option("--out", ta.out)->required();
  tune_cmd->add_option("--trace", ta.trace, "loss trace CSV (default <out>.trace.csv)");
  add_common(tune_cmd, true);

  GenerateArgs ga;
  auto* gen_cmd = app.add_subcommand("generate", "write a synthetic random-dot scene");
  gen_cmd->add_option("--kind", ga.kind, "constant, plane, two-plane or step");
  gen_cmd->add_option("--width", ga.params.width);
  gen_cmd->add_option("--height", ga.params.height);
  gen_cmd->add_option("--d0", ga.params.d0);
  gen_cmd->add_option("--plane-a", ga.params.plane_a);
  gen_cmd->add_option("--plane-b", ga.params.plane_b);
  gen_cmd->add_option("--plane-c", ga.params.plane_c);
  gen_cmd->add_option("--step-left", ga.params.step_left);
  gen_cmd->add_option("--step-right", ga.params.step_right);
  gen_cmd->add_option("--smoothing", ga.params.smoothing, "texture blur sigma in pixels");
  gen_cmd->add_option("--out-prefix", ga.prefix);
  add_common(gen_cmd, false);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*match_cmd) return cmd_match(ma, common);
    if (*eval_cmd) return cmd_eval(ea);
    if (*aug_cmd) return cmd_augment(aa, common);
    if (*sweep_cmd) return cmd_sweep(sa, common);
    if (*tune_cmd) return cmd_tune(ta, common);
    if (*gen_cmd) return cmd_generate(ga, common);
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
