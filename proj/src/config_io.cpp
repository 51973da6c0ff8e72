#include "hsm/config_io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace hsm {

namespace {

std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename Range>
std::string list(const Range& r) {
  std::string s;
  for (const auto& v : r) {
    if (!s.empty()) s += ',';
    if constexpr (std::is_integral_v<std::decay_t<decltype(v)>>)
      s += std::to_string(v);
    else
      s += num(v);
  }
  return s;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_value(const std::string& key, const std::string& v) {
  T out{};
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  if (v.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = v.find(',', start);
    out.push_back(parse_value<T>(key, trim(std::string_view(v).substr(start, comma - start))));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T, std::size_t N>
std::array<T, N> parse_array(const std::string& key, const std::string& v) {
  const auto xs = parse_list<T>(key, v);
  if (xs.size() != N) throw ConfigError("config key '" + key + "' needs " + std::to_string(N) + " values");
  std::array<T, N> out{};
  std::copy(xs.begin(), xs.end(), out.begin());
  return out;
}

}  // namespace

std::string to_config_text(const MatcherConfig& c) {
  std::ostringstream os;
  os << "max_disparity=" << c.max_disparity << '\n';
  os << "mode=" << mode_letter(c.mode) << '\n';
  os << "stages=" << c.stages << '\n';
  os << "threads=" << c.threads << '\n';
  os << "strides=" << list(c.strides.strides) << '\n';
  os << "encoder.channels=" << list(c.encoder.channels) << '\n';
  os << "encoder.pooled_windows=" << list(c.encoder.pooled_windows) << '\n';
  os << "encoder.rank_radius=" << c.encoder.rank_radius << '\n';
  os << "encoder.intensity_gain=" << num(c.encoder.intensity_gain) << '\n';
  os << "encoder.gradient_gain=" << num(c.encoder.gradient_gain) << '\n';
  os << "encoder.rank_gain=" << num(c.encoder.rank_gain) << '\n';
  const auto& d = c.decoder;
  os << "decoder.agg_blocks=" << d.agg_blocks << '\n';
  os << "decoder.window=" << list(d.window) << '\n';
  os << "decoder.alpha=" << num(d.alpha) << '\n';
  os << "decoder.vpp_grids=" << list(d.vpp_grids) << '\n';
  os << "decoder.gamma=" << num(d.gamma) << '\n';
  os << "decoder.beta=" << num(d.beta) << '\n';
  os << "decoder.w_intensity=" << num(d.weights.intensity) << '\n';
  os << "decoder.w_gradient=" << num(d.weights.gradient) << '\n';
  os << "decoder.w_rank=" << num(d.weights.rank) << '\n';
  os << "decoder.w_pooled=" << num(d.weights.pooled) << '\n';
  os << "decoder.channel_weights=" << list(d.channel_weights) << '\n';
  os << "decoder.fuse_mode=" << (d.fuse_mode == FuseMode::feature ? "feature" : "cost") << '\n';
  return os.str();
}

MatcherConfig parse_config_text(std::string_view text, MatcherConfig c) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string k = trim(std::string_view(line).substr(0, eq));
    const std::string v = trim(std::string_view(line).substr(eq + 1));
    auto& d = c.decoder;
    if (k == "max_disparity") c.max_disparity = parse_value<int>(k, v);
    else if (k == "mode") c.mode = parse_input_mode(v);
    else if (k == "stages") c.stages = parse_value<int>(k, v);
    else if (k == "threads") c.threads = parse_value<int>(k, v);
    else if (k == "strides") c.strides.strides = parse_array<int, kPyramidLevels>(k, v);
    else if (k == "encoder.channels") c.encoder.channels = parse_array<int, kPyramidLevels>(k, v);
    else if (k == "encoder.pooled_windows") c.encoder.pooled_windows = parse_list<int>(k, v);
    else if (k == "encoder.rank_radius") c.encoder.rank_radius = parse_value<int>(k, v);
    else if (k == "encoder.intensity_gain") c.encoder.intensity_gain = parse_value<double>(k, v);
    else if (k == "encoder.gradient_gain") c.encoder.gradient_gain = parse_value<double>(k, v);
    else if (k == "encoder.rank_gain") c.encoder.rank_gain = parse_value<double>(k, v);
    else if (k == "decoder.agg_blocks") d.agg_blocks = parse_value<int>(k, v);
    else if (k == "decoder.window") d.window = parse_array<int, 3>(k, v);
    else if (k == "decoder.alpha") d.alpha = parse_value<double>(k, v);
    else if (k == "decoder.vpp_grids") d.vpp_grids = parse_list<int>(k, v);
    else if (k == "decoder.gamma") d.gamma = parse_value<double>(k, v);
    else if (k == "decoder.beta") d.beta = parse_value<double>(k, v);
    else if (k == "decoder.w_intensity") d.weights.intensity = parse_value<double>(k, v);
    else if (k == "decoder.w_gradient") d.weights.gradient = parse_value<double>(k, v);
    else if (k == "decoder.w_rank") d.weights.rank = parse_value<double>(k, v);
    else if (k == "decoder.w_pooled") d.weights.pooled = parse_value<double>(k, v);
    else if (k == "decoder.channel_weights") d.channel_weights = parse_list<double>(k, v);
    else if (k == "decoder.fuse_mode") {
      if (v == "feature") d.fuse_mode = FuseMode::feature;
      else if (v == "cost") d.fuse_mode = FuseMode::cost;
      else throw ConfigError("decoder.fuse_mode must be feature or cost");
    } else {
      throw ConfigError("unknown config key '" + k + "'");
    }
  }
  c.validate();
  return c;
}

MatcherConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void save_config(const std::filesystem::path& path, const MatcherConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write config " + path.string());
  out << to_config_text(cfg);
}

}  // namespace hsm
