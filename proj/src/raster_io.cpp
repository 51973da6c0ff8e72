#include "hsm/raster_io.hpp"

#include <png.h>

#include <bit>
#include <charconv>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace hsm {

namespace {

bool is_space(std::uint8_t c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t'; }

class HeaderReader {
 public:
  explicit HeaderReader(ByteView bytes) : bytes_(bytes) {}

  std::string token() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !is_space(bytes_[pos_])) ++pos_;
    if (pos_ == start) throw FormatError("PFM header truncated", pos_);
    return std::string(reinterpret_cast<const char*>(bytes_.data()) + start, pos_ - start);
  }

  /// Consumes the single whitespace byte that ends the header.
  void end_header() {
    if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) throw FormatError("PFM header not terminated", pos_);
    ++pos_;
  }

  std::size_t pos() const { return pos_; }

 private:
  void skip_space() {
    while (pos_ < bytes_.size() && is_space(bytes_[pos_])) ++pos_;
  }

  ByteView bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
T parse_number(const std::string& tok, std::size_t offset, const char* what) {
  T v{};
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw FormatError(std::string("PFM ") + what + " is not a number: '" + tok + "'", offset);
  return v;
}

float load_float(const std::uint8_t* p, Endian e) {
  std::uint32_t u;
  std::memcpy(&u, p, 4);
  const bool host_little = std::endian::native == std::endian::little;
  if ((e == Endian::little) != host_little) u = __builtin_bswap32(u);
  return std::bit_cast<float>(u);
}

void store_float(std::uint8_t* p, float v, Endian e) {
  std::uint32_t u = std::bit_cast<std::uint32_t>(v);
  const bool host_little = std::endian::native == std::endian::little;
  if ((e == Endian::little) != host_little) u = __builtin_bswap32(u);
  std::memcpy(p, &u, 4);
}

std::string format_scale(float scale, Endian e) {
  const double v = e == Endian::little ? -double(scale) : double(scale);
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

Bytes pfm_bytes(const std::vector<const Planef*>& planes, float scale, Endian endian) {
  if (!(scale > 0.0f) || !std::isfinite(scale)) throw Error("PFM scale must be positive and finite");
  const int h = static_cast<int>(planes[0]->rows()), w = static_cast<int>(planes[0]->cols());
  if (w == 0 || h == 0) throw Error("cannot write an empty PFM raster");
  const std::string header = std::string(planes.size() == 1 ? "Pf" : "PF") + "\n" + std::to_string(w) + " " +
                             std::to_string(h) + "\n" + format_scale(scale, endian) + "\n";
  Bytes out(header.begin(), header.end());
  const std::size_t nc = planes.size();
  out.resize(header.size() + std::size_t(w) * h * nc * 4);
  std::uint8_t* p = out.data() + header.size();
  for (int row = h - 1; row >= 0; --row)
    for (int x = 0; x < w; ++x)
      for (std::size_t c = 0; c < nc; ++c, p += 4) store_float(p, (*planes[c])(row, x), endian);
  return out;
}

}  // namespace

PfmFile read_pfm(ByteView bytes) {
  HeaderReader hr(bytes);
  const std::string magic = hr.token();
  int channels;
  if (magic == "Pf")
    channels = 1;
  else if (magic == "PF")
    channels = 3;
  else
    throw FormatError("bad PFM magic '" + magic + "'", 0);
  const std::size_t dims_at = hr.pos();
  const int w = parse_number<int>(hr.token(), dims_at, "width");
  const int h = parse_number<int>(hr.token(), hr.pos(), "height");
  if (w <= 0 || h <= 0) throw FormatError("PFM dimensions must be positive", dims_at);
  const std::size_t scale_at = hr.pos();
  const double scale = parse_number<double>(hr.token(), scale_at, "scale");
  if (scale == 0.0 || !std::isfinite(scale)) throw FormatError("PFM scale must be nonzero", scale_at);
  hr.end_header();

  PfmFile file;
  file.endian = scale < 0.0 ? Endian::little : Endian::big;
  file.scale = static_cast<float>(std::abs(scale));
  const std::size_t need = std::size_t(w) * h * channels * 4;
  if (bytes.size() - hr.pos() < need)
    throw FormatError("PFM payload truncated: need " + std::to_string(need) + " bytes", bytes.size());
  const std::uint8_t* p = bytes.data() + hr.pos();
  std::vector<Planef> planes(channels, Planef(h, w));
  for (int row = h - 1; row >= 0; --row)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c, p += 4) planes[c](row, x) = load_float(p, file.endian);
  if (channels == 1)
    file.raster = DisparityMap::from_plane(std::move(planes[0]));
  else
    file.raster = Image::from_planes(std::move(planes));
  return file;
}

Bytes write_pfm(const DisparityMap& map, float scale, Endian endian) {
  Planef values(map.height(), map.width());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!map.valid(i)) {
      values(i) = std::numeric_limits<float>::infinity();
      continue;
    }
    if (std::isnan(map.disparity(i))) throw Error("NaN disparity in a valid pixel");
    values(i) = map.disparity(i);
  }
  return pfm_bytes({&values}, scale, endian);
}

Bytes write_pfm(const Image& image, float scale, Endian endian) {
  if (image.empty()) throw Error("cannot write an empty PFM raster");
  std::vector<const Planef*> planes;
  for (int c = 0; c < image.channels(); ++c) {
    if (image.channel(c).isNaN().any()) throw Error("NaN in image");
    planes.push_back(&image.channel(c));
  }
  return pfm_bytes(planes, scale, endian);
}

Bytes write_pfm(const PfmFile& file) {
  return std::visit([&](const auto& r) { return write_pfm(r, file.scale, file.endian); }, file.raster);
}

// ---------------------------------------------------------------------------
// PNG

namespace {

struct ReadCursor {
  ByteView bytes;
  std::size_t pos = 0;
};

void png_read_from_cursor(png_structp png, png_bytep out, png_size_t n) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->bytes.size() - cur->pos < n) png_error(png, "truncated PNG data");
  std::memcpy(out, cur->bytes.data() + cur->pos, n);
  cur->pos += n;
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void png_flush_noop(png_structp) {}

struct PngErrorState {
  std::string message;
};

void png_error_to_state(png_structp png, png_const_charp msg) {
  auto* st = static_cast<PngErrorState*>(png_get_error_ptr(png));
  if (st) st->message = msg;
  png_longjmp(png, 1);
}

void png_warning_silent(png_structp, png_const_charp) {}

}  // namespace

PngRaster decode_png(ByteView bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw FormatError("not a PNG file", 0);
  PngErrorState err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_to_state, png_warning_silent);
  if (!png) throw Error("libpng allocation failed");
  png_infop info = png_create_info_struct(png);
  ReadCursor cursor{bytes, 0};
  PngRaster r;
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("PNG decode failed: " + err.message, cursor.pos);
  }
  png_set_read_fn(png, &cursor, png_read_from_cursor);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  png_read_update_info(png, info);
  r.width = static_cast<int>(png_get_image_width(png, info));
  r.height = static_cast<int>(png_get_image_height(png, info));
  r.channels = png_get_channels(png, info);
  r.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * r.height);
  rows.resize(r.height);
  for (int y = 0; y < r.height; ++y) rows[y] = buffer.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t n = std::size_t(r.width) * r.height * r.channels;
  r.samples.resize(n);
  if (r.bit_depth == 16) {
    std::memcpy(r.samples.data(), buffer.data(), n * 2);
  } else {
    for (std::size_t i = 0; i < n; ++i) r.samples[i] = buffer[i];
  }
  return r;
}

Bytes encode_png(const PngRaster& r) {
  if (r.bit_depth != 8 && r.bit_depth != 16) throw Error("PNG bit depth must be 8 or 16");
  if (r.width <= 0 || r.height <= 0) throw Error("cannot write an empty PNG");
  int color;
  switch (r.channels) {
    case 1: color = PNG_COLOR_TYPE_GRAY; break;
    case 2: color = PNG_COLOR_TYPE_GRAY_ALPHA; break;
    case 3: color = PNG_COLOR_TYPE_RGB; break;
    case 4: color = PNG_COLOR_TYPE_RGB_ALPHA; break;
    default: throw Error("PNG channel count must be 1..4");
  }
  const std::size_t n = std::size_t(r.width) * r.height * r.channels;
  if (r.samples.size() != n) throw Error("PNG sample count mismatch");
  std::vector<std::uint8_t> buffer(n * (r.bit_depth / 8));
  if (r.bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      buffer[2 * i] = static_cast<std::uint8_t>(r.samples[i] >> 8);  // PNG is big-endian
      buffer[2 * i + 1] = static_cast<std::uint8_t>(r.samples[i] & 0xff);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (r.samples[i] > 255) throw Error("8-bit PNG sample out of range");
      buffer[i] = static_cast<std::uint8_t>(r.samples[i]);
    }
  }
  PngErrorState err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_to_state, png_warning_silent);
  if (!png) throw Error("libpng allocation failed");
  png_infop info = png_create_info_struct(png);
  Bytes out;
  std::vector<png_bytep> rows(r.height);
  const std::size_t rowbytes = std::size_t(r.width) * r.channels * (r.bit_depth / 8);
  for (int y = 0; y < r.height; ++y) rows[y] = buffer.data() + rowbytes * y;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG encode failed: " + err.message);
  }
  png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
  png_set_IHDR(png, info, r.width, r.height, r.bit_depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

DisparityMap read_kitti_disparity(ByteView bytes) {
  const PngRaster r = decode_png(bytes);
  if (r.bit_depth != 16) throw FormatError("KITTI disparity PNG must be 16-bit", 24);
  if (r.channels != 1) throw FormatError("KITTI disparity PNG must be single-channel", 25);
  DisparityMap m(r.width, r.height);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) {
      const std::uint16_t v = r.samples[std::size_t(y) * r.width + x];
      if (v == 0)
        m.invalidate(y, x);
      else
        m.disparity(y, x) = static_cast<float>(v) / 256.0f;
    }
  return m;
}

Bytes write_kitti_disparity(const DisparityMap& map) {
  PngRaster r;
  r.width = map.width();
  r.height = map.height();
  r.channels = 1;
  r.bit_depth = 16;
  r.samples.resize(std::size_t(r.width) * r.height);
  for (Eigen::Index i = 0; i < map.disparity.size(); ++i) {
    if (!map.valid(i)) {
      r.samples[i] = 0;
      continue;
    }
    const double d = map.disparity(i);
    if (!std::isfinite(d)) throw Error("non-finite disparity in a valid pixel");
    r.samples[i] = static_cast<std::uint16_t>(std::clamp(std::round(d * 256.0), 1.0, 65535.0));
  }
  return encode_png(r);
}

LoadedImage read_image(ByteView bytes) {
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == 'f' || bytes[1] == 'F')) {
    PfmFile f = read_pfm(bytes);
    LoadedImage out;
    out.bit_depth = 32;
    if (auto* img = std::get_if<Image>(&f.raster)) {
      out.image = std::move(*img);
    } else {
      auto& m = std::get<DisparityMap>(f.raster);
      out.image = Image::from_plane(m.valid.select(m.disparity, 0.0f));
    }
    return out;
  }
  const PngRaster r = decode_png(bytes);
  const int colour = r.channels >= 3 ? 3 : 1;
  const double max_code = r.bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<Planef> planes(colour, Planef(r.height, r.width));
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x)
      for (int c = 0; c < colour; ++c)
        planes[c](y, x) =
            static_cast<float>(r.samples[(std::size_t(y) * r.width + x) * r.channels + c] / max_code);
  return LoadedImage{Image::from_planes(std::move(planes)), r.bit_depth};
}

Bytes write_png_image(const Image& image, int bit_depth) {
  if (image.empty()) throw Error("cannot write an empty image");
  PngRaster r;
  r.width = image.width();
  r.height = image.height();
  r.channels = image.channels();
  r.bit_depth = bit_depth;
  const double max_code = bit_depth == 16 ? 65535.0 : 255.0;
  r.samples.resize(std::size_t(r.width) * r.height * r.channels);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x)
      for (int c = 0; c < r.channels; ++c) {
        const double v = std::clamp(double(image(c, y, x)), 0.0, 1.0);
        r.samples[(std::size_t(y) * r.width + x) * r.channels + c] =
            static_cast<std::uint16_t>(std::lround(v * max_code));
      }
  return encode_png(r);
}

// ---------------------------------------------------------------------------

Calibration read_calib(std::string_view text) {
  Calibration cal;
  bool have_ndisp = false;
  std::optional<double> baseline_raw, cam0_focal, focal;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto number = [&](const std::string& s) {
      try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        return v;
      } catch (const std::exception&) {
        throw Error("calib line " + std::to_string(line_no) + ": '" + key + "' is not a number");
      }
    };
    if (key == "ndisp") {
      const double v = number(value);
      if (v != std::floor(v)) throw Error("calib: ndisp must be an integer");
      cal.ndisp = static_cast<int>(v);
      have_ndisp = true;
    } else if (key == "baseline") {
      baseline_raw = number(value);
    } else if (key == "focal" || key == "f") {
      focal = number(value);
    } else if (key == "doffs") {
      cal.doffs = number(value);
    } else if (key == "cam0") {
      const auto open = value.find('[');
      cam0_focal = number(value.substr(open == std::string::npos ? 0 : open + 1));
    }
  }
  if (!have_ndisp) throw Error("calib: missing ndisp");
  if (cal.ndisp <= 0) throw Error("calib: ndisp must be positive (empty search range)");
  if (baseline_raw) cal.baseline = cam0_focal ? *baseline_raw / 1000.0 : *baseline_raw;
  if (focal)
    cal.focal = focal;
  else if (cam0_focal)
    cal.focal = cam0_focal;
  return cal;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, ByteView bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

namespace {
bool has_ext(const std::filesystem::path& p, const char* ext) {
  std::string e = p.extension().string();
  for (char& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e == ext;
}
}  // namespace

DisparityMap load_disparity(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  if (has_ext(path, ".png")) return read_kitti_disparity(b);
  PfmFile f = read_pfm(b);
  if (auto* m = std::get_if<DisparityMap>(&f.raster)) return std::move(*m);
  throw Error(path.string() + " is a 3-channel PFM, not a disparity map");
}

void save_disparity(const std::filesystem::path& path, const DisparityMap& map) {
  write_file(path, has_ext(path, ".png") ? write_kitti_disparity(map) : write_pfm(map));
}

LoadedImage load_image(const std::filesystem::path& path) { return read_image(read_file(path)); }

void save_image(const std::filesystem::path& path, const Image& image, int bit_depth) {
  write_file(path, has_ext(path, ".pfm") || bit_depth == 32 ? write_pfm(image) : write_png_image(image, bit_depth));
}

}  // namespace hsm
