#include <doctest.h>

#include <cstring>
#include <limits>

#include "helpers.hpp"
#include "hsm/raster_io.hpp"

using namespace hsm;

namespace {

Bytes bytes_of(const std::string& s) { return Bytes(s.begin(), s.end()); }

void append_floats(Bytes& b, std::initializer_list<float> vs) {
  for (float v : vs) {
    std::uint8_t raw[4];
    std::memcpy(raw, &v, 4);
    b.insert(b.end(), raw, raw + 4);
  }
}

}  // namespace

TEST_CASE("pfm: 2x2 little-endian, rows stored bottom-up") {
  Bytes b = bytes_of("Pf\n2 2\n-1.0\n");
  append_floats(b, {3, 4, 1, 2});  // bottom row first
  PfmFile f = read_pfm(b);
  const auto& m = std::get<DisparityMap>(f.raster);
  CHECK(m.disparity(0, 0) == 1.0f);
  CHECK(m.disparity(0, 1) == 2.0f);
  CHECK(m.disparity(1, 0) == 3.0f);
  CHECK(m.disparity(1, 1) == 4.0f);
  CHECK(f.endian == Endian::little);
  CHECK(write_pfm(f) == b);
}

TEST_CASE("pfm: infinity marks invalid pixels") {
  Bytes b = bytes_of("Pf\n2 1\n-1.0\n");
  append_floats(b, {5.5f, std::numeric_limits<float>::infinity()});
  const auto m = std::get<DisparityMap>(read_pfm(b).raster);
  CHECK(m.valid(0, 0));
  CHECK_FALSE(m.valid(0, 1));
  CHECK(m.valid_count() == 1);
}

TEST_CASE("pfm: big-endian scale and color files") {
  DisparityMap m(3, 2);
  m.disparity << 1, 2, 3, 4, 5, 6;
  const Bytes be = write_pfm(m, 2.0f, Endian::big);
  CHECK(std::string(be.begin(), be.begin() + 11) == "Pf\n3 2\n2.0\n");
  const PfmFile f = read_pfm(be);
  CHECK(f.endian == Endian::big);
  CHECK(f.scale == 2.0f);
  CHECK(std::get<DisparityMap>(f.raster) == m);

  std::mt19937_64 rng(1);
  const Image rgb = test::random_image(rng, 5, 4, 3);
  const PfmFile g = read_pfm(write_pfm(rgb));
  CHECK(std::get<Image>(g.raster) == rgb);
}

TEST_CASE("pfm: malformed inputs report errors") {
  CHECK_THROWS_AS(read_pfm(bytes_of("P6\n2 2\n255\n")), FormatError);
  CHECK_THROWS_AS(read_pfm(bytes_of("Pf\n2 x\n-1.0\n")), FormatError);
  CHECK_THROWS_AS(read_pfm(bytes_of("Pf\n2 2\n0\n")), FormatError);
  Bytes truncated = bytes_of("Pf\n2 2\n-1.0\n");
  append_floats(truncated, {1, 2, 3});
  try {
    read_pfm(truncated);
    FAIL("expected a truncation error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == truncated.size());
  }
}

TEST_CASE("kitti png: encoding, zero invalid, clamp") {
  DisparityMap m(4, 1);
  m.disparity << 0.0f, 1.5f, 300.0f, 256.0f;
  m.invalidate(0, 3);
  const DisparityMap back = read_kitti_disparity(write_kitti_disparity(m));
  CHECK(back.valid(0, 0));
  CHECK(back.disparity(0, 0) == doctest::Approx(1.0 / 256.0));  // valid 0 is stored as 1
  CHECK(back.disparity(0, 1) == 1.5f);
  CHECK(back.disparity(0, 2) == 65535.0f / 256.0f);
  CHECK_FALSE(back.valid(0, 3));
}

TEST_CASE("kitti png: 8-bit input is rejected") {
  PngRaster r;
  r.width = 2;
  r.height = 2;
  r.channels = 1;
  r.bit_depth = 8;
  r.samples = {1, 2, 3, 4};
  CHECK_THROWS_AS(read_kitti_disparity(encode_png(r)), FormatError);
}

TEST_CASE("png image: 8 and 16 bit round trip of code values") {
  PngRaster r;
  r.width = 3;
  r.height = 2;
  r.channels = 3;
  r.bit_depth = 16;
  for (int i = 0; i < 18; ++i) r.samples.push_back(static_cast<std::uint16_t>(i * 3000));
  const PngRaster back = decode_png(encode_png(r));
  CHECK(back.samples == r.samples);
  const LoadedImage img = read_image(encode_png(r));
  CHECK(img.bit_depth == 16);
  CHECK(img.image.channels() == 3);
  CHECK(img.image(1, 0, 0) == doctest::Approx(3000.0 / 65535.0));
  CHECK(decode_png(write_png_image(img.image, 16)).samples == r.samples);
}

TEST_CASE("calib: middlebury units and errors") {
  const Calibration mb = read_calib("cam0=[3997.684 0 1176.728; 0 3997.684 1011.728; 0 0 1]\n"
                                    "doffs=131.111\nbaseline=193.001\nwidth=2964\nndisp=280\n");
  CHECK(mb.ndisp == 280);
  CHECK(*mb.baseline == doctest::Approx(0.193001));
  CHECK(*mb.focal == doctest::Approx(3997.684));
  CHECK(*mb.doffs == doctest::Approx(131.111));

  const Calibration plain = read_calib("baseline=0.54\nfocal=3578\nndisp=256\n");
  CHECK(*plain.baseline == 0.54);
  CHECK(*plain.focal == 3578.0);

  CHECK_THROWS(read_calib("baseline=0.54\n"));
  CHECK_THROWS(read_calib("ndisp=0\n"));
}
