#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "casr/error.hpp"
#include "casr/image.hpp"
#include "casr/image_io.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace casr;
using casr::test::TempDir;

namespace {

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream os(p, std::ios::binary);
  os << bytes;
}

// 16-bit grayscale PNG written straight through libpng.
void write_png16(const std::filesystem::path& p) {
  FILE* fp = std::fopen(p.string().c_str(), "wb");
  REQUIRE(fp);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, fp);
  png_set_IHDR(png, info, 2, 1, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_byte row[4] = {0, 1, 2, 3};
  png_write_row(png, row);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

// Scalar reference for half-pixel-center bilinear sampling along one axis.
double lerp_reference(const std::vector<double>& src, Eigen::Index dst, Eigen::Index dst_len) {
  const auto n = static_cast<double>(src.size());
  double s = (dst + 0.5) * n / static_cast<double>(dst_len) - 0.5;
  s = std::min(std::max(s, 0.0), n - 1.0);
  const auto i0 = static_cast<std::size_t>(s);
  const auto i1 = std::min(i0 + 1, src.size() - 1);
  const double f = s - static_cast<double>(i0);
  return src[i0] * (1.0 - f) + src[i1] * f;
}

}  // namespace

TEST_SUITE("imagecore") {
  TEST_CASE("P5 PGM bytes load verbatim") {
    TempDir dir("pgm");
    write_bytes(dir / "a.pgm", std::string("P5\n2 2\n255\n") + std::string("\x00\x80\xff\x07", 4));
    const GrayImage img = load_image(dir / "a.pgm");
    REQUIRE(img.rows() == 2);
    REQUIRE(img.cols() == 2);
    CHECK(img(0, 0) == 0);
    CHECK(img(0, 1) == 128);
    CHECK(img(1, 0) == 255);
    CHECK(img(1, 1) == 7);
  }

  TEST_CASE("PGM with comments and P5 round trip") {
    TempDir dir("pgm2");
    write_bytes(dir / "c.pgm", std::string("P5\n# made by hand\n3 1\n255\n") + std::string("\x01\x02\x03", 3));
    const GrayImage img = load_image(dir / "c.pgm");
    CHECK(img.cols() == 3);
    CHECK(img(0, 2) == 3);

    std::mt19937_64 rng(5);
    const GrayImage r = test::random_gray(7, 5, rng);
    save_image(r, dir / "r.pgm");
    CHECK((load_image(dir / "r.pgm") == r).all());
  }

  TEST_CASE("16-bit PNG is rejected") {
    TempDir dir("png16");
    write_png16(dir / "deep.png");
    CHECK_THROWS_WITH_AS(load_image(dir / "deep.png"), doctest::Contains("unsupported bit depth"), IoError);
  }

  TEST_CASE("missing and malformed files raise I/O errors") {
    TempDir dir("bad");
    CHECK_THROWS_AS(load_image(dir / "nope.png"), IoError);
    write_bytes(dir / "junk.png", "not an image");
    CHECK_THROWS_AS(load_image(dir / "junk.png"), IoError);
    write_bytes(dir / "p2.pgm", "P2\n1 1\n255\n0\n");
    CHECK_THROWS_AS(load_image(dir / "p2.pgm"), IoError);
  }

  TEST_CASE("gray PNG round trip is exact") {
    TempDir dir("png");
    std::mt19937_64 rng(11);
    for (int i = 0; i < 5; ++i) {
      const GrayImage img = test::random_gray(3 + i, 17 - i, rng);
      save_image(img, dir / "g.png");
      CHECK((load_image(dir / "g.png") == img).all());
    }
  }

  TEST_CASE("masks serialize as 0 and 255") {
    TempDir dir("mask");
    save_image(BinaryMask(BinaryMask::Constant(4, 6, true)), dir / "t.png");
    save_image(BinaryMask(BinaryMask::Constant(4, 6, false)), dir / "f.png");
    CHECK((load_image(dir / "t.png") == 255).all());
    CHECK((load_image(dir / "f.png") == 0).all());
    std::mt19937_64 rng(3);
    const BinaryMask m = test::random_mask(9, 8, 0.4, rng);
    save_image(m, dir / "m.png");
    CHECK((gray_to_mask(load_image(dir / "m.png")) == m).all());
  }

  TEST_CASE("two-plane images round trip") {
    TempDir dir("multi");
    std::mt19937_64 rng(8);
    MultiChannelImage img{{test::random_gray(6, 10, rng), test::random_gray(6, 10, rng)}};
    save_image(img, dir / "mc.png");
    const MultiChannelImage back = load_multichannel(dir / "mc.png");
    REQUIRE(back.channels() == 2);
    CHECK((back.planes[0] == img.planes[0]).all());
    CHECK((back.planes[1] == img.planes[1]).all());
  }

  TEST_CASE("RGB overlay PNG is written") {
    TempDir dir("rgb");
    RgbImage img(3, 4);
    img.g(1, 2) = 255;
    save_image(img, dir / "o.png");
    CHECK(std::filesystem::file_size(dir / "o.png") > 0);
    CHECK_THROWS_AS(load_image(dir / "o.png"), IoError);  // color input is not accepted
  }

  TEST_CASE("crop_center") {
    GrayImage ramp(10, 10);
    for (Eigen::Index y = 0; y < 10; ++y)
      for (Eigen::Index x = 0; x < 10; ++x) ramp(y, x) = static_cast<std::uint8_t>(10 * y + x);

    const GrayImage big = GrayImage::Zero(100, 100);
    const GrayImage c90 = crop_center(big, 0.9);
    CHECK(c90.rows() == 90);
    CHECK(c90.cols() == 90);

    CHECK((crop_center(ramp, 1.0) == ramp).all());

    const GrayImage c = crop_center(ramp, 0.5);
    REQUIRE(c.rows() == 5);
    for (Eigen::Index y = 0; y < 5; ++y)
      for (Eigen::Index x = 0; x < 5; ++x) CHECK(c(y, x) == 10 * (y + 2) + (x + 2));

    CHECK_THROWS_AS(crop_center(ramp, 0.0), ContractError);
    CHECK_THROWS_AS(crop_center(ramp, 1.5), ContractError);
  }

  TEST_CASE("crop output is a sub-rectangle of the input") {
    std::mt19937_64 rng(21);
    for (double f : {0.3, 0.55, 0.77, 0.9}) {
      const GrayImage img = test::random_gray(31, 23, rng);
      const GrayImage c = crop_center(img, f);
      const Eigen::Index y0 = (31 - c.rows()) / 2, x0 = (23 - c.cols()) / 2;
      CHECK((img.block(y0, x0, c.rows(), c.cols()) == c).all());
    }
  }

  TEST_CASE("resize_bilinear") {
    const GrayImage k = GrayImage::Constant(13, 9, 97);
    CHECK((resize_bilinear(k, 31, 4) == 97).all());
    CHECK((resize_bilinear(k, 9, 13) == k).all());

    GrayImage two(1, 2);
    two << 0, 255;
    const GrayImage up = resize_bilinear(two, 4, 1);
    REQUIRE(up.cols() == 4);
    const std::vector<double> src{0.0, 255.0};
    for (Eigen::Index x = 0; x < 4; ++x) CHECK(up(0, x) == static_cast<int>(std::lround(lerp_reference(src, x, 4))));
    for (Eigen::Index x = 1; x < 4; ++x) CHECK(up(0, x) >= up(0, x - 1));
  }

  TEST_CASE("resize stays within the input range") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 20; ++i) {
      const GrayImage img = test::random_gray(5 + i % 7, 4 + i % 5, rng);
      const GrayImage r = resize_bilinear(img, 3 + i, 11 - i % 6);
      CHECK(r.minCoeff() >= img.minCoeff());
      CHECK(r.maxCoeff() <= img.maxCoeff());
    }
  }

  TEST_CASE("quantize rounds and clamps") {
    FloatImage f(1, 4);
    f << -3.0, 0.49, 127.5, 300.0;
    const GrayImage q = quantize(f);
    CHECK(q(0, 0) == 0);
    CHECK(q(0, 1) == 0);
    CHECK(q(0, 2) == 128);
    CHECK(q(0, 3) == 255);
  }
}
