#include <catch_amalgamated.hpp>

#include <fstream>

#include "oracles.hpp"
#include "shadowae/imageio.hpp"

using namespace shadowae;

TEST_CASE("quantization rounds to nearest and rejects out-of-range values") {
  CHECK(imageio::quantize(0.0f) == 0);
  CHECK(imageio::quantize(1.0f) == 255);
  CHECK(imageio::quantize(0.5f) == 128);
  CHECK_THROWS(imageio::quantize(-0.01f));
  CHECK_THROWS(imageio::quantize(1.01f));
}

TEST_CASE("png and pgm round-trip every byte value") {
  const auto dir = oracle::scratch_dir("imageio");
  imageio::GrayImage img{16, 16, {}};
  for (int i = 0; i < 256; ++i) img.pixels.push_back(static_cast<std::uint8_t>(i));
  for (const char* ext : {".png", ".pgm"}) {
    const auto p = dir / (std::string("all") + ext);
    imageio::write_gray(img, p);
    CHECK(imageio::read_gray(p) == img);
  }
}

TEST_CASE("tensor save and load preserve quantized values") {
  const auto dir = oracle::scratch_dir("imageio_tensor");
  Tensor<float> t(Shape{1, 1, 2, 3}, {0.0f, 0.2f, 0.4f, 0.6f, 0.8f, 1.0f});
  imageio::save(t, dir / "t.png");
  const auto back = imageio::load(dir / "t.png");
  CHECK(back.shape() == t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(back[i] == Catch::Approx(t[i]).margin(0.5 / 255.0));
  CHECK_THROWS(imageio::save(Tensor<float>(Shape{2, 1, 2, 2}), dir / "bad.png"));
}

TEST_CASE("masks store as 0/255") {
  BinaryMask m(3, 1);
  m.pixels = {1, 0, 1};
  const auto g = imageio::from_mask(m);
  CHECK(g.pixels == std::vector<std::uint8_t>{255, 0, 255});
  CHECK(imageio::to_mask(g) == m);
}

TEST_CASE("io errors are reported") {
  const auto dir = oracle::scratch_dir("imageio_err");
  CHECK_THROWS_AS(imageio::read_gray(dir / "missing.png"), imageio::ImageError);
  std::ofstream(dir / "junk.png") << "not a png";
  CHECK_THROWS_AS(imageio::read_gray(dir / "junk.png"), imageio::ImageError);
  CHECK_THROWS(imageio::write_gray(imageio::GrayImage{1, 1, {0}}, dir / "x.bmp"));
  CHECK_THROWS(imageio::write_gray(imageio::GrayImage{1, 1, {0}}, dir / "no" / "such" / "x.png"));
}

TEST_CASE("rgb png round trip") {
  const auto dir = oracle::scratch_dir("imageio_rgb");
  imageio::RgbImage img{3, 2, {}};
  for (int i = 0; i < 18; ++i) img.pixels.push_back(static_cast<std::uint8_t>(i * 14));
  imageio::write_rgb_png(img, dir / "c.png");
  const auto back = imageio::read_rgb_png(dir / "c.png");
  CHECK(back.width == 3);
  CHECK(back.pixels == img.pixels);
  imageio::write_gray(imageio::GrayImage{1, 1, {7}}, dir / "g.png");
  CHECK_THROWS_AS(imageio::read_rgb_png(dir / "g.png"), imageio::ImageError);
  CHECK_THROWS_AS(imageio::read_gray(dir / "c.png"), imageio::ImageError);
}
