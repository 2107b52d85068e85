#include <catch_amalgamated.hpp>

#include <cmath>
#include <algorithm>
#include <array>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "shadowae/eval.hpp"

using shadowae::BinaryMask;
using shadowae::Shape;
using shadowae::Tensor;

namespace {

BinaryMask from_bits(std::size_t w, std::size_t h, std::vector<std::uint8_t> bits) {
  BinaryMask m(w, h);
  m.pixels = std::move(bits);
  return m;
}

Tensor<float> plane(std::size_t w, std::size_t h, std::vector<float> v) {
  return Tensor<float>(Shape{1, 1, h, w}, std::move(v));
}

}  // namespace

TEST_CASE("IoU and DICE match set counting on random 16x16 pairs") {
  std::mt19937_64 gen(777);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const auto a = oracle::random_mask(gen, 16, 16, density(gen));
    const auto b = oracle::random_mask(gen, 16, 16, density(gen));
    const auto want = oracle::set_scores(a, b);
    const double iou = shadowae::iou(a, b);
    const double dice = shadowae::dice(a, b);
    REQUIRE(iou == want.iou);
    REQUIRE(dice == want.dice);
    REQUIRE(std::abs(dice - 2.0 * iou / (1.0 + iou)) <= 1e-12);
  }
}

TEST_CASE("IoU and DICE worked examples") {
  const auto pred = from_bits(4, 1, {1, 1, 0, 0});
  const auto truth = from_bits(4, 1, {0, 1, 1, 0});
  CHECK(shadowae::iou(pred, truth) == Catch::Approx(1.0 / 3.0));
  CHECK(shadowae::dice(pred, truth) == Catch::Approx(0.5));
  const BinaryMask empty(4, 1);
  CHECK(shadowae::iou(empty, empty) == 1.0);
  CHECK(shadowae::dice(empty, empty) == 1.0);
  CHECK(shadowae::iou(pred, empty) == 0.0);
  CHECK(shadowae::iou(pred, pred) == 1.0);
  CHECK_THROWS_AS(shadowae::iou(pred, BinaryMask(2, 2)), std::invalid_argument);
}

TEST_CASE("IoU and DICE are symmetric and permutation invariant") {
  std::mt19937_64 gen(8);
  std::vector<std::size_t> perm(64);
  for (int i = 0; i < 100; ++i) {
    const auto a = oracle::random_mask(gen, 8, 8, 0.4);
    const auto b = oracle::random_mask(gen, 8, 8, 0.4);
    CHECK(shadowae::iou(a, b) == shadowae::iou(b, a));
    CHECK(shadowae::dice(a, b) == shadowae::dice(b, a));
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), gen);
    BinaryMask pa(8, 8), pb(8, 8);
    for (std::size_t k = 0; k < 64; ++k) {
      pa.pixels[k] = a.pixels[perm[k]];
      pb.pixels[k] = b.pixels[perm[k]];
    }
    CHECK(shadowae::iou(pa, pb) == shadowae::iou(a, b));
  }
}

TEST_CASE("binarize uses strict less-than") {
  const auto m = shadowae::binarize(plane(3, 1, {0.2f, 0.5f, 0.9f}), 0.5);
  CHECK(m.pixels == std::vector<std::uint8_t>{1, 0, 0});
  CHECK_THROWS(shadowae::binarize(plane(1, 1, {0.1f}), 0.0));
  CHECK_THROWS(shadowae::binarize(plane(1, 1, {0.1f}), 1.0));
}

TEST_CASE("binarized area grows with tau") {
  std::mt19937_64 gen(9);
  const auto s = oracle::random_tensor_f(gen, Shape{1, 1, 12, 12}, 0.0f, 1.0f);
  std::size_t prev = 0;
  for (double tau : shadowae::default_tau_grid()) {
    const auto c = shadowae::binarize(s, tau).count();
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("mean and population standard deviation") {
  const auto ms = shadowae::mean_std({0.2, 0.4, 0.6});
  CHECK(ms.mean == Catch::Approx(0.4));
  CHECK(ms.std == Catch::Approx(std::sqrt(0.08 / 3.0)));
  CHECK(shadowae::mean_std({0.5}).std == 0.0);
}

TEST_CASE("evaluate averages per-image scores and counts degenerate images") {
  const std::vector<Tensor<float>> preds{plane(2, 1, {0.1f, 0.9f}), plane(2, 1, {0.9f, 0.9f})};
  const std::vector<BinaryMask> truths{from_bits(2, 1, {1, 1}), BinaryMask(2, 1)};
  const auto r = shadowae::evaluate(preds, truths, 0.5);
  REQUIRE(r.per_image.size() == 2);
  CHECK(r.per_image[0].iou == Catch::Approx(0.5));
  CHECK(r.per_image[1].degenerate);
  CHECK(r.iou.mean == Catch::Approx(0.75));
  CHECK(r.degenerate_images == 1);
  CHECK_THROWS(shadowae::evaluate(preds, {truths[0]}, 0.5));
  CHECK_THROWS(shadowae::evaluate({}, {}, 0.5));
}

TEST_CASE("threshold selection picks the best grid point, ties to the smaller tau") {
  const std::vector<Tensor<float>> preds{plane(4, 1, {0.05f, 0.25f, 0.45f, 0.95f})};
  const std::vector<BinaryMask> truths{from_bits(4, 1, {1, 1, 0, 0})};
  const auto c = shadowae::select_threshold(preds, truths, shadowae::default_tau_grid());
  CHECK(c.tau == Catch::Approx(0.3));
  CHECK(c.mean_iou == 1.0);
  CHECK(c.curve.size() == 9);
  const auto one = shadowae::select_threshold(preds, truths, {0.5, 0.3});
  CHECK(one.tau == Catch::Approx(0.3));
}

TEST_CASE("threshold baseline marks dark fan pixels only") {
  const std::size_t w = 16, h = 16;
  const auto fan = shadowae::FanGeometry::for_image(w, h);
  Tensor<float> img(Shape{1, 1, h, w}, 0.1f);
  const auto m = shadowae::threshold_baseline(img, 0.5, fan);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c)
      CHECK(m(r, c) == fan.contains(static_cast<double>(r), static_cast<double>(c)));
  CHECK(shadowae::threshold_baseline(img, 0.0, fan).empty_region());
  CHECK_THROWS(shadowae::threshold_baseline(img, 1.0, fan));
}

TEST_CASE("cavity false positives count predicted cavity pixels outside the truth") {
  const auto pred = from_bits(4, 1, {1, 1, 1, 0});
  const auto truth = from_bits(4, 1, {1, 0, 0, 0});
  const auto cavity = from_bits(4, 1, {1, 1, 0, 1});
  CHECK(shadowae::cavity_false_positives(pred, truth, cavity) == 1);
}

TEST_CASE("report serialisation") {
  const std::vector<Tensor<float>> preds{plane(2, 1, {0.1f, 0.9f})};
  const std::vector<BinaryMask> truths{from_bits(2, 1, {1, 0})};
  auto r = shadowae::evaluate(preds, truths, 0.5);
  const auto j = shadowae::report_json(r);
  CHECK(j.at("iou").at("mean").get<double>() == 1.0);
  CHECK(j.at("threshold").get<double>() == 0.5);
  auto base = r;
  base.method = "threshold";
  const auto csv = shadowae::report_csv({r, base});
  CHECK(csv ==
        "method,threshold,iou_mean,iou_std,dice_mean,dice_std\n"
        "proposed,0.500,1.000000,0.000000,1.000000,0.000000\n"
        "threshold,0.500,1.000000,0.000000,1.000000,0.000000\n");
}

TEST_CASE("overlay colours") {
  const auto img = plane(5, 1, {0.5f, 0.5f, 0.5f, 0.5f, 0.5f});
  const auto pred = from_bits(5, 1, {1, 1, 0, 1, 0});
  const auto truth = from_bits(5, 1, {1, 0, 1, 0, 0});
  const auto cavity = from_bits(5, 1, {0, 0, 0, 1, 0});
  const auto o = shadowae::make_overlay(img, pred, &truth, &cavity);
  auto px = [&](std::size_t i) {
    return std::array<int, 3>{o.pixels[3 * i], o.pixels[3 * i + 1], o.pixels[3 * i + 2]};
  };
  CHECK(px(0)[0] == 255);
  CHECK(px(0)[1] == 255);
  CHECK(px(1)[0] == 255);
  CHECK(px(1)[1] < 255);
  CHECK(px(2)[1] == 255);
  CHECK(px(2)[0] < 255);
  CHECK(px(3) == std::array<int, 3>{255, 0, 255});
  CHECK(px(4)[0] == px(4)[1]);
  CHECK(px(4)[1] == px(4)[2]);
}
