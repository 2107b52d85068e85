#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "shadowae/losses.hpp"

using shadowae::Graph;
using shadowae::LossWeights;
using shadowae::Shape;
using shadowae::Tensor;

namespace {

Tensor<float> uniform(std::mt19937_64& gen, Shape s, float lo, float hi) {
  return oracle::random_tensor_f(gen, std::move(s), lo, hi);
}

shadowae::ShadowMask random_mask(std::mt19937_64& gen, std::size_t w, std::size_t h) {
  shadowae::ShadowMask m(w, h);
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  for (auto& v : m.values) v = d(gen) < 0.4f ? d(gen) * 0.99f : 1.0f;
  return m;
}

}  // namespace

TEST_CASE("l_ae of an image with itself is zero") {
  std::mt19937_64 gen(1);
  const auto x = uniform(gen, Shape{1, 1, 9, 7}, 0.0f, 1.0f);
  CHECK(shadowae::loss_ae(x, x) == 0.0);
}

TEST_CASE("l_ae matches a hand-computed mean") {
  const Tensor<float> a(Shape{1, 1, 1, 4}, {0.0f, 0.5f, 1.0f, 0.25f});
  const Tensor<float> b(Shape{1, 1, 1, 4}, {1.0f, 0.5f, 0.0f, 0.75f});
  CHECK(shadowae::loss_ae(a, b) == Catch::Approx((1.0 + 0.0 + 1.0 + 0.25) / 4.0));
}

TEST_CASE("l_s vanishes for an all-ones shadow mask") {
  std::mt19937_64 gen(2);
  const shadowae::ShadowMask ones(8, 6);
  for (int i = 0; i < 10; ++i) CHECK(shadowae::loss_shadow(ones, uniform(gen, Shape{1, 1, 6, 8}, 0.0f, 1.0f)) == 0.0);
}

TEST_CASE("l_s ignores predictions outside the masked region") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto mask = random_mask(gen, 10, 10);
    auto pred = uniform(gen, Shape{1, 1, 10, 10}, 0.0f, 1.0f);
    const double before = shadowae::loss_shadow(mask, pred);
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (mask.values[i] == 1.0f) pred[i] = std::uniform_real_distribution<float>(0.0f, 1.0f)(gen);
    CHECK(shadowae::loss_shadow(mask, pred) == before);
  }
}

TEST_CASE("l_s normalises by the full pixel count") {
  shadowae::ShadowMask m(2, 2);
  m.values = {0.2f, 1.0f, 1.0f, 1.0f};
  const Tensor<float> pred(Shape{1, 1, 2, 2}, {0.6f, 0.0f, 0.0f, 0.0f});
  CHECK(shadowae::loss_shadow(m, pred) == Catch::Approx(0.16 / 4.0).epsilon(1e-6));
}

TEST_CASE("l_sreg is zero at one and the mean distance otherwise") {
  CHECK(shadowae::loss_sreg(Tensor<float>(Shape{1, 1, 5, 5}, 1.0f)) == 0.0);
  const Tensor<float> s(Shape{1, 1, 1, 4}, {1.0f, 0.5f, 0.0f, 0.75f});
  CHECK(shadowae::loss_sreg(s) == Catch::Approx((0.0 + 0.5 + 1.0 + 0.25) / 4.0));
}

TEST_CASE("l_c is identically zero for the uniform prior") {
  std::mt19937_64 gen(4);
  for (int i = 0; i < 20; ++i) {
    const auto c = uniform(gen, Shape{1, 1, 6, 6}, 0.0f, 1.0f);
    CHECK(shadowae::loss_content(c, 1.0, 1.0) == 0.0);
  }
}

TEST_CASE("l_c agrees with a log-gamma beta density") {
  const double a = 2.0, b = 3.0;
  const Tensor<float> c(Shape{1, 1, 1, 3}, {0.2f, 0.5f, 0.9f});
  const double lnb = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  double want = 0.0;
  for (float v : c.storage()) {
    const double x = v;
    want -= (a - 1) * std::log(x) + (b - 1) * std::log(1 - x) - lnb;
  }
  CHECK(shadowae::loss_content(c, a, b) == Catch::Approx(want).epsilon(1e-6));
  CHECK(shadowae::log_beta_function(2.0, 2.0) == Catch::Approx(std::log(1.0 / 6.0)));
}

TEST_CASE("l_c stays finite at the interval ends") {
  const Tensor<float> c(Shape{1, 1, 1, 2}, {0.0f, 1.0f});
  CHECK(std::isfinite(shadowae::loss_content(c, 2.0, 2.0)));
}

TEST_CASE("total is the weighted sum of its parts") {
  SECTION("worked arithmetic") {
    LossWeights w;
    w.lambda_ae = 1.0;
    w.lambda_s = 10.0;
    w.lambda_sreg = 0.1;
    w.lambda_c = 0.001;
    shadowae::LossBreakdown p;
    p.l_ae = 0.2;
    p.l_s = 0.05;
    p.l_sreg = 0.3;
    p.l_c = -40.0;
    CHECK(shadowae::combine(p, w).total == Catch::Approx(0.69).epsilon(1e-12));
  }
  SECTION("recorded graph, random weights and inputs") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> lam(0.0, 5.0);
    for (int trial = 0; trial < 30; ++trial) {
      LossWeights w;
      w.lambda_ae = lam(gen);
      w.lambda_s = lam(gen);
      w.lambda_sreg = lam(gen);
      w.lambda_c = lam(gen) * 1e-3;
      Graph<float> g;
      const Shape sh{2, 1, 8, 8};
      const auto x = g.input(uniform(gen, sh, 0.0f, 1.0f));
      Tensor<float> xs(sh);
      for (auto& v : xs.storage()) v = std::uniform_real_distribution<float>(0.0f, 1.0f)(gen) < 0.3f ? 0.4f : 1.0f;
      const auto s = g.input(uniform(gen, sh, 0.01f, 0.99f));
      const auto c = g.input(uniform(gen, sh, 0.01f, 0.99f));
      const auto r = g.input(uniform(gen, sh, 0.0f, 1.0f));
      const auto lv = shadowae::loss_total(g, x, g.input(xs), s, c, r, w);
      const auto b = shadowae::breakdown(g, lv, w);
      const double want = w.lambda_ae * b.l_ae + w.lambda_s * b.l_s + w.lambda_sreg * b.l_sreg + w.lambda_c * b.l_c;
      const double got = g.value(lv.total)[0];
      CHECK(std::abs(got - want) <= 1e-6 * std::max(1.0, std::abs(want)));
    }
  }
  SECTION("all weights zero") {
    LossWeights w;
    w.lambda_ae = w.lambda_s = w.lambda_sreg = w.lambda_c = 0.0;
    shadowae::LossBreakdown p{0.3, 0.2, 0.1, -5.0, 0.0};
    CHECK(shadowae::combine(p, w).total == 0.0);
  }
}

TEST_CASE("batch losses average per-image losses") {
  std::mt19937_64 gen(6);
  const auto a = uniform(gen, Shape{2, 1, 4, 4}, 0.0f, 1.0f);
  const auto b = uniform(gen, Shape{2, 1, 4, 4}, 0.0f, 1.0f);
  Graph<float> g;
  const double batch = g.value(shadowae::loss_content(g, g.input(a), 2.0, 2.0, 1e-6))[0];
  double per = 0.0;
  for (std::size_t n = 0; n < 2; ++n) {
    Tensor<float> one(Shape{1, 1, 4, 4});
    for (std::size_t i = 0; i < 16; ++i) one[i] = a[n * 16 + i];
    per += shadowae::loss_content(one, 2.0, 2.0) / 2.0;
  }
  CHECK(batch == Catch::Approx(per).epsilon(1e-5));
  Graph<float> g2;
  const double ae = g2.value(shadowae::loss_ae(g2, g2.input(a), g2.input(b)))[0];
  double want = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) want += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
  CHECK(ae == Catch::Approx(want / 32.0).epsilon(1e-5));
}

TEST_CASE("loss weights validate and round-trip through json") {
  LossWeights w;
  w.lambda_s = 3.5;
  const nlohmann::json j = w;
  CHECK(j.get<LossWeights>().lambda_s == 3.5);
  w.lambda_sreg = -1.0;
  CHECK_THROWS(w.validate());
  LossWeights bad;
  bad.eps = 0.7;
  CHECK_THROWS(bad.validate());
}
