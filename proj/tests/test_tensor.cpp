#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "shadowae/tensor.hpp"

using shadowae::Shape;
using shadowae::Tensor;

TEST_CASE("tensor shape and storage agree") {
  Tensor<float> t(Shape{2, 3, 4, 5}, 1.5f);
  CHECK(t.size() == 120);
  CHECK(t.rank() == 4);
  CHECK(t.dim(2) == 4);
  CHECK(t[119] == 1.5f);
  CHECK_THROWS_AS(Tensor<float>(Shape{2, 2}, std::vector<float>(3)), std::invalid_argument);
  CHECK(shadowae::shape_str(t.shape()) == "[2x3x4x5]");
}

TEST_CASE("4-d indexing is row-major NCHW") {
  Tensor<double> t(Shape{2, 3, 4, 5});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  CHECK(t.at(1, 2, 3, 4) == 119.0);
  CHECK(t.at(1, 0, 0, 0) == 60.0);
  CHECK(t.at(0, 1, 2, 3) == 20.0 + 10.0 + 3.0);
}

TEST_CASE("reshape keeps data and rejects count changes") {
  Tensor<float> t(Shape{2, 6}, std::vector<float>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  t.reshape(Shape{3, 4});
  CHECK(t.dim(0) == 3);
  CHECK(t[7] == 7.0f);
  CHECK_THROWS_AS(t.reshape(Shape{5}), std::invalid_argument);
}

TEST_CASE("gradient slot is optional and zeroable") {
  Tensor<float> t(Shape{4});
  CHECK_FALSE(t.has_grad());
  auto g = t.ensure_grad();
  CHECK(g.size() == 4);
  g[2] = 3.0f;
  t.zero_grad();
  CHECK(t.grad()[2] == 0.0f);
  t.clear_grad();
  CHECK_FALSE(t.has_grad());
}

TEST_CASE("finiteness check and casting") {
  Tensor<double> t(Shape{3}, std::vector<double>{0.25, -1.0, 3.0});
  CHECK(t.all_finite());
  const auto f = t.cast<float>();
  CHECK(f[0] == 0.25f);
  t[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(t.all_finite());
  t[1] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(t.all_finite());
  CHECK(Tensor<float>::scalar(2.0f).shape() == Shape{1});
}

TEST_CASE("shape mismatch reporting") {
  CHECK_NOTHROW(shadowae::require_same_shape(Shape{1, 2}, Shape{1, 2}, "x"));
  CHECK_THROWS_AS(shadowae::require_same_shape(Shape{1, 2}, Shape{2, 1}, "x"), std::invalid_argument);
}
