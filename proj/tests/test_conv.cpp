#include <doctest.h>

#include <random>

#include "support/gradcheck.hpp"
#include "wavedef/ops.hpp"

using namespace wavedef;
using wavedef::testing::check_gradients;
using wavedef::testing::weighted_sum;

TEST_CASE("1x1 conv with permutation weights rearranges channels") {
  std::mt19937_64 rng(1);
  Tensor x = Tensor::randn({1, 3, 4, 4}, rng);
  // identity permutation: out channel i reads input channel i
  std::vector<double> wdata(9, 0.0);
  wdata[0 * 3 + 0] = 1.0;
  wdata[1 * 3 + 1] = 1.0;
  wdata[2 * 3 + 2] = 1.0;
  Tensor w = Tensor::from_data({3, 3, 1, 1}, wdata);
  Tensor y = conv2d(x, w, Tensor(), 1, 0, 1);
  CHECK(max_abs_diff(x, y) == 0.0);

  // swap channels 0 and 1
  std::fill(wdata.begin(), wdata.end(), 0.0);
  wdata[0 * 3 + 1] = 1.0;
  wdata[1 * 3 + 0] = 1.0;
  wdata[2 * 3 + 2] = 1.0;
  Tensor wswap = Tensor::from_data({3, 3, 1, 1}, wdata);
  Tensor ys = conv2d(x, wswap, Tensor(), 1, 0, 1);
  CHECK(max_abs_diff(slice(ys, 1, 0, 1), slice(x, 1, 1, 1)) == 0.0);
  CHECK(max_abs_diff(slice(ys, 1, 1, 1), slice(x, 1, 0, 1)) == 0.0);
}

TEST_CASE("3x3 depthwise all-ones kernel on a constant image") {
  const double c = 0.7;
  Tensor x = Tensor::full({1, 2, 5, 5}, c);
  Tensor w = Tensor::full({2, 1, 3, 3}, 1.0);
  Tensor y = conv2d(x, w, Tensor(), 1, 1, 2);
  CHECK(y.shape() == Shape{1, 2, 5, 5});
  // interior pixels see all nine taps
  for (int ch = 0; ch < 2; ++ch) {
    for (int i = 1; i < 4; ++i) {
      for (int j = 1; j < 4; ++j) {
        CHECK(y.at({0, ch, i, j}) == doctest::Approx(9 * c).epsilon(1e-15));
      }
    }
  }
  // corners see four taps
  CHECK(y.at({0, 0, 0, 0}) == doctest::Approx(4 * c).epsilon(1e-15));
}

TEST_CASE("conv geometry validation") {
  Tensor x6 = Tensor::zeros({1, 2, 6, 6});
  Tensor w = Tensor::zeros({4, 2, 3, 3});
  // (6 + 0 - 3) % 2 != 0: output extent would be fractional
  CHECK_THROWS_AS(conv2d(x6, w, Tensor(), 2, 0, 1), GeometryError);
  Tensor x5 = Tensor::zeros({1, 2, 5, 5});
  Tensor wbig = Tensor::zeros({4, 2, 7, 7});
  CHECK_THROWS_AS(conv2d(x5, wbig, Tensor(), 1, 0, 1), GeometryError);
  Tensor wg = Tensor::zeros({4, 1, 3, 3});
  CHECK_THROWS_AS(conv2d(x5, wg, Tensor(), 1, 1, 3), ShapeError);  // 2 % 3 != 0
  CHECK_THROWS_AS(conv2d(x5, w, Tensor(), 1, 1, 2), ShapeError);   // weight cin mismatch
}

TEST_CASE("depthwise conv gradient vs finite differences") {
  std::mt19937_64 rng(5);
  Tensor x = Tensor::randn({1, 2, 5, 5}, rng, 1.0, true);
  Tensor w = Tensor::randn({2, 1, 3, 3}, rng, 0.5, true);
  Tensor b = Tensor::randn({2}, rng, 0.1, true);
  Tensor wt = Tensor::randn({1, 2, 5, 5}, rng);
  const double err = check_gradients(
      [&] { return weighted_sum(conv2d(x, w, b, 1, 1, 2), wt); }, {x, w, b});
  CHECK(err < 1e-5);
}

TEST_CASE("dense conv gradient vs finite differences") {
  std::mt19937_64 rng(7);
  Tensor x = Tensor::randn({2, 3, 6, 6}, rng, 1.0, true);
  Tensor w = Tensor::randn({4, 3, 3, 3}, rng, 0.3, true);
  Tensor b = Tensor::randn({4}, rng, 0.1, true);
  Tensor wt = Tensor::randn({2, 4, 6, 6}, rng);
  const double err = check_gradients(
      [&] { return weighted_sum(conv2d(x, w, b, 1, 1, 1), wt); }, {x, w, b});
  CHECK(err < 1e-5);
}

TEST_CASE("strided conv gradient vs finite differences") {
  std::mt19937_64 rng(9);
  Tensor x = Tensor::randn({1, 2, 7, 7}, rng, 1.0, true);
  Tensor w = Tensor::randn({3, 2, 3, 3}, rng, 0.3, true);
  Tensor b = Tensor::randn({3}, rng, 0.1, true);
  Tensor wt = Tensor::randn({1, 3, 4, 4}, rng);
  const double err = check_gradients(
      [&] { return weighted_sum(conv2d(x, w, b, 2, 1, 1), wt); }, {x, w, b});
  CHECK(err < 1e-5);
}

TEST_CASE("grouped conv gradient vs finite differences") {
  std::mt19937_64 rng(11);
  Tensor x = Tensor::randn({1, 4, 5, 5}, rng, 1.0, true);
  Tensor w = Tensor::randn({6, 2, 3, 3}, rng, 0.3, true);
  Tensor wt = Tensor::randn({1, 6, 5, 5}, rng);
  const double err = check_gradients(
      [&] { return weighted_sum(conv2d(x, w, Tensor(), 1, 1, 2), wt); }, {x, w});
  CHECK(err < 1e-5);
}

TEST_CASE("pointwise conv gradient vs finite differences") {
  std::mt19937_64 rng(13);
  Tensor x = Tensor::randn({2, 3, 4, 4}, rng, 1.0, true);
  Tensor w = Tensor::randn({5, 3, 1, 1}, rng, 0.4, true);
  Tensor b = Tensor::randn({5}, rng, 0.1, true);
  Tensor wt = Tensor::randn({2, 5, 4, 4}, rng);
  const double err = check_gradients(
      [&] { return weighted_sum(conv2d(x, w, b, 1, 0, 1), wt); }, {x, w, b});
  CHECK(err < 1e-5);
}

TEST_CASE("pick2x2 and interleave2x2 are inverse") {
  std::mt19937_64 rng(15);
  Tensor x = Tensor::randn({1, 2, 4, 6}, rng);
  Tensor a = pick2x2(x, 0, 0);
  Tensor b = pick2x2(x, 0, 1);
  Tensor c = pick2x2(x, 1, 0);
  Tensor d = pick2x2(x, 1, 1);
  CHECK(max_abs_diff(interleave2x2(a, b, c, d), x) == 0.0);
  CHECK_THROWS_AS(pick2x2(Tensor::zeros({1, 1, 3, 4}), 0, 0), GeometryError);
}
