#include <doctest.h>

#include <cmath>
#include <random>
#include <thread>

#include "support/gradcheck.hpp"
#include "wavedef/ops.hpp"
#include "wavedef/tensor.hpp"

using namespace wavedef;
using wavedef::testing::check_gradients;
using wavedef::testing::FdOptions;
using wavedef::testing::weighted_sum;

TEST_CASE("elementwise add and mul basics") {
  Tensor a = Tensor::from_data({2}, {1, 2});
  Tensor b = Tensor::from_data({2}, {3, 4});
  Tensor c = a + b;
  CHECK(c.at({0}) == 4);
  CHECK(c.at({1}) == 6);

  std::mt19937_64 rng(1);
  Tensor x = Tensor::randn({3, 4}, rng);
  Tensor ones = Tensor::ones_like(x);
  CHECK(max_abs_diff(mul(x, ones), x) == 0.0);
}

TEST_CASE("division by zero propagates infinities") {
  Tensor a = Tensor::from_data({2}, {1.0, -1.0});
  Tensor b = Tensor::from_data({2}, {0.0, 0.0});
  Tensor c = a / b;
  CHECK(std::isinf(c.at({0})));
  CHECK(c.at({0}) > 0);
  CHECK(c.at({1}) < 0);
}

TEST_CASE("broadcast shapes follow trailing-dimension rules") {
  CHECK(broadcast_shape({2, 3}, {3}) == Shape{2, 3});
  CHECK(broadcast_shape({4, 1, 5}, {2, 5}) == Shape{4, 2, 5});
  CHECK(broadcast_shape({}, {3, 2}) == Shape{3, 2});
  CHECK_THROWS_AS(broadcast_shape({2, 3}, {2, 4}), ShapeError);
  CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({4})), ShapeError);
}

TEST_CASE("product-rule gradient matches finite differences") {
  Tensor a = Tensor::from_data({1}, {2.0}, true);
  Tensor b = Tensor::from_data({1}, {5.0}, true);
  {
    Tape tape;
    Tensor loss = sum(a * b);
    tape.backward(loss);
  }
  CHECK(a.grad()[0] == doctest::Approx(5.0));
  CHECK(b.grad()[0] == doctest::Approx(2.0));

  a.zero_grad();
  b.zero_grad();
  const double err = check_gradients([&] { return sum(a * b); }, {a, b},
                                     FdOptions{1e-6, 1e-4, 1e-3});
  CHECK(err < 1e-4);
}

TEST_CASE("elementwise gradients with broadcasting") {
  std::mt19937_64 rng(7);
  Tensor a = Tensor::randn({2, 3, 4}, rng, 1.0, true);
  Tensor b = Tensor::randn({3, 1}, rng, 1.0, true);
  Tensor w = Tensor::randn({2, 3, 4}, rng);
  for (auto op : {0, 1, 2}) {
    const double err = check_gradients(
        [&] {
          Tensor out = (op == 0) ? a + b : (op == 1) ? a * b : a - b;
          return weighted_sum(out, w);
        },
        {a, b});
    CHECK(err < 1e-4);
  }
  // keep divisors away from zero
  Tensor d = Tensor::from_data({3, 1}, {1.5, -2.0, 0.8}, true);
  const double err = check_gradients([&] { return weighted_sum(a / d, w); }, {a, d});
  CHECK(err < 1e-4);
}

TEST_CASE("matmul identity and hand arithmetic") {
  Tensor id = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor m = Tensor::from_data({2, 2}, {3, -1, 2, 7});
  CHECK(max_abs_diff(matmul(id, m), m) == 0.0);

  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_data({2, 1}, {5, 6});
  Tensor c = matmul(a, b);
  CHECK(c.at({0, 0}) == 17);
  CHECK(c.at({1, 0}) == 39);

  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
}

TEST_CASE("matmul gradient vs finite differences") {
  std::mt19937_64 rng(11);
  Tensor a = Tensor::randn({3, 4}, rng, 1.0, true);
  Tensor b = Tensor::randn({4, 2}, rng, 1.0, true);
  Tensor w = Tensor::randn({3, 2}, rng);
  const double err =
      check_gradients([&] { return weighted_sum(matmul(a, b), w); }, {a, b});
  CHECK(err < 1e-6);
}

TEST_CASE("batched matmul with shared right operand") {
  std::mt19937_64 rng(13);
  Tensor a = Tensor::randn({2, 3, 4, 5}, rng, 1.0, true);
  Tensor b = Tensor::randn({5, 2}, rng, 1.0, true);
  Tensor w = Tensor::randn({2, 3, 4, 2}, rng);
  const double err =
      check_gradients([&] { return weighted_sum(matmul(a, b), w); }, {a, b});
  CHECK(err < 1e-4);

  Tensor b4 = Tensor::randn({2, 3, 5, 2}, rng, 1.0, true);
  const double err2 =
      check_gradients([&] { return weighted_sum(matmul(a, b4), w); }, {a, b4});
  CHECK(err2 < 1e-4);
}

TEST_CASE("backward fills gradients and consumes the tape") {
  Tensor x = Tensor::from_data({3}, {1, 2, 3}, true);
  Tape tape;
  Tensor loss = sum(x);
  tape.backward(loss);
  CHECK(x.grad() == std::vector<double>{1, 1, 1});
  CHECK(tape.consumed());
  CHECK_THROWS_AS(tape.backward(loss), ValueError);
}

TEST_CASE("quadratic gradient") {
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  Tape tape;
  tape.backward(sum(x * x));
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("backward requires a scalar connected loss") {
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  {
    Tape tape;
    Tensor y = x * x;
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
  }
  {
    Tape tape;
    Tensor z = Tensor::from_data({}, {4.0});  // no gradient tracking
    CHECK_THROWS_AS(tape.backward(z), ValueError);
  }
}

TEST_CASE("gradient accumulation across two consumers") {
  Tensor x = Tensor::from_data({2}, {0.5, -1.25}, true);

  {
    Tape tape;
    Tensor y1 = x * 3.0;
    Tensor y2 = x * x;
    tape.backward(sum(y1) + sum(y2));
  }
  std::vector<double> both = x.grad();

  x.zero_grad();
  {
    Tape tape;
    tape.backward(sum(x * 3.0));
  }
  std::vector<double> first = x.grad();
  x.zero_grad();
  {
    Tape tape;
    tape.backward(sum(x * x));
  }
  std::vector<double> second = x.grad();

  for (int i = 0; i < 2; ++i) {
    CHECK(both[i] == doctest::Approx(first[i] + second[i]).epsilon(1e-12));
  }
}

TEST_CASE("ops outside a tape do not track gradients") {
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  Tensor y = x * x;  // no tape active
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("reshape round-trip is the identity on data") {
  std::mt19937_64 rng(5);
  Tensor x = Tensor::randn({3, 4, 5}, rng);
  Tensor y = reshape(reshape(x, {5, 12}), {3, 4, 5});
  CHECK(max_abs_diff(x, y) == 0.0);
  CHECK_THROWS_AS(reshape(x, {7, 7}), ShapeError);
}

TEST_CASE("permute and transpose") {
  Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor t = transpose(x, 0, 1);
  CHECK(t.shape() == Shape{3, 2});
  CHECK(t.at({0, 1}) == 4);
  CHECK(t.at({2, 0}) == 3);

  std::mt19937_64 rng(3);
  Tensor a = Tensor::randn({2, 3, 4}, rng, 1.0, true);
  Tensor w = Tensor::randn({4, 2, 3}, rng);
  const double err =
      check_gradients([&] { return weighted_sum(permute(a, {2, 0, 1}), w); }, {a});
  CHECK(err < 1e-6);
}

TEST_CASE("concat and slice round-trip with gradients") {
  std::mt19937_64 rng(9);
  Tensor a = Tensor::randn({2, 3, 2, 2}, rng, 1.0, true);
  Tensor b = Tensor::randn({2, 2, 2, 2}, rng, 1.0, true);
  Tensor cat = concat({a, b}, 1);
  CHECK(cat.shape() == Shape{2, 5, 2, 2});
  CHECK(max_abs_diff(slice(cat, 1, 0, 3), a) == 0.0);
  CHECK(max_abs_diff(slice(cat, 1, 3, 2), b) == 0.0);
  CHECK_THROWS_AS(slice(cat, 1, 4, 3), GeometryError);

  Tensor w = Tensor::randn({2, 5, 2, 2}, rng);
  const double err =
      check_gradients([&] { return weighted_sum(concat({a, b}, 1), w); }, {a, b});
  CHECK(err < 1e-4);
}

TEST_CASE("clamp value contract and masked gradient") {
  Tensor x = Tensor::from_data({3}, {-1.0, 0.5, 2.0});
  Tensor y = clamp(x, 0.0, 1.0);
  CHECK(y.at({0}) == 0.0);
  CHECK(y.at({1}) == 0.5);
  CHECK(y.at({2}) == 1.0);

  Tensor xr = Tensor::from_data({3}, {-1.0, 0.5, 2.0}, true);
  Tape tape;
  tape.backward(sum(clamp(xr, 0.0, 1.0)));
  CHECK(xr.grad() == std::vector<double>{0.0, 1.0, 0.0});
}

TEST_CASE("upsample2x nearest replicates pixels") {
  Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor y = upsample2x(x, UpsampleMode::Nearest);
  CHECK(y.shape() == Shape{1, 1, 4, 4});
  CHECK(y.at({0, 0, 0, 0}) == 1);
  CHECK(y.at({0, 0, 0, 1}) == 1);
  CHECK(y.at({0, 0, 1, 1}) == 1);
  CHECK(y.at({0, 0, 3, 3}) == 4);
  CHECK(y.at({0, 0, 2, 1}) == 3);
}

TEST_CASE("avgpool2x inverts nearest upsampling") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 8; ++trial) {
    Tensor x = Tensor::randn({1, 2, 4, 4}, rng);
    Tensor y = avgpool2x(upsample2x(x, UpsampleMode::Nearest));
    CHECK(max_abs_diff(x, y) < 1e-15);
  }
}

TEST_CASE("upsample and pooling gradients") {
  std::mt19937_64 rng(23);
  Tensor x = Tensor::randn({1, 2, 3, 3}, rng, 1.0, true);
  Tensor w = Tensor::randn({1, 2, 6, 6}, rng);
  for (auto mode : {UpsampleMode::Nearest, UpsampleMode::Bilinear}) {
    const double err =
        check_gradients([&] { return weighted_sum(upsample2x(x, mode), w); }, {x});
    CHECK(err < 1e-6);
  }
  Tensor x2 = Tensor::randn({1, 2, 4, 4}, rng, 1.0, true);
  Tensor w2 = Tensor::randn({1, 2, 2, 2}, rng);
  CHECK(check_gradients([&] { return weighted_sum(avgpool2x(x2), w2); }, {x2}) < 1e-6);
}

TEST_CASE("pad2d zero and reflect") {
  Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor z = pad2d(x, 1, 1, 1, 1, PadMode::Zero);
  CHECK(z.shape() == Shape{1, 1, 4, 4});
  CHECK(z.at({0, 0, 0, 0}) == 0);
  CHECK(z.at({0, 0, 1, 1}) == 1);

  Tensor r = pad2d(x, 0, 1, 0, 1, PadMode::Reflect);
  CHECK(r.at({0, 0, 2, 0}) == 1);  // row reflected
  CHECK(r.at({0, 0, 0, 2}) == 1);  // column reflected
  CHECK(r.at({0, 0, 2, 2}) == 1);

  std::mt19937_64 rng(31);
  Tensor xr = Tensor::randn({1, 2, 3, 4}, rng, 1.0, true);
  Tensor w = Tensor::randn({1, 2, 5, 6}, rng);
  for (auto mode : {PadMode::Zero, PadMode::Reflect}) {
    const double err = check_gradients(
        [&] { return weighted_sum(pad2d(xr, 1, 1, 1, 1, mode), w); }, {xr});
    CHECK(err < 1e-6);
  }
}

TEST_CASE("softmax symmetry, normalization and gradient") {
  Tensor x = Tensor::from_data({3}, {0, 0, 0});
  Tensor y = softmax(x, 0);
  for (int i = 0; i < 3; ++i) CHECK(y.at({i}) == doctest::Approx(1.0 / 3).epsilon(1e-15));

  std::mt19937_64 rng(41);
  Tensor z = Tensor::randn({4, 6}, rng, 3.0);
  Tensor s = softmax(z, 1);
  for (int i = 0; i < 4; ++i) {
    double total = 0;
    for (int j = 0; j < 6; ++j) {
      CHECK(s.at({i, j}) >= 0.0);
      total += s.at({i, j});
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }

  Tensor zr = Tensor::randn({2, 5}, rng, 1.0, true);
  Tensor w = Tensor::randn({2, 5}, rng);
  CHECK(check_gradients([&] { return weighted_sum(softmax(zr, 1), w); }, {zr}) < 1e-4);
}

TEST_CASE("gelu odd point and gradient") {
  Tensor zero = Tensor::from_data({1}, {0.0});
  CHECK(gelu(zero).at({0}) == 0.0);

  // exact Gaussian-CDF form: gelu(1) = 0.5 * (1 + erf(1/sqrt(2)))
  Tensor one = Tensor::from_data({1}, {1.0});
  CHECK(gelu(one).at({0}) ==
        doctest::Approx(0.5 * (1.0 + std::erf(1.0 / std::sqrt(2.0)))).epsilon(1e-15));

  std::mt19937_64 rng(43);
  Tensor x = Tensor::randn({3, 4}, rng, 1.0, true);
  Tensor w = Tensor::randn({3, 4}, rng);
  CHECK(check_gradients([&] { return weighted_sum(gelu(x), w); }, {x}) < 1e-4);
}

TEST_CASE("layer_norm normalizes and matches finite differences") {
  std::mt19937_64 rng(47);
  Tensor x = Tensor::randn({2, 8}, rng, 2.0, true);
  Tensor gamma = Tensor::full({8}, 1.0, true);
  Tensor beta = Tensor::zeros({8}, true);

  Tensor y = layer_norm(x, 1, gamma, beta, 1e-6);
  for (int i = 0; i < 2; ++i) {
    double mean = 0, var = 0;
    for (int j = 0; j < 8; ++j) mean += y.at({i, j});
    mean /= 8;
    for (int j = 0; j < 8; ++j) var += (y.at({i, j}) - mean) * (y.at({i, j}) - mean);
    var /= 8;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }

  Tensor w = Tensor::randn({2, 8}, rng);
  const double err = check_gradients(
      [&] { return weighted_sum(layer_norm(x, 1, gamma, beta, 1e-6), w); },
      {x, gamma, beta});
  CHECK(err < 1e-5);
}

TEST_CASE("reductions and their gradients") {
  std::mt19937_64 rng(53);
  Tensor x = Tensor::randn({3, 4, 2}, rng, 1.0, true);
  Tensor w1 = Tensor::randn({3, 1, 2}, rng);
  CHECK(check_gradients([&] { return weighted_sum(reduce_sum(x, 1, true), w1); }, {x}) <
        1e-6);
  Tensor w2 = Tensor::randn({3, 2}, rng);
  CHECK(check_gradients([&] { return weighted_sum(reduce_mean(x, 1, false), w2); }, {x}) <
        1e-6);
  CHECK(mean(x).item() == doctest::Approx(sum(x).item() / 24.0));
}

TEST_CASE("deterministic forward: identical inputs give identical bytes") {
  std::mt19937_64 rng(59);
  Tensor x = Tensor::randn({2, 3, 4, 4}, rng);
  Tensor a = softmax(gelu(x * 1.7), 1);
  Tensor b = softmax(gelu(x * 1.7), 1);
  CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("independent tapes on independent threads") {
  auto worker = [](double& out) {
    Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
    Tape tape;
    tape.backward(sum(x * x));
    out = x.grad()[0];
  };
  double r1 = 0, r2 = 0;
  std::thread t1(worker, std::ref(r1));
  std::thread t2(worker, std::ref(r2));
  t1.join();
  t2.join();
  CHECK(r1 == 2.0);
  CHECK(r2 == 2.0);
}
