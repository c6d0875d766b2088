#include <doctest.h>

#include <cmath>
#include <random>

#include "support/gradcheck.hpp"
#include "wavedef/losses.hpp"
#include "wavedef/ops.hpp"
#include "wavedef/optim.hpp"

using namespace wavedef;
using wavedef::testing::check_gradients;
using wavedef::testing::FdOptions;

TEST_CASE("charbonnier at zero difference equals eps") {
  Tensor x = Tensor::from_data({4}, {0.1, 0.2, 0.3, 0.4});
  const double eps = 1e-3;
  CHECK(charbonnier_loss(x, x, eps).item() == eps);
}

TEST_CASE("charbonnier approaches the L1 mean from above") {
  Tensor x = Tensor::from_data({2}, {3.0, 0.0});
  Tensor y = Tensor::from_data({2}, {0.0, 4.0});
  const double loss = charbonnier_loss(x, y, 1e-3).item();
  CHECK(loss > 3.5);
  CHECK(loss < 3.5 + 1e-3);
}

TEST_CASE("charbonnier rejects shape mismatch and bad eps") {
  CHECK_THROWS_AS(charbonnier_loss(Tensor::zeros({2}), Tensor::zeros({3}), 1e-3),
                  ShapeError);
  CHECK_THROWS_AS(charbonnier_loss(Tensor::zeros({2}), Tensor::zeros({2}), 0.0),
                  ValueError);
}

TEST_CASE("charbonnier gradient matches finite differences tightly") {
  std::mt19937_64 rng(1);
  // keep differences away from zero so the loss is locally smooth at machine
  // precision
  Tensor x = Tensor::uniform({3, 3}, 0.5, 1.5, rng, true);
  Tensor y = Tensor::uniform({3, 3}, -1.5, -0.5, rng, true);
  const double err = check_gradients([&] { return charbonnier_loss(x, y, 1e-3); }, {x, y},
                                     FdOptions{1e-5, 1e-8, 1e-2});
  CHECK(err < 1e-8);
}

TEST_CASE("cross entropy of uniform logits is ln(10)") {
  Tensor logits = Tensor::zeros({2, 10});
  const double loss = cross_entropy_loss(logits, {3, 7}).item();
  CHECK(loss == doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("confident correct logits drive the loss to zero") {
  std::vector<double> data(10, -50.0);
  data[4] = 50.0;
  Tensor logits = Tensor::from_data({1, 10}, data);
  CHECK(cross_entropy_loss(logits, {4}).item() < 1e-12);
}

TEST_CASE("cross entropy rejects invalid labels") {
  Tensor logits = Tensor::zeros({1, 10});
  CHECK_THROWS_AS(cross_entropy_loss(logits, {10}), ValueError);
  CHECK_THROWS_AS(cross_entropy_loss(logits, {-1}), ValueError);
}

TEST_CASE("cross entropy gradient vs finite differences") {
  std::mt19937_64 rng(2);
  Tensor logits = Tensor::randn({4, 10}, rng, 2.0, true);
  const double err = check_gradients(
      [&] { return cross_entropy_loss(logits, {0, 3, 9, 5}); }, {logits},
      FdOptions{1e-6, 1e-6, 1e-4});
  CHECK(err < 1e-6);
}

TEST_CASE("adam first step follows the sign for large gradients") {
  Tensor w = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
  w.impl()->grad = {0.4, -0.7, 1.2};  // |g| >> adam eps
  Adam opt({w});
  opt.step(0.01);
  CHECK(w.data()[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(w.data()[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
  CHECK(w.data()[2] == doctest::Approx(0.5 - 0.01).epsilon(1e-6));
}

TEST_CASE("zero gradient from a fresh state leaves parameters unchanged") {
  Tensor w = Tensor::from_data({2}, {1.5, -0.5}, true);
  Adam opt({w});
  opt.step(0.1);  // no grad populated: treated as zero
  CHECK(w.data()[0] == 1.5);
  CHECK(w.data()[1] == -0.5);
}

TEST_CASE("adam converges on a quadratic") {
  std::mt19937_64 rng(3);
  Tensor w = Tensor::randn({8}, rng, 2.0, true);
  const std::vector<double> target = {1.0, -1.0, 0.5, 2.0, -2.0, 0.0, 3.0, -0.25};
  Adam opt({w});
  for (int step = 0; step < 200; ++step) {
    Tensor t = Tensor::from_data({8}, target);
    Tape tape;
    Tensor diff = w - t;
    tape.backward(sum(diff * diff));
    opt.step(cosine_lr(0.3, 1e-4, step, 200));
    opt.zero_grad();
  }
  for (int i = 0; i < 8; ++i) {
    CHECK(std::abs(w.data()[i] - target[static_cast<std::size_t>(i)]) < 1e-3);
  }
}

TEST_CASE("cosine schedule hits both boundary values exactly") {
  CHECK(cosine_lr(0.004, 0.0005, 0, 10) == 0.004);
  CHECK(cosine_lr(0.004, 0.0005, 9, 10) == 0.0005);
  CHECK(cosine_lr(0.004, 0.0005, 0, 1) == 0.004);
  // monotone decay in between
  double prev = cosine_lr(0.004, 0.0005, 0, 10);
  for (int e = 1; e < 10; ++e) {
    const double lr = cosine_lr(0.004, 0.0005, e, 10);
    CHECK(lr < prev);
    prev = lr;
  }
}
