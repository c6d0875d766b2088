#include <doctest.h>

#include <cmath>
#include <random>

#include "support/gradcheck.hpp"
#include "wavedef/ops.hpp"
#include "wavedef/wavelet.hpp"

using namespace wavedef;
using wavedef::testing::check_gradients;
using wavedef::testing::weighted_sum;

namespace {

double energy(const Tensor& t) {
  double acc = 0;
  for (int64_t i = 0; i < t.size(); ++i) acc += t.data()[i] * t.data()[i];
  return acc;
}

}  // namespace

TEST_CASE("constant image kills all detail subbands") {
  const double v = 0.37;
  Tensor x = Tensor::full({1, 1, 2, 2}, v);
  WaveletPyramid p = dwt2(x);
  CHECK(p.ll.at({0, 0, 0, 0}) == doctest::Approx(2 * v).epsilon(1e-15));
  CHECK(p.lh.at({0, 0, 0, 0}) == 0.0);
  CHECK(p.hl.at({0, 0, 0, 0}) == 0.0);
  CHECK(p.hh.at({0, 0, 0, 0}) == 0.0);
}

TEST_CASE("single block analysis by hand") {
  Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
  WaveletPyramid p = dwt2(x);
  CHECK(p.ll.at({0, 0, 0, 0}) == doctest::Approx(5.0));
  CHECK(p.lh.at({0, 0, 0, 0}) == doctest::Approx(-1.0));
  CHECK(p.hl.at({0, 0, 0, 0}) == doctest::Approx(-2.0));
  CHECK(p.hh.at({0, 0, 0, 0}) == doctest::Approx(0.0));
}

TEST_CASE("odd dimensions are rejected without padding") {
  CHECK_THROWS_AS(dwt2(Tensor::zeros({1, 1, 3, 4})), GeometryError);
  CHECK_THROWS_AS(dwt2(Tensor::zeros({1, 1, 4, 5})), GeometryError);
  CHECK_NOTHROW(dwt2_reflect(Tensor::zeros({1, 1, 3, 5})));
}

TEST_CASE("Parseval energy preservation") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = Tensor::randn({1, 1, 8, 8}, rng);
    WaveletPyramid p = dwt2(x);
    const double ex = energy(x);
    const double ep = energy(p.ll) + energy(p.lh) + energy(p.hl) + energy(p.hh);
    CHECK(std::abs(ex - ep) / ex < 1e-9);
  }
}

TEST_CASE("perfect reconstruction") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = Tensor::randn({2, 3, 6, 10}, rng);
    CHECK(max_abs_diff(idwt2(dwt2(x)), x) < 1e-12);
  }
  // reflect-padded odd extents crop back to the source shape
  Tensor odd = Tensor::randn({1, 2, 5, 7}, rng);
  Tensor back = idwt2(dwt2_reflect(odd));
  CHECK(back.shape() == odd.shape());
  CHECK(max_abs_diff(back, odd) < 1e-12);
}

TEST_CASE("inverse of the constant case") {
  const double v = 1.3;
  WaveletPyramid p;
  p.ll = Tensor::full({1, 1, 2, 2}, 2 * v);
  p.lh = Tensor::zeros({1, 1, 2, 2});
  p.hl = Tensor::zeros({1, 1, 2, 2});
  p.hh = Tensor::zeros({1, 1, 2, 2});
  Tensor x = idwt2(p);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) CHECK(x.at({0, 0, i, j}) == doctest::Approx(v).epsilon(1e-15));
  }
}

TEST_CASE("linearity of the transform pair") {
  std::mt19937_64 rng(7);
  Tensor x = Tensor::randn({1, 1, 4, 4}, rng);
  Tensor y = Tensor::randn({1, 1, 4, 4}, rng);
  const double alpha = 1.7, beta = -0.4;
  WaveletPyramid px = dwt2(x);
  WaveletPyramid py = dwt2(y);
  WaveletPyramid pz = dwt2(x * alpha + y * beta);
  CHECK(max_abs_diff(pz.ll, px.ll * alpha + py.ll * beta) < 1e-12);
  CHECK(max_abs_diff(pz.hh, px.hh * alpha + py.hh * beta) < 1e-12);
}

TEST_CASE("gradients flow through analysis and synthesis") {
  std::mt19937_64 rng(9);
  Tensor x = Tensor::randn({1, 2, 4, 4}, rng, 1.0, true);
  Tensor wll = Tensor::randn({1, 2, 2, 2}, rng);
  Tensor whh = Tensor::randn({1, 2, 2, 2}, rng);
  const double err = check_gradients(
      [&] {
        WaveletPyramid p = dwt2(x);
        return weighted_sum(p.ll, wll) + weighted_sum(p.hh, whh);
      },
      {x});
  CHECK(err < 1e-6);

  Tensor w = Tensor::randn({1, 2, 4, 4}, rng);
  const double err2 =
      check_gradients([&] { return weighted_sum(idwt2(dwt2(x)), w); }, {x});
  CHECK(err2 < 1e-6);
}

TEST_CASE("subband profile: zero, constant and checkerboard perturbations") {
  Tensor clean = Tensor::zeros({1, 1, 4, 4});

  auto zero = subband_energy_profile(clean, clean);
  CHECK(zero.zero_energy);
  CHECK(zero.ll_fraction == 0.0);

  Tensor constant = Tensor::full({1, 1, 4, 4}, 0.25);
  auto low = subband_energy_profile(clean, constant);
  CHECK(low.ll_fraction == doctest::Approx(1.0));
  CHECK(low.detail_fraction() == doctest::Approx(0.0));

  std::vector<double> checker(16);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) checker[i * 4 + j] = ((i + j) % 2 == 0) ? 1.0 : -1.0;
  }
  auto nyquist = subband_energy_profile(clean, Tensor::from_data({1, 1, 4, 4}, checker));
  CHECK(nyquist.hh_fraction == doctest::Approx(1.0));
  CHECK(nyquist.ll_fraction == doctest::Approx(0.0));

  CHECK_THROWS_AS(subband_energy_profile(clean, Tensor::zeros({1, 1, 2, 2})), ShapeError);
}

TEST_CASE("fraction sum is one for random perturbations") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor clean = Tensor::uniform({1, 1, 8, 8}, 0.0, 1.0, rng);
    Tensor attacked = Tensor::uniform({1, 1, 8, 8}, 0.0, 1.0, rng);
    auto p = subband_energy_profile(clean, attacked);
    CHECK(std::abs(p.ll_fraction + p.detail_fraction() - 1.0) < 1e-9);
  }
}
