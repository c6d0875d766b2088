#include "support/gradcheck.hpp"

#include <cmath>

namespace wavedef::testing {

double rel_err(double analytic, double fd, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(fd), floor});
  return std::abs(analytic - fd) / denom;
}

Tensor weighted_sum(const Tensor& out, const Tensor& weights) {
  return sum(out * weights);
}

double check_gradients(const std::function<Tensor()>& fn, std::vector<Tensor> inputs,
                       const FdOptions& opts) {
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = fn();
    analytic = tape.backward_collect(loss, inputs);
  }

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor& input = inputs[i];
    if (analytic[i].empty()) analytic[i].assign(static_cast<std::size_t>(input.size()), 0.0);
    double* data = input.data();
    for (int64_t j = 0; j < input.size(); ++j) {
      const double old = data[j];
      data[j] = old + opts.h;
      const double up = fn().item();
      data[j] = old - opts.h;
      const double down = fn().item();
      data[j] = old;
      const double fd = (up - down) / (2.0 * opts.h);
      worst = std::max(worst, rel_err(analytic[i][static_cast<std::size_t>(j)], fd, opts.floor));
    }
  }
  return worst;
}

double check_directional(const std::function<Tensor()>& fn, std::vector<Tensor> params,
                         std::mt19937_64& rng, const FdOptions& opts) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<std::vector<double>> direction(params.size());
  double norm2 = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    direction[i].resize(static_cast<std::size_t>(params[i].size()));
    for (auto& v : direction[i]) {
      v = dist(rng);
      norm2 += v * v;
    }
  }
  // Unit direction: the probe radius is h itself, independent of the
  // parameter count.
  const double inv_norm = 1.0 / std::sqrt(norm2);
  for (auto& block : direction) {
    for (auto& v : block) v *= inv_norm;
  }

  double analytic_dot = 0.0;
  {
    Tape tape;
    Tensor loss = fn();
    auto grads = tape.backward_collect(loss, params);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (grads[i].empty()) continue;
      for (std::size_t j = 0; j < grads[i].size(); ++j) {
        analytic_dot += grads[i][j] * direction[i][j];
      }
    }
  }

  auto shift = [&](double scale) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      double* data = params[i].data();
      for (int64_t j = 0; j < params[i].size(); ++j) {
        data[j] += scale * direction[i][static_cast<std::size_t>(j)];
      }
    }
  };

  shift(opts.h);
  const double up = fn().item();
  shift(-2.0 * opts.h);
  const double down = fn().item();
  shift(opts.h);  // restore

  const double fd = (up - down) / (2.0 * opts.h);
  return rel_err(analytic_dot, fd, opts.floor);
}

}  // namespace wavedef::testing
