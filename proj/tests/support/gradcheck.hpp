#pragma once

#include <functional>
#include <random>
#include <vector>

#include "wavedef/ops.hpp"
#include "wavedef/tensor.hpp"

namespace wavedef::testing {

struct FdOptions {
  double h = 1e-5;
  double tol = 1e-4;
  double floor = 1e-3;  // relative-error denominator floor
};

/// Central finite differences on every element of every input against the
/// tape gradient. `fn` rebuilds the graph from the inputs' current values on
/// each call and returns the scalar loss. Returns the worst relative error.
double check_gradients(const std::function<Tensor()>& fn, std::vector<Tensor> inputs,
                       const FdOptions& opts = {});

/// Directional check for full-model composites: draws one random direction
/// over all params and compares <grad, v> with the central difference of the
/// loss along v.
double check_directional(const std::function<Tensor()>& fn, std::vector<Tensor> params,
                         std::mt19937_64& rng, const FdOptions& opts = {});

/// Scalarizes a tensor-valued op with fixed random weights so the full
/// Jacobian action gets exercised: sum(out * weights).
Tensor weighted_sum(const Tensor& out, const Tensor& weights);

double rel_err(double analytic, double fd, double floor);

}  // namespace wavedef::testing
