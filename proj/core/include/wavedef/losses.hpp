#pragma once

#include <vector>

#include "wavedef/tensor.hpp"

namespace wavedef {

/// Smooth L1: mean over all elements of sqrt((x - y)^2 + eps^2).
Tensor charbonnier_loss(const Tensor& x, const Tensor& y, double eps);

/// Mean negative log-likelihood over the batch; log-softmax fused for
/// stability.
Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels);

}  // namespace wavedef
