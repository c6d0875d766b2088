#pragma once

#include <cstdint>
#include <vector>

#include "wavedef/tensor.hpp"

namespace wavedef {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Standard Adam with bias correction. Parameters with an empty grad buffer
/// are treated as zero-gradient (values stay put, moments decay).
class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, AdamConfig config = {});

  void step(double lr);
  void zero_grad();

  int64_t step_count() const { return t_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  int64_t t_ = 0;
};

/// Cosine decay from `start` at epoch 0 to `end` at epoch total-1 (exact at
/// both boundaries). A single-epoch schedule returns `start`.
double cosine_lr(double start, double end, int epoch, int total_epochs);

}  // namespace wavedef
