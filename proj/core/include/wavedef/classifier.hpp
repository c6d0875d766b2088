#pragma once

#include <cstdint>

#include "wavedef/nn.hpp"
#include "wavedef/tensor.hpp"

namespace wavedef {

/// Small residual CNN: 3x3 stem, three residual stages at widths 16/32/64
/// with stride-2 transitions, global average pooling and an affine head to
/// 10 logits.
struct Classifier {
  static constexpr int kClasses = 10;

  int image_channels = 1;

  Conv2dParams stem;               // image -> 16
  Conv2dParams block1_conv1, block1_conv2;  // 16
  Conv2dParams down1;              // 16 -> 32, stride 2
  Conv2dParams block2_conv1, block2_conv2;  // 32
  Conv2dParams down2;              // 32 -> 64, stride 2
  Conv2dParams block3_conv1, block3_conv2;  // 64
  Tensor fc_w;                     // [64, 10]
  Tensor fc_b;                     // [10]

  static Classifier init(int image_channels, uint64_t seed);

  Tensor forward(const Tensor& x) const;  // [B,C,H,W] -> [B,10]

  void visit(const ParamVisitor& fn);
  std::vector<Tensor> parameters();
  int64_t param_count();
};

inline Tensor classify(const Tensor& x, const Classifier& model) { return model.forward(x); }

}  // namespace wavedef
