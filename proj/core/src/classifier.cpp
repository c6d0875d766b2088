#include "wavedef/classifier.hpp"

#include <cmath>

#include "wavedef/ops.hpp"

namespace wavedef {

namespace {

Tensor residual_block(const Tensor& x, const Conv2dParams& c1, const Conv2dParams& c2) {
  return gelu(x + c2.forward(gelu(c1.forward(x))));
}

}  // namespace

Classifier Classifier::init(int image_channels, uint64_t seed) {
  std::mt19937_64 rng(seed);
  Classifier m;
  m.image_channels = image_channels;
  m.stem = Conv2dParams::make(16, image_channels, 3, 1, 1, 1, rng);
  m.block1_conv1 = Conv2dParams::make(16, 16, 3, 1, 1, 1, rng);
  m.block1_conv2 = Conv2dParams::make(16, 16, 3, 1, 1, 1, rng);
  // 4x4 stride-2 transitions halve even extents exactly
  m.down1 = Conv2dParams::make(32, 16, 4, 2, 1, 1, rng);
  m.block2_conv1 = Conv2dParams::make(32, 32, 3, 1, 1, 1, rng);
  m.block2_conv2 = Conv2dParams::make(32, 32, 3, 1, 1, 1, rng);
  m.down2 = Conv2dParams::make(64, 32, 4, 2, 1, 1, rng);
  m.block3_conv1 = Conv2dParams::make(64, 64, 3, 1, 1, 1, rng);
  m.block3_conv2 = Conv2dParams::make(64, 64, 3, 1, 1, 1, rng);
  const double bound = std::sqrt(6.0 / 64.0);
  m.fc_w = Tensor::uniform({64, kClasses}, -bound, bound, rng, /*requires_grad=*/true);
  m.fc_b = Tensor::zeros({kClasses}, /*requires_grad=*/true);
  return m;
}

Tensor Classifier::forward(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(1) != image_channels) {
    throw ShapeError("classifier input must be [B," + std::to_string(image_channels) +
                     ",H,W], got " + shape_to_string(x.shape()));
  }
  Tensor h = gelu(stem.forward(x));
  h = residual_block(h, block1_conv1, block1_conv2);
  h = gelu(down1.forward(h));
  h = residual_block(h, block2_conv1, block2_conv2);
  h = gelu(down2.forward(h));
  h = residual_block(h, block3_conv1, block3_conv2);

  // Global average pool -> [B, 64]
  const int64_t b = h.dim(0), c = h.dim(1);
  Tensor pooled = reshape(reduce_mean(reshape(h, {b, c, h.dim(2) * h.dim(3)}), 2, false),
                          {b, c});
  Tensor logits = matmul(pooled, fc_w) + reshape(fc_b, {1, kClasses});
  return logits;
}

void Classifier::visit(const ParamVisitor& fn) {
  stem.visit("stem", fn);
  block1_conv1.visit("block1.conv1", fn);
  block1_conv2.visit("block1.conv2", fn);
  down1.visit("down1", fn);
  block2_conv1.visit("block2.conv1", fn);
  block2_conv2.visit("block2.conv2", fn);
  down2.visit("down2", fn);
  block3_conv1.visit("block3.conv1", fn);
  block3_conv2.visit("block3.conv2", fn);
  fn("fc.w", fc_w);
  fn("fc.b", fc_b);
}

std::vector<Tensor> Classifier::parameters() {
  std::vector<Tensor> out;
  visit([&](const std::string&, Tensor& t) { out.push_back(t); });
  return out;
}

int64_t Classifier::param_count() {
  int64_t n = 0;
  visit([&](const std::string&, Tensor& t) { n += t.size(); });
  return n;
}

}  // namespace wavedef
