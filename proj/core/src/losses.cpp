#include "wavedef/losses.hpp"

#include "wavedef/ops.hpp"

namespace wavedef {

Tensor charbonnier_loss(const Tensor& x, const Tensor& y, double eps) {
  if (x.shape() != y.shape()) {
    throw ShapeError("charbonnier_loss shape mismatch: " + shape_to_string(x.shape()) +
                     " vs " + shape_to_string(y.shape()));
  }
  if (eps <= 0.0) throw ValueError("charbonnier_loss eps must be positive");
  Tensor diff = x - y;
  return mean(sqrt(add_scalar(diff * diff, eps * eps)));
}

Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels) {
  return cross_entropy(logits, labels);
}

}  // namespace wavedef
