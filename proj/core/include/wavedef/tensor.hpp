#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "wavedef/errors.hpp"

namespace wavedef {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);
std::vector<int64_t> row_major_strides(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until a backward pass touches it
  int64_t node_id = -1;      // index of the producing op on the active tape

  int64_t size() const { return static_cast<int64_t>(data.size()); }
};

/// Dense N-d array of doubles with optional gradient tracking. Value type:
/// copies share the underlying buffer; data is treated as immutable once an
/// op has consumed the tensor (grad buffers and optimizer steps are the two
/// sanctioned exceptions).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor zeros_like(const Tensor& other, bool requires_grad = false);
  static Tensor ones_like(const Tensor& other);
  static Tensor randn(const Shape& shape, std::mt19937_64& rng,
                      double stddev = 1.0, bool requires_grad = false);
  static Tensor uniform(const Shape& shape, double lo, double hi,
                        std::mt19937_64& rng, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int64_t dim(int axis) const;
  int64_t size() const;

  const double* data() const;
  double* data();
  double item() const;
  double at(std::initializer_list<int64_t> index) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  const std::vector<double>& grad() const;
  void zero_grad();

  /// Deep copy of the data; never copies the grad buffer.
  Tensor clone(bool requires_grad = false) const;
  Tensor detach() const { return clone(false); }

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& impl_ptr() const { return impl_; }

  static Tensor wrap(std::shared_ptr<TensorImpl> impl);

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Resolves a tensor to its gradient accumulation buffer during backward;
/// returns nullptr for tensors that do not track gradients.
using GradSlot = std::function<double*(const TensorImpl*)>;
using BackwardFn = std::function<void(const double* grad_out, const GradSlot& slot)>;

/// Records every differentiable op executed while it is alive (one tape per
/// thread; tapes nest as a stack). backward() runs the recorded ops in
/// reverse and consumes the tape.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Seeds d(loss)/d(loss) = 1 and accumulates gradients into the .grad
  /// buffer of every reachable requires_grad tensor.
  void backward(const Tensor& loss);

  /// Like backward(), but delivers gradients for `wanted` (aligned by index)
  /// instead of touching any tensor's grad buffer. Tensors that did not
  /// participate get an empty vector.
  std::vector<std::vector<double>> backward_collect(const Tensor& loss,
                                                    const std::vector<Tensor>& wanted);

  bool consumed() const { return consumed_; }
  std::size_t node_count() const { return nodes_.size(); }

  static Tape* current();

  /// Internal: called by op implementations.
  void record(std::vector<std::shared_ptr<TensorImpl>> inputs,
              std::shared_ptr<TensorImpl> output, BackwardFn fn);

 private:
  struct Node {
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::shared_ptr<TensorImpl> output;
    BackwardFn fn;
  };

  using GradMap = std::unordered_map<TensorImpl*, std::vector<double>>;
  void run(const Tensor& loss,
           const std::function<void(TensorImpl*, std::vector<double>&)>& on_complete);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

/// Helper used by every op: computes whether the result should be recorded,
/// builds the output tensor and registers the backward rule.
Tensor make_op_output(Shape shape, std::vector<double> data,
                      const std::vector<Tensor>& inputs, BackwardFn fn);

namespace detail {
bool any_requires_grad(const std::vector<Tensor>& inputs);
}

}  // namespace wavedef
