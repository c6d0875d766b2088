#include "wavedef/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace wavedef {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) throw ShapeError("shape extents must be positive, got " + shape_to_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

std::vector<int64_t> row_major_strides(const Shape& shape) {
  std::vector<int64_t> strides(shape.size());
  int64_t acc = 1;
  for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
    strides[i] = acc;
    acc *= shape[i];
  }
  return strides;
}

// ---- Tensor ----

Tensor Tensor::wrap(std::shared_ptr<TensorImpl> impl) {
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  int64_t n = shape_numel(shape);
  impl->shape = std::move(shape);
  impl->data.assign(static_cast<std::size_t>(n), 0.0);
  impl->requires_grad = requires_grad;
  return wrap(std::move(impl));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
  int64_t n = shape_numel(shape);
  if (n != static_cast<int64_t>(values.size())) {
    throw ShapeError("data length " + std::to_string(values.size()) +
                     " does not match shape " + shape_to_string(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return wrap(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

Tensor Tensor::zeros_like(const Tensor& other, bool requires_grad) {
  return zeros(other.shape(), requires_grad);
}

Tensor Tensor::ones_like(const Tensor& other) {
  return full(other.shape(), 1.0);
}

Tensor Tensor::randn(const Shape& shape, std::mt19937_64& rng, double stddev,
                     bool requires_grad) {
  Tensor t = zeros(shape, requires_grad);
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.impl_->data) v = dist(rng);
  return t;
}

Tensor Tensor::uniform(const Shape& shape, double lo, double hi,
                       std::mt19937_64& rng, bool requires_grad) {
  Tensor t = zeros(shape, requires_grad);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.impl_->data) v = dist(rng);
  return t;
}

static const Shape& require_defined(const std::shared_ptr<TensorImpl>& impl) {
  if (!impl) throw ValueError("operation on an undefined tensor");
  return impl->shape;
}

const Shape& Tensor::shape() const { return require_defined(impl_); }

int64_t Tensor::dim(int axis) const {
  const Shape& s = shape();
  if (axis < 0) axis += static_cast<int>(s.size());
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_to_string(s));
  }
  return s[axis];
}

int64_t Tensor::size() const {
  require_defined(impl_);
  return impl_->size();
}

const double* Tensor::data() const {
  require_defined(impl_);
  return impl_->data.data();
}

double* Tensor::data() {
  require_defined(impl_);
  return impl_->data.data();
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() requires a single-element tensor, got " + shape_to_string(shape()));
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<int64_t> index) const {
  const Shape& s = shape();
  if (index.size() != s.size()) {
    throw ShapeError("index rank mismatch for " + shape_to_string(s));
  }
  auto strides = row_major_strides(s);
  int64_t off = 0;
  int i = 0;
  for (int64_t ix : index) {
    if (ix < 0 || ix >= s[i]) throw ShapeError("index out of range");
    off += ix * strides[i];
    ++i;
  }
  return impl_->data[static_cast<std::size_t>(off)];
}

bool Tensor::requires_grad() const {
  require_defined(impl_);
  return impl_->requires_grad;
}

void Tensor::set_requires_grad(bool value) {
  require_defined(impl_);
  impl_->requires_grad = value;
}

bool Tensor::has_grad() const {
  require_defined(impl_);
  return !impl_->grad.empty();
}

const std::vector<double>& Tensor::grad() const {
  require_defined(impl_);
  if (impl_->grad.empty()) throw ValueError("tensor has no gradient populated");
  return impl_->grad;
}

void Tensor::zero_grad() {
  require_defined(impl_);
  impl_->grad.clear();
}

Tensor Tensor::clone(bool requires_grad) const {
  require_defined(impl_);
  return from_data(impl_->shape, impl_->data, requires_grad);
}

// ---- Tape ----

namespace {
thread_local std::vector<Tape*> g_tape_stack;
}

Tape::Tape() { g_tape_stack.push_back(this); }

Tape::~Tape() {
  // Tapes are scoped objects; destruction order matches stack discipline.
  if (!g_tape_stack.empty() && g_tape_stack.back() == this) {
    g_tape_stack.pop_back();
  } else {
    auto it = std::find(g_tape_stack.begin(), g_tape_stack.end(), this);
    if (it != g_tape_stack.end()) g_tape_stack.erase(it);
  }
}

Tape* Tape::current() {
  return g_tape_stack.empty() ? nullptr : g_tape_stack.back();
}

void Tape::record(std::vector<std::shared_ptr<TensorImpl>> inputs,
                  std::shared_ptr<TensorImpl> output, BackwardFn fn) {
  output->node_id = static_cast<int64_t>(nodes_.size());
  nodes_.push_back(Node{std::move(inputs), std::move(output), std::move(fn)});
}

// Core reverse sweep. Gradients for tensors produced by a node on this tape
// are complete once that node fires; `on_complete` receives every finished
// buffer (interiors right after firing, leaves at the end) so callers choose
// what to retain. Buffers not retained are freed immediately to bound peak
// memory.
void Tape::run(const Tensor& loss,
               const std::function<void(TensorImpl*, std::vector<double>&)>& on_complete) {
  if (consumed_) throw ValueError("tape already consumed by a backward pass");
  if (!loss.defined() || loss.size() != 1) {
    throw ShapeError("backward requires a scalar loss");
  }
  if (!loss.requires_grad()) {
    throw ValueError("loss does not track gradients (no recorded op produced it)");
  }
  consumed_ = true;

  GradMap grads;
  grads[loss.impl()] = {1.0};

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& node = *it;
    auto found = grads.find(node.output.get());
    if (found != grads.end()) {
      GradSlot slot = [&grads](const TensorImpl* t) -> double* {
        if (!t->requires_grad) return nullptr;
        auto& buf = grads[const_cast<TensorImpl*>(t)];
        if (buf.empty()) buf.assign(static_cast<std::size_t>(t->size()), 0.0);
        return buf.data();
      };
      node.fn(found->second.data(), slot);
      on_complete(node.output.get(), found->second);
      grads.erase(found);
    }
    node.inputs.clear();
    BackwardFn().swap(node.fn);
    node.output.reset();
  }
  // Whatever is left was produced by no node on this tape: the leaves.
  for (auto& [impl, buf] : grads) {
    if (!buf.empty()) on_complete(impl, buf);
  }
  nodes_.clear();
}

void Tape::backward(const Tensor& loss) {
  run(loss, [](TensorImpl* t, std::vector<double>& buf) {
    if (t->grad.empty()) t->grad.assign(static_cast<std::size_t>(t->size()), 0.0);
    for (std::size_t i = 0; i < buf.size(); ++i) t->grad[i] += buf[i];
  });
}

std::vector<std::vector<double>> Tape::backward_collect(
    const Tensor& loss, const std::vector<Tensor>& wanted) {
  std::unordered_map<const TensorImpl*, std::size_t> index;
  for (std::size_t i = 0; i < wanted.size(); ++i) index[wanted[i].impl()] = i;
  std::vector<std::vector<double>> out(wanted.size());
  run(loss, [&](TensorImpl* t, std::vector<double>& buf) {
    auto it = index.find(t);
    if (it != index.end()) out[it->second] = std::move(buf);
  });
  return out;
}

namespace detail {
bool any_requires_grad(const std::vector<Tensor>& inputs) {
  for (const auto& t : inputs) {
    if (t.defined() && t.requires_grad()) return true;
  }
  return false;
}
}  // namespace detail

Tensor make_op_output(Shape shape, std::vector<double> data,
                      const std::vector<Tensor>& inputs, BackwardFn fn) {
  Tensor out = Tensor::from_data(std::move(shape), std::move(data), false);
  Tape* tape = Tape::current();
  if (tape != nullptr && detail::any_requires_grad(inputs)) {
    out.set_requires_grad(true);
    std::vector<std::shared_ptr<TensorImpl>> impls;
    impls.reserve(inputs.size());
    for (const auto& t : inputs) impls.push_back(t.impl_ptr());
    tape->record(std::move(impls), out.impl_ptr(), std::move(fn));
  }
  return out;
}

}  // namespace wavedef
