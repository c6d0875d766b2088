#include <cmath>

#include "op_common.hpp"
#include "wavedef/ops.hpp"

namespace wavedef {

using detail::broadcast_strides;
using detail::for_each_binary;
using detail::for_each_mapped;

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const int ra = static_cast<int>(a.size());
  const int rb = static_cast<int>(b.size());
  const int rank = std::max(ra, rb);
  Shape out(rank, 1);
  for (int i = 0; i < rank; ++i) {
    const int64_t da = (i < ra) ? a[ra - 1 - i] : 1;
    const int64_t db = (i < rb) ? b[rb - 1 - i] : 1;
    if (da == db || da == 1 || db == 1) {
      out[rank - 1 - i] = std::max(da, db);
    } else {
      throw ShapeError("cannot broadcast " + shape_to_string(a) + " with " +
                       shape_to_string(b));
    }
  }
  return out;
}

namespace {

enum class BinKind { Add, Sub, Mul, Div };

template <class F>
void apply_binary(const Shape& out_shape, const Shape& a_shape, const Shape& b_shape,
                  F&& f) {
  if (a_shape == b_shape) {
    const int64_t n = shape_numel(out_shape);
    for (int64_t i = 0; i < n; ++i) f(i, i, i);
    return;
  }
  for_each_binary(out_shape, broadcast_strides(a_shape, out_shape),
                  broadcast_strides(b_shape, out_shape), std::forward<F>(f));
}

Tensor binary_op(const Tensor& a, const Tensor& b, BinKind kind) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)));
  const double* ad = a.data();
  const double* bd = b.data();

  switch (kind) {
    case BinKind::Add:
      apply_binary(out_shape, a.shape(), b.shape(),
                   [&](int64_t i, int64_t ia, int64_t ib) { out[i] = ad[ia] + bd[ib]; });
      break;
    case BinKind::Sub:
      apply_binary(out_shape, a.shape(), b.shape(),
                   [&](int64_t i, int64_t ia, int64_t ib) { out[i] = ad[ia] - bd[ib]; });
      break;
    case BinKind::Mul:
      apply_binary(out_shape, a.shape(), b.shape(),
                   [&](int64_t i, int64_t ia, int64_t ib) { out[i] = ad[ia] * bd[ib]; });
      break;
    case BinKind::Div:
      apply_binary(out_shape, a.shape(), b.shape(),
                   [&](int64_t i, int64_t ia, int64_t ib) { out[i] = ad[ia] / bd[ib]; });
      break;
  }

  auto a_impl = a.impl_ptr();
  auto b_impl = b.impl_ptr();
  BackwardFn fn = [kind, out_shape, a_impl, b_impl](const double* g, const GradSlot& slot) {
    double* ga = slot(a_impl.get());
    double* gb = slot(b_impl.get());
    if (ga == nullptr && gb == nullptr) return;
    const double* ad = a_impl->data.data();
    const double* bd = b_impl->data.data();
    const Shape& a_shape = a_impl->shape;
    const Shape& b_shape = b_impl->shape;
    switch (kind) {
      case BinKind::Add:
        if (ga && gb) {
          apply_binary(out_shape, a_shape, b_shape, [&](int64_t i, int64_t ia, int64_t ib) {
            ga[ia] += g[i];
            gb[ib] += g[i];
          });
        } else if (ga) {
          apply_binary(out_shape, a_shape, b_shape,
                       [&](int64_t i, int64_t ia, int64_t) { ga[ia] += g[i]; });
        } else {
          apply_binary(out_shape, a_shape, b_shape,
                       [&](int64_t i, int64_t, int64_t ib) { gb[ib] += g[i]; });
        }
        break;
      case BinKind::Sub:
        if (ga && gb) {
          apply_binary(out_shape, a_shape, b_shape, [&](int64_t i, int64_t ia, int64_t ib) {
            ga[ia] += g[i];
            gb[ib] -= g[i];
          });
        } else if (ga) {
          apply_binary(out_shape, a_shape, b_shape,
                       [&](int64_t i, int64_t ia, int64_t) { ga[ia] += g[i]; });
        } else {
          apply_binary(out_shape, a_shape, b_shape,
                       [&](int64_t i, int64_t, int64_t ib) { gb[ib] -= g[i]; });
        }
        break;
      case BinKind::Mul:
        if (ga && gb) {
          apply_binary(out_shape, a_shape, b_shape, [&](int64_t i, int64_t ia, int64_t ib) {
            ga[ia] += g[i] * bd[ib];
            gb[ib] += g[i] * ad[ia];
          });
        } else if (ga) {
          apply_binary(out_shape, a_shape, b_shape,
                       [&](int64_t i, int64_t ia, int64_t ib) { ga[ia] += g[i] * bd[ib]; });
        } else {
          apply_binary(out_shape, a_shape, b_shape,
                       [&](int64_t i, int64_t ia, int64_t ib) { gb[ib] += g[i] * ad[ia]; });
        }
        break;
      case BinKind::Div:
        apply_binary(out_shape, a_shape, b_shape, [&](int64_t i, int64_t ia, int64_t ib) {
          const double inv = 1.0 / bd[ib];
          if (ga) ga[ia] += g[i] * inv;
          if (gb) gb[ib] -= g[i] * ad[ia] * inv * inv;
        });
        break;
    }
  };
  return make_op_output(out_shape, std::move(out), {a, b}, std::move(fn));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Mul); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Div); }

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.data(), a.data() + a.size());
  for (auto& v : out) v += s;
  auto a_impl = a.impl_ptr();
  BackwardFn fn = [a_impl](const double* g, const GradSlot& slot) {
    if (double* ga = slot(a_impl.get())) {
      for (int64_t i = 0; i < a_impl->size(); ++i) ga[i] += g[i];
    }
  };
  return make_op_output(a.shape(), std::move(out), {a}, std::move(fn));
}

Tensor mul_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.data(), a.data() + a.size());
  for (auto& v : out) v *= s;
  auto a_impl = a.impl_ptr();
  BackwardFn fn = [a_impl, s](const double* g, const GradSlot& slot) {
    if (double* ga = slot(a_impl.get())) {
      for (int64_t i = 0; i < a_impl->size(); ++i) ga[i] += g[i] * s;
    }
  };
  return make_op_output(a.shape(), std::move(out), {a}, std::move(fn));
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
Tensor operator+(double s, const Tensor& a) { return add_scalar(a, s); }
Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }
Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }

// ---- reductions ----

Tensor reduce_sum(const Tensor& x, int axis, bool keepdims) {
  const Shape& in_shape = x.shape();
  axis = detail::normalize_axis(axis, x.rank());

  Shape out_shape;
  for (int i = 0; i < x.rank(); ++i) {
    if (i == axis) {
      if (keepdims) out_shape.push_back(1);
      continue;
    }
    out_shape.push_back(in_shape[i]);
  }

  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= in_shape[i];
  for (int i = axis + 1; i < x.rank(); ++i) inner *= in_shape[i];
  const int64_t extent = in_shape[axis];

  std::vector<double> out(static_cast<std::size_t>(outer * inner), 0.0);
  const double* xd = x.data();
  for (int64_t o = 0; o < outer; ++o) {
    double* dst = out.data() + o * inner;
    const double* src = xd + o * extent * inner;
    for (int64_t a = 0; a < extent; ++a) {
      const double* row = src + a * inner;
      for (int64_t i = 0; i < inner; ++i) dst[i] += row[i];
    }
  }

  auto x_impl = x.impl_ptr();
  BackwardFn fn = [x_impl, outer, inner, extent](const double* g, const GradSlot& slot) {
    if (double* gx = slot(x_impl.get())) {
      for (int64_t o = 0; o < outer; ++o) {
        const double* grow = g + o * inner;
        double* dst = gx + o * extent * inner;
        for (int64_t a = 0; a < extent; ++a) {
          double* row = dst + a * inner;
          for (int64_t i = 0; i < inner; ++i) row[i] += grow[i];
        }
      }
    }
  };
  return make_op_output(out_shape, std::move(out), {x}, std::move(fn));
}

Tensor reduce_mean(const Tensor& x, int axis, bool keepdims) {
  const int norm_axis = detail::normalize_axis(axis, x.rank());
  const double inv = 1.0 / static_cast<double>(x.shape()[norm_axis]);
  return mul_scalar(reduce_sum(x, axis, keepdims), inv);
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  const double* xd = x.data();
  for (int64_t i = 0; i < x.size(); ++i) acc += xd[i];
  auto x_impl = x.impl_ptr();
  BackwardFn fn = [x_impl](const double* g, const GradSlot& slot) {
    if (double* gx = slot(x_impl.get())) {
      for (int64_t i = 0; i < x_impl->size(); ++i) gx[i] += g[0];
    }
  };
  return make_op_output({}, {acc}, {x}, std::move(fn));
}

Tensor mean(const Tensor& x) { return mul_scalar(sum(x), 1.0 / static_cast<double>(x.size())); }

// ---- non-differentiable utilities ----

bool all_finite(const Tensor& x) {
  const double* xd = x.data();
  for (int64_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(xd[i])) return false;
  }
  return true;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff shape mismatch: " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
  double m = 0.0;
  const double* ad = a.data();
  const double* bd = b.data();
  for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(ad[i] - bd[i]));
  return m;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("argmax_rows expects [B,K] logits");
  const int64_t b = logits.dim(0);
  const int64_t k = logits.dim(1);
  const double* d = logits.data();
  std::vector<int> out(static_cast<std::size_t>(b));
  for (int64_t i = 0; i < b; ++i) {
    int best = 0;
    double best_v = d[i * k];
    for (int64_t j = 1; j < k; ++j) {
      if (d[i * k + j] > best_v) {
        best_v = d[i * k + j];
        best = static_cast<int>(j);
      }
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

}  // namespace wavedef
