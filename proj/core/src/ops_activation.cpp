#include <cmath>
#include <numbers>

#include "op_common.hpp"
#include "wavedef/ops.hpp"

namespace wavedef {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

template <class FwdF, class BwdF>
Tensor pointwise_op(const Tensor& x, FwdF&& fwd, BwdF&& bwd_factor) {
  std::vector<double> out(static_cast<std::size_t>(x.size()));
  const double* xd = x.data();
  for (int64_t i = 0; i < x.size(); ++i) out[i] = fwd(xd[i]);
  auto x_impl = x.impl_ptr();
  BackwardFn fn = [x_impl, bwd = std::forward<BwdF>(bwd_factor)](const double* g,
                                                                 const GradSlot& slot) {
    if (double* gx = slot(x_impl.get())) {
      const double* xd = x_impl->data.data();
      for (int64_t i = 0; i < x_impl->size(); ++i) gx[i] += g[i] * bwd(xd[i]);
    }
  };
  return make_op_output(x.shape(), std::move(out), {x}, std::move(fn));
}

}  // namespace

Tensor gelu(const Tensor& x) {
  return pointwise_op(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [](double v) {
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        return cdf + v * pdf;
      });
}

Tensor exp(const Tensor& x) {
  std::vector<double> out(static_cast<std::size_t>(x.size()));
  const double* xd = x.data();
  for (int64_t i = 0; i < x.size(); ++i) out[i] = std::exp(xd[i]);
  auto x_impl = x.impl_ptr();
  auto out_copy = out;  // y values drive the backward rule
  BackwardFn fn = [x_impl, y = std::move(out_copy)](const double* g, const GradSlot& slot) {
    if (double* gx = slot(x_impl.get())) {
      for (int64_t i = 0; i < x_impl->size(); ++i) gx[i] += g[i] * y[i];
    }
  };
  return make_op_output(x.shape(), std::move(out), {x}, std::move(fn));
}

Tensor log(const Tensor& x) {
  return pointwise_op(x, [](double v) { return std::log(v); },
                      [](double v) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x) {
  std::vector<double> out(static_cast<std::size_t>(x.size()));
  const double* xd = x.data();
  for (int64_t i = 0; i < x.size(); ++i) out[i] = std::sqrt(xd[i]);
  auto x_impl = x.impl_ptr();
  auto out_copy = out;
  BackwardFn fn = [x_impl, y = std::move(out_copy)](const double* g, const GradSlot& slot) {
    if (double* gx = slot(x_impl.get())) {
      for (int64_t i = 0; i < x_impl->size(); ++i) gx[i] += g[i] * 0.5 / y[i];
    }
  };
  return make_op_output(x.shape(), std::move(out), {x}, std::move(fn));
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw ValueError("clamp requires lo <= hi");
  // Gradient passes only on the open interval (lo, hi).
  return pointwise_op(
      x, [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](double v) { return (lo < v && v < hi) ? 1.0 : 0.0; });
}

Tensor softmax(const Tensor& x, int axis) {
  const int rank = x.rank();
  axis = detail::normalize_axis(axis, rank);
  const Shape& shape = x.shape();
  const int64_t extent = shape[axis];
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[i];
  for (int i = axis + 1; i < rank; ++i) inner *= shape[i];

  std::vector<double> out(static_cast<std::size_t>(x.size()));
  const double* xd = x.data();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * extent * inner + in;
      double m = xd[base];
      for (int64_t k = 1; k < extent; ++k) m = std::max(m, xd[base + k * inner]);
      double z = 0.0;
      for (int64_t k = 0; k < extent; ++k) {
        const double e = std::exp(xd[base + k * inner] - m);
        out[base + k * inner] = e;
        z += e;
      }
      const double invz = 1.0 / z;
      for (int64_t k = 0; k < extent; ++k) out[base + k * inner] *= invz;
    }
  }

  auto x_impl = x.impl_ptr();
  auto y = out;
  BackwardFn fn = [x_impl, y = std::move(y), outer, inner, extent](const double* g,
                                                                   const GradSlot& slot) {
    if (double* gx = slot(x_impl.get())) {
      for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
          const int64_t base = o * extent * inner + in;
          double dot = 0.0;
          for (int64_t k = 0; k < extent; ++k) {
            const int64_t i = base + k * inner;
            dot += g[i] * y[i];
          }
          for (int64_t k = 0; k < extent; ++k) {
            const int64_t i = base + k * inner;
            gx[i] += y[i] * (g[i] - dot);
          }
        }
      }
    }
  };
  return make_op_output(shape, std::move(out), {x}, std::move(fn));
}

Tensor layer_norm(const Tensor& x, int axis, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  if (eps <= 0.0) throw ValueError("layer_norm eps must be positive");
  const int rank = x.rank();
  const int norm_axis = detail::normalize_axis(axis, rank);
  const Shape& shape = x.shape();
  const int64_t extent = shape[norm_axis];
  if (gamma.size() != extent || beta.size() != extent) {
    throw ShapeError("layer_norm affine parameters must match the normalized extent");
  }
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < norm_axis; ++i) outer *= shape[i];
  for (int i = norm_axis + 1; i < rank; ++i) inner *= shape[i];

  const double* xd = x.data();
  const double* gd = gamma.data();
  const double* bd = beta.data();
  const double inv_extent = 1.0 / static_cast<double>(extent);

  std::vector<double> out(static_cast<std::size_t>(x.size()));
  // One mean and one inverse-std per normalization site (outer x inner).
  std::vector<double> mu(static_cast<std::size_t>(outer * inner), 0.0);
  std::vector<double> rstd(static_cast<std::size_t>(outer * inner), 0.0);

  for (int64_t o = 0; o < outer; ++o) {
    const double* src = xd + o * extent * inner;
    double* mrow = mu.data() + o * inner;
    double* rrow = rstd.data() + o * inner;
    for (int64_t c = 0; c < extent; ++c) {
      const double* row = src + c * inner;
      for (int64_t i = 0; i < inner; ++i) mrow[i] += row[i];
    }
    for (int64_t i = 0; i < inner; ++i) mrow[i] *= inv_extent;
    for (int64_t c = 0; c < extent; ++c) {
      const double* row = src + c * inner;
      for (int64_t i = 0; i < inner; ++i) {
        const double d = row[i] - mrow[i];
        rrow[i] += d * d;
      }
    }
    for (int64_t i = 0; i < inner; ++i) {
      rrow[i] = 1.0 / std::sqrt(rrow[i] * inv_extent + eps);
    }
    double* dst = out.data() + o * extent * inner;
    for (int64_t c = 0; c < extent; ++c) {
      const double* row = src + c * inner;
      double* orow = dst + c * inner;
      const double gc = gd[c], bc = bd[c];
      for (int64_t i = 0; i < inner; ++i) {
        orow[i] = (row[i] - mrow[i]) * rrow[i] * gc + bc;
      }
    }
  }

  auto x_impl = x.impl_ptr();
  auto g_impl = gamma.impl_ptr();
  auto b_impl = beta.impl_ptr();
  BackwardFn fn = [x_impl, g_impl, b_impl, mu = std::move(mu), rstd = std::move(rstd), outer,
                   inner, extent, inv_extent](const double* g, const GradSlot& slot) {
    double* gx = slot(x_impl.get());
    double* gg = slot(g_impl.get());
    double* gb = slot(b_impl.get());
    const double* xd = x_impl->data.data();
    const double* gd = g_impl->data.data();

    std::vector<double> sum_ghat(gx ? static_cast<std::size_t>(inner) : 0);
    std::vector<double> sum_ghat_xhat(gx ? static_cast<std::size_t>(inner) : 0);
    for (int64_t o = 0; o < outer; ++o) {
      const double* src = xd + o * extent * inner;
      const double* grow_base = g + o * extent * inner;
      const double* mrow = mu.data() + o * inner;
      const double* rrow = rstd.data() + o * inner;

      if (gg || gb) {
        for (int64_t c = 0; c < extent; ++c) {
          const double* row = src + c * inner;
          const double* grow = grow_base + c * inner;
          double acc_g = 0.0, acc_gx = 0.0;
          for (int64_t i = 0; i < inner; ++i) {
            const double xhat = (row[i] - mrow[i]) * rrow[i];
            acc_gx += grow[i] * xhat;
            acc_g += grow[i];
          }
          if (gg) gg[c] += acc_gx;
          if (gb) gb[c] += acc_g;
        }
      }
      if (gx) {
        std::fill(sum_ghat.begin(), sum_ghat.end(), 0.0);
        std::fill(sum_ghat_xhat.begin(), sum_ghat_xhat.end(), 0.0);
        for (int64_t c = 0; c < extent; ++c) {
          const double* row = src + c * inner;
          const double* grow = grow_base + c * inner;
          const double gc = gd[c];
          for (int64_t i = 0; i < inner; ++i) {
            const double ghat = grow[i] * gc;
            const double xhat = (row[i] - mrow[i]) * rrow[i];
            sum_ghat[static_cast<std::size_t>(i)] += ghat;
            sum_ghat_xhat[static_cast<std::size_t>(i)] += ghat * xhat;
          }
        }
        double* gx_base = gx + o * extent * inner;
        for (int64_t c = 0; c < extent; ++c) {
          const double* row = src + c * inner;
          const double* grow = grow_base + c * inner;
          double* grad = gx_base + c * inner;
          const double gc = gd[c];
          for (int64_t i = 0; i < inner; ++i) {
            const double ghat = grow[i] * gc;
            const double xhat = (row[i] - mrow[i]) * rrow[i];
            grad[i] += rrow[i] * (ghat - inv_extent * sum_ghat[static_cast<std::size_t>(i)] -
                                  xhat * inv_extent *
                                      sum_ghat_xhat[static_cast<std::size_t>(i)]);
          }
        }
      }
    }
  };
  return make_op_output(shape, std::move(out), {x, gamma, beta}, std::move(fn));
}

Tensor l2_normalize(const Tensor& x, int axis, double eps) {
  const int norm_axis = detail::normalize_axis(axis, x.rank());
  if (norm_axis != x.rank() - 1) {
    // Composite fallback for non-trailing axes.
    Tensor n2 = reduce_sum(x * x, norm_axis, /*keepdims=*/true);
    return x / sqrt(add_scalar(n2, eps * eps));
  }
  const Shape& shape = x.shape();
  const int64_t inner = shape[static_cast<std::size_t>(norm_axis)];
  const int64_t rows = x.size() / inner;

  std::vector<double> out(static_cast<std::size_t>(x.size()));
  std::vector<double> rnorm(static_cast<std::size_t>(rows));
  const double* xd = x.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = xd + r * inner;
    double s = 0.0;
    for (int64_t i = 0; i < inner; ++i) s += row[i] * row[i];
    const double rn = 1.0 / std::sqrt(s + eps * eps);
    rnorm[static_cast<std::size_t>(r)] = rn;
    double* orow = out.data() + r * inner;
    for (int64_t i = 0; i < inner; ++i) orow[i] = row[i] * rn;
  }

  auto x_impl = x.impl_ptr();
  BackwardFn fn = [x_impl, rnorm = std::move(rnorm), rows, inner](const double* g,
                                                                  const GradSlot& slot) {
    if (double* gx = slot(x_impl.get())) {
      const double* xd = x_impl->data.data();
      for (int64_t r = 0; r < rows; ++r) {
        const double* row = xd + r * inner;
        const double* grow = g + r * inner;
        double* grad = gx + r * inner;
        const double rn = rnorm[static_cast<std::size_t>(r)];
        double dot = 0.0;
        for (int64_t i = 0; i < inner; ++i) dot += grow[i] * row[i];
        const double scale = rn * rn * rn * dot;
        for (int64_t i = 0; i < inner; ++i) grad[i] += rn * grow[i] - scale * row[i];
      }
    }
  };
  return make_op_output(shape, std::move(out), {x}, std::move(fn));
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) {
    throw ShapeError("cross_entropy expects [B,K] logits, got " +
                     shape_to_string(logits.shape()));
  }
  const int64_t b = logits.dim(0);
  const int64_t k = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != b) {
    throw ShapeError("cross_entropy label count mismatch");
  }
  for (int y : labels) {
    if (y < 0 || y >= k) {
      throw ValueError("invalid label index " + std::to_string(y) + " for " +
                       std::to_string(k) + " classes");
    }
  }

  const double* zd = logits.data();
  double loss = 0.0;
  std::vector<double> softmax_cache(static_cast<std::size_t>(b * k));
  for (int64_t i = 0; i < b; ++i) {
    const double* row = zd + i * k;
    double m = row[0];
    for (int64_t j = 1; j < k; ++j) m = std::max(m, row[j]);
    double z = 0.0;
    for (int64_t j = 0; j < k; ++j) {
      const double e = std::exp(row[j] - m);
      softmax_cache[i * k + j] = e;
      z += e;
    }
    const double lse = m + std::log(z);
    loss += lse - row[labels[static_cast<std::size_t>(i)]];
    const double invz = 1.0 / z;
    for (int64_t j = 0; j < k; ++j) softmax_cache[i * k + j] *= invz;
  }
  loss /= static_cast<double>(b);

  auto z_impl = logits.impl_ptr();
  BackwardFn fn = [z_impl, labels, sm = std::move(softmax_cache), b, k](
                      const double* g, const GradSlot& slot) {
    if (double* gz = slot(z_impl.get())) {
      const double scale = g[0] / static_cast<double>(b);
      for (int64_t i = 0; i < b; ++i) {
        for (int64_t j = 0; j < k; ++j) {
          const double onehot = (j == labels[static_cast<std::size_t>(i)]) ? 1.0 : 0.0;
          gz[i * k + j] += scale * (sm[i * k + j] - onehot);
        }
      }
    }
  };
  return make_op_output({}, {loss}, {logits}, std::move(fn));
}

}  // namespace wavedef
