#include <algorithm>
#include <array>
#include <cmath>

#include "op_common.hpp"
#include "wavedef/ops.hpp"

namespace wavedef {

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.size()) {
    throw ShapeError("reshape from " + shape_to_string(x.shape()) + " to " +
                     shape_to_string(new_shape) + " changes element count");
  }
  std::vector<double> out(x.data(), x.data() + x.size());
  auto x_impl = x.impl_ptr();
  BackwardFn fn = [x_impl](const double* g, const GradSlot& slot) {
    if (double* gx = slot(x_impl.get())) {
      for (int64_t i = 0; i < x_impl->size(); ++i) gx[i] += g[i];
    }
  };
  return make_op_output(std::move(new_shape), std::move(out), {x}, std::move(fn));
}

namespace {

void apply_permutation(const Shape& in_shape, const std::vector<int>& axes,
                       const double* src, double* dst) {
  // dst[perm(index)] layout: walk the input, scatter into the output.
  Shape out_shape(axes.size());
  for (std::size_t i = 0; i < axes.size(); ++i) out_shape[i] = in_shape[axes[i]];
  auto out_strides = row_major_strides(out_shape);
  // stride of input axis a in the output offset
  std::vector<int64_t> scatter(in_shape.size(), 0);
  for (std::size_t i = 0; i < axes.size(); ++i) scatter[axes[i]] = out_strides[i];
  detail::for_each_mapped(in_shape, scatter,
                          [&](int64_t flat, int64_t off) { dst[off] = src[flat]; });
}

}  // namespace

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
  const Shape& in_shape = x.shape();
  if (static_cast<int>(axes.size()) != x.rank()) {
    throw ShapeError("permute axes rank mismatch");
  }
  std::vector<bool> seen(axes.size(), false);
  for (int a : axes) {
    if (a < 0 || a >= x.rank() || seen[a]) throw ShapeError("permute axes must be a permutation");
    seen[a] = true;
  }
  Shape out_shape(axes.size());
  for (std::size_t i = 0; i < axes.size(); ++i) out_shape[i] = in_shape[axes[i]];

  std::vector<double> out(static_cast<std::size_t>(x.size()));
  apply_permutation(in_shape, axes, x.data(), out.data());

  std::vector<int> inverse(axes.size());
  for (std::size_t i = 0; i < axes.size(); ++i) inverse[axes[i]] = static_cast<int>(i);

  auto x_impl = x.impl_ptr();
  BackwardFn fn = [out_shape, inverse, x_impl](const double* g, const GradSlot& slot) {
    if (double* gx = slot(x_impl.get())) {
      // inverse permutation of g, accumulated
      auto in_strides = row_major_strides(x_impl->shape);
      std::vector<int64_t> scatter(out_shape.size(), 0);
      for (std::size_t i = 0; i < inverse.size(); ++i) scatter[inverse[i]] = in_strides[i];
      detail::for_each_mapped(out_shape, scatter,
                              [&](int64_t flat, int64_t off) { gx[off] += g[flat]; });
    }
  };
  return make_op_output(out_shape, std::move(out), {x}, std::move(fn));
}

Tensor transpose(const Tensor& x, int axis_a, int axis_b) {
  axis_a = detail::normalize_axis(axis_a, x.rank());
  axis_b = detail::normalize_axis(axis_b, x.rank());
  std::vector<int> axes(static_cast<std::size_t>(x.rank()));
  for (int i = 0; i < x.rank(); ++i) axes[i] = i;
  std::swap(axes[axis_a], axes[axis_b]);
  return permute(x, axes);
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ValueError("concat of zero tensors");
  const int rank = parts[0].rank();
  axis = detail::normalize_axis(axis, rank);
  Shape out_shape = parts[0].shape();
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const Shape& s = parts[p].shape();
    if (static_cast<int>(s.size()) != rank) throw ShapeError("concat rank mismatch");
    for (int i = 0; i < rank; ++i) {
      if (i != axis && s[i] != out_shape[i]) {
        throw ShapeError("concat extent mismatch off the concat axis");
      }
    }
    out_shape[axis] += s[axis];
  }

  // outer x axis x inner decomposition
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= out_shape[i];
  for (int i = axis + 1; i < rank; ++i) inner *= out_shape[i];

  std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)));
  std::vector<int64_t> offsets;  // start of each part along the axis
  int64_t cursor = 0;
  for (const auto& part : parts) {
    offsets.push_back(cursor);
    const int64_t ext = part.shape()[axis];
    const double* src = part.data();
    for (int64_t o = 0; o < outer; ++o) {
      double* dst = out.data() + (o * out_shape[axis] + cursor) * inner;
      const double* s = src + o * ext * inner;
      std::copy(s, s + ext * inner, dst);
    }
    cursor += ext;
  }

  std::vector<std::shared_ptr<TensorImpl>> part_impls;
  std::vector<int64_t> extents;
  for (const auto& part : parts) {
    part_impls.push_back(part.impl_ptr());
    extents.push_back(part.shape()[axis]);
  }
  const int64_t axis_total = out_shape[axis];
  BackwardFn fn = [part_impls, extents, offsets, outer, inner, axis_total](
                      const double* g, const GradSlot& slot) {
    for (std::size_t p = 0; p < part_impls.size(); ++p) {
      double* gp = slot(part_impls[p].get());
      if (gp == nullptr) continue;
      for (int64_t o = 0; o < outer; ++o) {
        const double* src = g + (o * axis_total + offsets[p]) * inner;
        double* dst = gp + o * extents[p] * inner;
        for (int64_t i = 0; i < extents[p] * inner; ++i) dst[i] += src[i];
      }
    }
  };
  return make_op_output(out_shape, std::move(out), parts, std::move(fn));
}

Tensor slice(const Tensor& x, int axis, int64_t start, int64_t length) {
  const int rank = x.rank();
  axis = detail::normalize_axis(axis, rank);
  const Shape& in_shape = x.shape();
  if (length <= 0 || start < 0 || start + length > in_shape[axis]) {
    throw GeometryError("slice [" + std::to_string(start) + "," +
                        std::to_string(start + length) + ") out of range for axis extent " +
                        std::to_string(in_shape[axis]));
  }
  Shape out_shape = in_shape;
  out_shape[axis] = length;

  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= in_shape[i];
  for (int i = axis + 1; i < rank; ++i) inner *= in_shape[i];

  std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)));
  const double* src = x.data();
  for (int64_t o = 0; o < outer; ++o) {
    const double* s = src + (o * in_shape[axis] + start) * inner;
    std::copy(s, s + length * inner, out.data() + o * length * inner);
  }

  auto x_impl = x.impl_ptr();
  const int64_t axis_total = in_shape[axis];
  BackwardFn fn = [x_impl, outer, inner, start, length, axis_total](const double* g,
                                                                    const GradSlot& slot) {
    if (double* gx = slot(x_impl.get())) {
      for (int64_t o = 0; o < outer; ++o) {
        double* dst = gx + (o * axis_total + start) * inner;
        const double* s = g + o * length * inner;
        for (int64_t i = 0; i < length * inner; ++i) dst[i] += s[i];
      }
    }
  };
  return make_op_output(out_shape, std::move(out), {x}, std::move(fn));
}

namespace {

int64_t reflect_index(int64_t i, int64_t n) {
  // reflect without repeating the edge sample: n=4 -> ... 2 1 | 0 1 2 3 | 2 1 ...
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  int64_t m = i % period;
  if (m < 0) m += period;
  return (m < n) ? m : period - m;
}

void require_rank4(const Tensor& x, const char* what) {
  if (x.rank() != 4) {
    throw ShapeError(std::string(what) + " expects [B,C,H,W], got " +
                     shape_to_string(x.shape()));
  }
}

}  // namespace

Tensor pad2d(const Tensor& x, int top, int bottom, int left, int right, PadMode mode) {
  require_rank4(x, "pad2d");
  if (top < 0 || bottom < 0 || left < 0 || right < 0) {
    throw GeometryError("pad2d amounts must be non-negative");
  }
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (mode == PadMode::Reflect && (top >= h || bottom >= h || left >= w || right >= w)) {
    throw GeometryError("reflect pad amount must be smaller than the image extent");
  }
  const int64_t oh = h + top + bottom, ow = w + left + right;
  std::vector<double> out(static_cast<std::size_t>(b * c * oh * ow), 0.0);
  const double* src = x.data();

  // Map each output pixel to a source pixel (or none for zero padding).
  std::vector<int64_t> src_y(static_cast<std::size_t>(oh), -1);
  std::vector<int64_t> src_x(static_cast<std::size_t>(ow), -1);
  for (int64_t oy = 0; oy < oh; ++oy) {
    const int64_t iy = oy - top;
    src_y[oy] = (mode == PadMode::Reflect) ? reflect_index(iy, h)
                                           : ((iy >= 0 && iy < h) ? iy : -1);
  }
  for (int64_t ox = 0; ox < ow; ++ox) {
    const int64_t ix = ox - left;
    src_x[ox] = (mode == PadMode::Reflect) ? reflect_index(ix, w)
                                           : ((ix >= 0 && ix < w) ? ix : -1);
  }

  for (int64_t bc = 0; bc < b * c; ++bc) {
    const double* plane = src + bc * h * w;
    double* dst = out.data() + bc * oh * ow;
    for (int64_t oy = 0; oy < oh; ++oy) {
      if (src_y[oy] < 0) continue;
      const double* row = plane + src_y[oy] * w;
      for (int64_t ox = 0; ox < ow; ++ox) {
        if (src_x[ox] < 0) continue;
        dst[oy * ow + ox] = row[src_x[ox]];
      }
    }
  }

  auto x_impl = x.impl_ptr();
  BackwardFn fn = [x_impl, src_y, src_x, b, c, h, w, oh, ow](const double* g,
                                                             const GradSlot& slot) {
    if (double* gx = slot(x_impl.get())) {
      for (int64_t bc = 0; bc < b * c; ++bc) {
        double* gplane = gx + bc * h * w;
        const double* gout = g + bc * oh * ow;
        for (int64_t oy = 0; oy < oh; ++oy) {
          if (src_y[oy] < 0) continue;
          for (int64_t ox = 0; ox < ow; ++ox) {
            if (src_x[ox] < 0) continue;
            gplane[src_y[oy] * w + src_x[ox]] += gout[oy * ow + ox];
          }
        }
      }
    }
  };
  return make_op_output({b, c, oh, ow}, std::move(out), {x}, std::move(fn));
}

Tensor upsample2x(const Tensor& x, UpsampleMode mode) {
  require_rank4(x, "upsample2x");
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t oh = 2 * h, ow = 2 * w;
  std::vector<double> out(static_cast<std::size_t>(b * c * oh * ow));
  const double* src = x.data();

  if (mode == UpsampleMode::Nearest) {
    for (int64_t bc = 0; bc < b * c; ++bc) {
      const double* plane = src + bc * h * w;
      double* dst = out.data() + bc * oh * ow;
      for (int64_t oy = 0; oy < oh; ++oy) {
        const double* row = plane + (oy / 2) * w;
        for (int64_t ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = row[ox / 2];
      }
    }
    auto x_impl = x.impl_ptr();
    BackwardFn fn = [x_impl, b, c, h, w, oh, ow](const double* g, const GradSlot& slot) {
      if (double* gx = slot(x_impl.get())) {
        for (int64_t bc = 0; bc < b * c; ++bc) {
          double* gplane = gx + bc * h * w;
          const double* gout = g + bc * oh * ow;
          for (int64_t oy = 0; oy < oh; ++oy) {
            for (int64_t ox = 0; ox < ow; ++ox) {
              gplane[(oy / 2) * w + ox / 2] += gout[oy * ow + ox];
            }
          }
        }
      }
    };
    return make_op_output({b, c, oh, ow}, std::move(out), {x}, std::move(fn));
  }

  // Bilinear with half-pixel centers: src = (dst + 0.5)/2 - 0.5, edges clamped.
  // Precompute the two taps and weights per output coordinate.
  auto make_taps = [](int64_t out_n, int64_t in_n) {
    std::vector<std::array<int64_t, 2>> taps(static_cast<std::size_t>(out_n));
    std::vector<std::array<double, 2>> wts(static_cast<std::size_t>(out_n));
    for (int64_t o = 0; o < out_n; ++o) {
      const double s = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
      double f = std::floor(s);
      int64_t i0 = static_cast<int64_t>(f);
      double t = s - f;
      int64_t i1 = i0 + 1;
      i0 = std::clamp<int64_t>(i0, 0, in_n - 1);
      i1 = std::clamp<int64_t>(i1, 0, in_n - 1);
      taps[o] = {i0, i1};
      wts[o] = {1.0 - t, t};
    }
    return std::make_pair(taps, wts);
  };
  auto [ty, wy] = make_taps(oh, h);
  auto [tx, wx] = make_taps(ow, w);

  for (int64_t bc = 0; bc < b * c; ++bc) {
    const double* plane = src + bc * h * w;
    double* dst = out.data() + bc * oh * ow;
    for (int64_t oy = 0; oy < oh; ++oy) {
      const double* r0 = plane + ty[oy][0] * w;
      const double* r1 = plane + ty[oy][1] * w;
      for (int64_t ox = 0; ox < ow; ++ox) {
        const double v0 = r0[tx[ox][0]] * wx[ox][0] + r0[tx[ox][1]] * wx[ox][1];
        const double v1 = r1[tx[ox][0]] * wx[ox][0] + r1[tx[ox][1]] * wx[ox][1];
        dst[oy * ow + ox] = v0 * wy[oy][0] + v1 * wy[oy][1];
      }
    }
  }

  auto x_impl = x.impl_ptr();
  BackwardFn fn = [x_impl, b, c, h, w, oh, ow, ty, wy, tx, wx](const double* g,
                                                               const GradSlot& slot) {
    if (double* gx = slot(x_impl.get())) {
      for (int64_t bc = 0; bc < b * c; ++bc) {
        double* gplane = gx + bc * h * w;
        const double* gout = g + bc * oh * ow;
        for (int64_t oy = 0; oy < oh; ++oy) {
          for (int64_t ox = 0; ox < ow; ++ox) {
            const double gv = gout[oy * ow + ox];
            for (int dy = 0; dy < 2; ++dy) {
              for (int dx = 0; dx < 2; ++dx) {
                gplane[ty[oy][dy] * w + tx[ox][dx]] += gv * wy[oy][dy] * wx[ox][dx];
              }
            }
          }
        }
      }
    }
  };
  return make_op_output({b, c, oh, ow}, std::move(out), {x}, std::move(fn));
}

Tensor avgpool2x(const Tensor& x) {
  require_rank4(x, "avgpool2x");
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw GeometryError("avgpool2x requires even spatial extents, got " +
                        shape_to_string(x.shape()));
  }
  const int64_t oh = h / 2, ow = w / 2;
  std::vector<double> out(static_cast<std::size_t>(b * c * oh * ow));
  const double* src = x.data();
  for (int64_t bc = 0; bc < b * c; ++bc) {
    const double* plane = src + bc * h * w;
    double* dst = out.data() + bc * oh * ow;
    for (int64_t oy = 0; oy < oh; ++oy) {
      for (int64_t ox = 0; ox < ow; ++ox) {
        const double* p = plane + 2 * oy * w + 2 * ox;
        dst[oy * ow + ox] = 0.25 * (p[0] + p[1] + p[w] + p[w + 1]);
      }
    }
  }
  auto x_impl = x.impl_ptr();
  BackwardFn fn = [x_impl, b, c, h, w, oh, ow](const double* g, const GradSlot& slot) {
    if (double* gx = slot(x_impl.get())) {
      for (int64_t bc = 0; bc < b * c; ++bc) {
        double* gplane = gx + bc * h * w;
        const double* gout = g + bc * oh * ow;
        for (int64_t oy = 0; oy < oh; ++oy) {
          for (int64_t ox = 0; ox < ow; ++ox) {
            const double gv = 0.25 * gout[oy * ow + ox];
            double* p = gplane + 2 * oy * w + 2 * ox;
            p[0] += gv;
            p[1] += gv;
            p[w] += gv;
            p[w + 1] += gv;
          }
        }
      }
    }
  };
  return make_op_output({b, c, oh, ow}, std::move(out), {x}, std::move(fn));
}

Tensor pick2x2(const Tensor& x, int dy, int dx) {
  require_rank4(x, "pick2x2");
  if (dy < 0 || dy > 1 || dx < 0 || dx > 1) throw ValueError("pick2x2 offsets must be 0 or 1");
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw GeometryError("pick2x2 requires even spatial extents, got " +
                        shape_to_string(x.shape()));
  }
  const int64_t oh = h / 2, ow = w / 2;
  std::vector<double> out(static_cast<std::size_t>(b * c * oh * ow));
  const double* src = x.data();
  for (int64_t bc = 0; bc < b * c; ++bc) {
    const double* plane = src + bc * h * w;
    double* dst = out.data() + bc * oh * ow;
    for (int64_t oy = 0; oy < oh; ++oy) {
      const double* row = plane + (2 * oy + dy) * w + dx;
      for (int64_t ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = row[2 * ox];
    }
  }
  auto x_impl = x.impl_ptr();
  BackwardFn fn = [x_impl, b, c, h, w, oh, ow, dy, dx](const double* g, const GradSlot& slot) {
    if (double* gx = slot(x_impl.get())) {
      for (int64_t bc = 0; bc < b * c; ++bc) {
        double* gplane = gx + bc * h * w;
        const double* gout = g + bc * oh * ow;
        for (int64_t oy = 0; oy < oh; ++oy) {
          double* row = gplane + (2 * oy + dy) * w + dx;
          for (int64_t ox = 0; ox < ow; ++ox) row[2 * ox] += gout[oy * ow + ox];
        }
      }
    }
  };
  return make_op_output({b, c, oh, ow}, std::move(out), {x}, std::move(fn));
}

Tensor interleave2x2(const Tensor& a, const Tensor& b, const Tensor& c, const Tensor& d) {
  require_rank4(a, "interleave2x2");
  if (a.shape() != b.shape() || a.shape() != c.shape() || a.shape() != d.shape()) {
    throw ShapeError("interleave2x2 requires four equal-shape tensors");
  }
  const int64_t bn = a.dim(0), cn = a.dim(1), h = a.dim(2), w = a.dim(3);
  const int64_t oh = 2 * h, ow = 2 * w;
  std::vector<double> out(static_cast<std::size_t>(bn * cn * oh * ow));
  const double* pa = a.data();
  const double* pb = b.data();
  const double* pc = c.data();
  const double* pd = d.data();
  for (int64_t bc = 0; bc < bn * cn; ++bc) {
    double* dst = out.data() + bc * oh * ow;
    const int64_t base = bc * h * w;
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const int64_t i = base + y * w + x;
        dst[(2 * y) * ow + 2 * x] = pa[i];
        dst[(2 * y) * ow + 2 * x + 1] = pb[i];
        dst[(2 * y + 1) * ow + 2 * x] = pc[i];
        dst[(2 * y + 1) * ow + 2 * x + 1] = pd[i];
      }
    }
  }
  auto ia = a.impl_ptr();
  auto ib = b.impl_ptr();
  auto ic = c.impl_ptr();
  auto id = d.impl_ptr();
  BackwardFn fn = [ia, ib, ic, id, bn, cn, h, w, oh, ow](const double* g, const GradSlot& slot) {
    double* ga = slot(ia.get());
    double* gb = slot(ib.get());
    double* gc = slot(ic.get());
    double* gd = slot(id.get());
    for (int64_t bc = 0; bc < bn * cn; ++bc) {
      const double* gout = g + bc * oh * ow;
      const int64_t base = bc * h * w;
      for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
          const int64_t i = base + y * w + x;
          if (ga) ga[i] += gout[(2 * y) * ow + 2 * x];
          if (gb) gb[i] += gout[(2 * y) * ow + 2 * x + 1];
          if (gc) gc[i] += gout[(2 * y + 1) * ow + 2 * x];
          if (gd) gd[i] += gout[(2 * y + 1) * ow + 2 * x + 1];
        }
      }
    }
  };
  return make_op_output({bn, cn, oh, ow}, std::move(out), {a, b, c, d}, std::move(fn));
}

}  // namespace wavedef
