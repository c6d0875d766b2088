#include <Eigen/Core>

#include "op_common.hpp"
#include "wavedef/ops.hpp"

namespace wavedef {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

// C[m,n] (+)= A[m,k] * B[k,n], optionally transposing either operand's
// logical view. Accumulate adds into C instead of overwriting.
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, const double* a,
          const double* b, double* c, bool accumulate) {
  Map C(c, m, n);
  const auto run = [&](const auto& lhs, const auto& rhs) {
    if (accumulate) {
      C.noalias() += lhs * rhs;
    } else {
      C.noalias() = lhs * rhs;
    }
  };
  if (!trans_a && !trans_b) {
    run(MapC(a, m, k), MapC(b, k, n));
  } else if (!trans_a && trans_b) {
    run(MapC(a, m, k), MapC(b, n, k).transpose());
  } else if (trans_a && !trans_b) {
    run(MapC(a, k, m).transpose(), MapC(b, k, n));
  } else {
    run(MapC(a, k, m).transpose(), MapC(b, n, k).transpose());
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw ShapeError("matmul operands must have rank >= 2");
  }
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const int64_t m = sa[sa.size() - 2];
  const int64_t k = sa[sa.size() - 1];
  const int64_t k2 = sb[sb.size() - 2];
  const int64_t n = sb[sb.size() - 1];
  if (k != k2) {
    throw ShapeError("matmul inner dimensions disagree: " + shape_to_string(sa) + " x " +
                     shape_to_string(sb));
  }

  Shape batch_a(sa.begin(), sa.end() - 2);
  Shape batch_b(sb.begin(), sb.end() - 2);
  const bool b_shared = batch_b.empty();
  if (!b_shared && batch_a != batch_b) {
    throw ShapeError("matmul batch dimensions disagree: " + shape_to_string(sa) + " x " +
                     shape_to_string(sb));
  }
  const int64_t batches = shape_numel(batch_a);

  Shape out_shape = batch_a;
  out_shape.push_back(m);
  out_shape.push_back(n);

  std::vector<double> out(static_cast<std::size_t>(batches * m * n));
  const double* ad = a.data();
  const double* bd = b.data();
  for (int64_t i = 0; i < batches; ++i) {
    gemm(false, false, m, n, k, ad + i * m * k, b_shared ? bd : bd + i * k * n,
         out.data() + i * m * n, false);
  }

  auto a_impl = a.impl_ptr();
  auto b_impl = b.impl_ptr();
  BackwardFn fn = [a_impl, b_impl, m, n, k, batches, b_shared](const double* g,
                                                               const GradSlot& slot) {
    double* ga = slot(a_impl.get());
    double* gb = slot(b_impl.get());
    const double* ad = a_impl->data.data();
    const double* bd = b_impl->data.data();
    for (int64_t i = 0; i < batches; ++i) {
      const double* gi = g + i * m * n;
      if (ga) {
        // dA = dOut * B^T
        gemm(false, true, m, k, n, gi, b_shared ? bd : bd + i * k * n, ga + i * m * k, true);
      }
      if (gb) {
        // dB = A^T * dOut (accumulates across batches when B is shared)
        gemm(true, false, k, n, m, ad + i * m * k, gi, b_shared ? gb : gb + i * k * n, true);
      }
    }
  };
  return make_op_output(std::move(out_shape), std::move(out), {a, b}, std::move(fn));
}

// ---- conv2d ----

namespace {

struct ConvGeom {
  int64_t batch, cin, h, w;
  int64_t cout, cin_g, kh, kw;
  int64_t stride, pad, groups;
  int64_t oh, ow;
  int64_t cout_g;
};

int64_t conv_extent(int64_t in, int64_t kernel, int64_t pad, int64_t stride) {
  const int64_t num = in + 2 * pad - kernel;
  if (num < 0 || num % stride != 0) {
    throw GeometryError("conv2d output extent is not a positive integer (in=" +
                        std::to_string(in) + ", k=" + std::to_string(kernel) + ", pad=" +
                        std::to_string(pad) + ", stride=" + std::to_string(stride) + ")");
  }
  return num / stride + 1;
}

ConvGeom make_geom(const Tensor& x, const Tensor& w, int stride, int padding, int groups) {
  if (x.rank() != 4) throw ShapeError("conv2d input must be [B,C,H,W]");
  if (w.rank() != 4) throw ShapeError("conv2d weights must be [Cout,Cin/g,kh,kw]");
  if (stride < 1 || padding < 0 || groups < 1) {
    throw ValueError("conv2d requires stride >= 1, padding >= 0, groups >= 1");
  }
  ConvGeom g;
  g.batch = x.dim(0);
  g.cin = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.cout = w.dim(0);
  g.cin_g = w.dim(1);
  g.kh = w.dim(2);
  g.kw = w.dim(3);
  g.stride = stride;
  g.pad = padding;
  g.groups = groups;
  if (g.cin % groups != 0 || g.cout % groups != 0) {
    throw ShapeError("conv2d channel counts must be divisible by groups");
  }
  if (g.cin / groups != g.cin_g) {
    throw ShapeError("conv2d weight input-channel extent disagrees with input/groups");
  }
  g.oh = conv_extent(g.h, g.kh, g.pad, g.stride);
  g.ow = conv_extent(g.w, g.kw, g.pad, g.stride);
  g.cout_g = g.cout / groups;
  return g;
}

thread_local std::vector<double> t_col;
thread_local std::vector<double> t_buf;

// col[(cin_g*kh*kw) x (batch*oh*ow)] for one group, all batch elements;
// batch b occupies the column range [b*oh*ow, (b+1)*oh*ow).
void im2col_group(const double* x, const ConvGeom& g, int64_t group,
                  std::vector<double>& col) {
  const int64_t spatial = g.oh * g.ow;
  const int64_t cols = g.batch * spatial;
  col.assign(static_cast<std::size_t>(g.cin_g * g.kh * g.kw * cols), 0.0);
  for (int64_t b = 0; b < g.batch; ++b) {
    const double* base = x + (b * g.cin + group * g.cin_g) * g.h * g.w;
    for (int64_t c = 0; c < g.cin_g; ++c) {
      const double* plane = base + c * g.h * g.w;
      double* out = col.data() + c * g.kh * g.kw * cols + b * spatial;
      for (int64_t ky = 0; ky < g.kh; ++ky) {
        for (int64_t kx = 0; kx < g.kw; ++kx) {
          for (int64_t oy = 0; oy < g.oh; ++oy) {
            const int64_t iy = oy * g.stride + ky - g.pad;
            double* row = out + oy * g.ow;
            if (iy >= 0 && iy < g.h) {
              const double* src = plane + iy * g.w;
              for (int64_t ox = 0; ox < g.ow; ++ox) {
                const int64_t ix = ox * g.stride + kx - g.pad;
                if (ix >= 0 && ix < g.w) row[ox] = src[ix];
              }
            }
          }
          out += cols;
        }
      }
    }
  }
}

void col2im_group_add(const double* col, const ConvGeom& g, int64_t group, double* gx) {
  const int64_t spatial = g.oh * g.ow;
  const int64_t cols = g.batch * spatial;
  for (int64_t b = 0; b < g.batch; ++b) {
    double* base = gx + (b * g.cin + group * g.cin_g) * g.h * g.w;
    for (int64_t c = 0; c < g.cin_g; ++c) {
      double* plane = base + c * g.h * g.w;
      const double* in = col + c * g.kh * g.kw * cols + b * spatial;
      for (int64_t ky = 0; ky < g.kh; ++ky) {
        for (int64_t kx = 0; kx < g.kw; ++kx) {
          for (int64_t oy = 0; oy < g.oh; ++oy) {
            const int64_t iy = oy * g.stride + ky - g.pad;
            if (iy >= 0 && iy < g.h) {
              double* dst = plane + iy * g.w;
              const double* row = in + oy * g.ow;
              for (int64_t ox = 0; ox < g.ow; ++ox) {
                const int64_t ix = ox * g.stride + kx - g.pad;
                if (ix >= 0 && ix < g.w) dst[ix] += row[ox];
              }
            }
          }
          in += cols;
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeom& g) {
  return g.kh == 1 && g.kw == 1 && g.stride == 1 && g.pad == 0 && g.groups == 1;
}

// 3x3, stride 1, pad 1 depthwise: the denoiser's hot path.
bool is_depthwise3(const ConvGeom& g) {
  return g.groups == g.cin && g.cout == g.cin && g.cin_g == 1 && g.stride == 1 &&
         g.kh == 3 && g.kw == 3 && g.pad == 1 && g.h >= 2 && g.w >= 2;
}

// One output row given three source rows (any may be null at the borders).
inline void dw3_row(const double* r0, const double* r1, const double* r2, const double* k,
                    int64_t w, double* dst) {
  const double k00 = k[0], k01 = k[1], k02 = k[2];
  const double k10 = k[3], k11 = k[4], k12 = k[5];
  const double k20 = k[6], k21 = k[7], k22 = k[8];

  auto at = [w](const double* row, int64_t ix) -> double {
    return (row != nullptr && ix >= 0 && ix < w) ? row[ix] : 0.0;
  };

  // left border
  dst[0] = at(r0, 0) * k01 + at(r0, 1) * k02 + at(r1, 0) * k11 + at(r1, 1) * k12 +
           at(r2, 0) * k21 + at(r2, 1) * k22;
  // interior: no bounds checks
  if (r0 != nullptr && r2 != nullptr) {
    for (int64_t ox = 1; ox < w - 1; ++ox) {
      dst[ox] = r0[ox - 1] * k00 + r0[ox] * k01 + r0[ox + 1] * k02 + r1[ox - 1] * k10 +
                r1[ox] * k11 + r1[ox + 1] * k12 + r2[ox - 1] * k20 + r2[ox] * k21 +
                r2[ox + 1] * k22;
    }
  } else if (r0 != nullptr) {
    for (int64_t ox = 1; ox < w - 1; ++ox) {
      dst[ox] = r0[ox - 1] * k00 + r0[ox] * k01 + r0[ox + 1] * k02 + r1[ox - 1] * k10 +
                r1[ox] * k11 + r1[ox + 1] * k12;
    }
  } else if (r2 != nullptr) {
    for (int64_t ox = 1; ox < w - 1; ++ox) {
      dst[ox] = r1[ox - 1] * k10 + r1[ox] * k11 + r1[ox + 1] * k12 + r2[ox - 1] * k20 +
                r2[ox] * k21 + r2[ox + 1] * k22;
    }
  } else {
    for (int64_t ox = 1; ox < w - 1; ++ox) {
      dst[ox] = r1[ox - 1] * k10 + r1[ox] * k11 + r1[ox + 1] * k12;
    }
  }
  // right border
  const int64_t e = w - 1;
  if (e > 0) {
    dst[e] = at(r0, e - 1) * k00 + at(r0, e) * k01 + at(r1, e - 1) * k10 + at(r1, e) * k11 +
             at(r2, e - 1) * k20 + at(r2, e) * k21;
  }
}

void depthwise3_forward(const double* x, const double* w, const ConvGeom& g, double* out) {
  for (int64_t bc = 0; bc < g.batch * g.cin; ++bc) {
    const int64_t c = bc % g.cin;
    const double* plane = x + bc * g.h * g.w;
    const double* ker = w + c * 9;
    double* dst = out + bc * g.h * g.w;
    for (int64_t oy = 0; oy < g.h; ++oy) {
      const double* r0 = (oy > 0) ? plane + (oy - 1) * g.w : nullptr;
      const double* r1 = plane + oy * g.w;
      const double* r2 = (oy + 1 < g.h) ? plane + (oy + 1) * g.w : nullptr;
      dw3_row(r0, r1, r2, ker, g.w, dst + oy * g.w);
    }
  }
}

// gx via correlation with the 180-degree rotated kernel (same geometry);
// gw via contiguous row dot products per kernel tap.
void depthwise3_backward(const double* x, const double* w, const double* gout,
                         const ConvGeom& g, double* gx, double* gw) {
  std::vector<double> flipped(9);
  for (int64_t bc = 0; bc < g.batch * g.cin; ++bc) {
    const int64_t c = bc % g.cin;
    const double* plane = x + bc * g.h * g.w;
    const double* go = gout + bc * g.h * g.w;
    const double* ker = w + c * 9;

    if (gx != nullptr) {
      for (int i = 0; i < 9; ++i) flipped[static_cast<std::size_t>(i)] = ker[8 - i];
      double* gplane = gx + bc * g.h * g.w;
      std::vector<double> tmp(static_cast<std::size_t>(g.w));
      for (int64_t oy = 0; oy < g.h; ++oy) {
        const double* r0 = (oy > 0) ? go + (oy - 1) * g.w : nullptr;
        const double* r1 = go + oy * g.w;
        const double* r2 = (oy + 1 < g.h) ? go + (oy + 1) * g.w : nullptr;
        dw3_row(r0, r1, r2, flipped.data(), g.w, tmp.data());
        double* dst = gplane + oy * g.w;
        for (int64_t i = 0; i < g.w; ++i) dst[i] += tmp[i];
      }
    }
    if (gw != nullptr) {
      double* gker = gw + c * 9;
      for (int64_t ky = 0; ky < 3; ++ky) {
        for (int64_t kx = 0; kx < 3; ++kx) {
          const int64_t ox_begin = std::max<int64_t>(0, 1 - kx);
          const int64_t ox_end = std::min<int64_t>(g.w, g.w + 1 - kx);
          double acc = 0.0;
          for (int64_t oy = 0; oy < g.h; ++oy) {
            const int64_t iy = oy + ky - 1;
            if (iy < 0 || iy >= g.h) continue;
            const double* grow = go + oy * g.w;
            const double* xrow = plane + iy * g.w + (kx - 1);
            for (int64_t ox = ox_begin; ox < ox_end; ++ox) acc += grow[ox] * xrow[ox];
          }
          gker[ky * 3 + kx] += acc;
        }
      }
    }
  }
}

// Generic direct loops: fallback for unusual depthwise geometries.
void depthwise_generic_forward(const double* x, const double* w, const ConvGeom& g,
                               double* out) {
  for (int64_t b = 0; b < g.batch; ++b) {
    for (int64_t c = 0; c < g.cin; ++c) {
      const double* plane = x + (b * g.cin + c) * g.h * g.w;
      const double* ker = w + c * g.kh * g.kw;
      double* dst = out + (b * g.cout + c) * g.oh * g.ow;
      for (int64_t oy = 0; oy < g.oh; ++oy) {
        for (int64_t ox = 0; ox < g.ow; ++ox) {
          double acc = 0.0;
          for (int64_t ky = 0; ky < g.kh; ++ky) {
            const int64_t iy = oy * g.stride + ky - g.pad;
            if (iy < 0 || iy >= g.h) continue;
            for (int64_t kx = 0; kx < g.kw; ++kx) {
              const int64_t ix = ox * g.stride + kx - g.pad;
              if (ix >= 0 && ix < g.w) acc += plane[iy * g.w + ix] * ker[ky * g.kw + kx];
            }
          }
          dst[oy * g.ow + ox] = acc;
        }
      }
    }
  }
}

void depthwise_generic_backward(const double* x, const double* w, const double* gout,
                                const ConvGeom& g, double* gx, double* gw) {
  for (int64_t b = 0; b < g.batch; ++b) {
    for (int64_t c = 0; c < g.cin; ++c) {
      const double* plane = x + (b * g.cin + c) * g.h * g.w;
      const double* ker = w + c * g.kh * g.kw;
      const double* go = gout + (b * g.cout + c) * g.oh * g.ow;
      double* gplane = gx ? gx + (b * g.cin + c) * g.h * g.w : nullptr;
      double* gker = gw ? gw + c * g.kh * g.kw : nullptr;
      for (int64_t oy = 0; oy < g.oh; ++oy) {
        for (int64_t ox = 0; ox < g.ow; ++ox) {
          const double gv = go[oy * g.ow + ox];
          for (int64_t ky = 0; ky < g.kh; ++ky) {
            const int64_t iy = oy * g.stride + ky - g.pad;
            if (iy < 0 || iy >= g.h) continue;
            for (int64_t kx = 0; kx < g.kw; ++kx) {
              const int64_t ix = ox * g.stride + kx - g.pad;
              if (ix < 0 || ix >= g.w) continue;
              if (gplane) gplane[iy * g.w + ix] += gv * ker[ky * g.kw + kx];
              if (gker) gker[ky * g.kw + kx] += gv * plane[iy * g.w + ix];
            }
          }
        }
      }
    }
  }
}

bool is_depthwise(const ConvGeom& g) {
  return g.groups == g.cin && g.cout == g.cin && g.cin_g == 1;
}

// Gathers out-layout [B, Cout, S] group channels into a [Cout_g, B*S] buffer.
void gather_group(const double* src, const ConvGeom& g, int64_t group, int64_t spatial,
                  std::vector<double>& buf) {
  buf.resize(static_cast<std::size_t>(g.cout_g * g.batch * spatial));
  for (int64_t c = 0; c < g.cout_g; ++c) {
    for (int64_t b = 0; b < g.batch; ++b) {
      const double* s = src + (b * g.cout + group * g.cout_g + c) * spatial;
      std::copy(s, s + spatial, buf.data() + (c * g.batch + b) * spatial);
    }
  }
}

void scatter_group(const std::vector<double>& buf, const ConvGeom& g, int64_t group,
                   int64_t spatial, double* dst) {
  for (int64_t c = 0; c < g.cout_g; ++c) {
    for (int64_t b = 0; b < g.batch; ++b) {
      const double* s = buf.data() + (c * g.batch + b) * spatial;
      std::copy(s, s + spatial, dst + (b * g.cout + group * g.cout_g + c) * spatial);
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int padding, int groups) {
  const ConvGeom g = make_geom(x, w, stride, padding, groups);
  if (bias.defined() && bias.size() != g.cout) {
    throw ShapeError("conv2d bias must have one entry per output channel");
  }

  const int64_t spatial = g.oh * g.ow;
  std::vector<double> out(static_cast<std::size_t>(g.batch * g.cout * spatial));
  const double* xd = x.data();
  const double* wd = w.data();

  if (is_pointwise(g)) {
    for (int64_t b = 0; b < g.batch; ++b) {
      gemm(false, false, g.cout, spatial, g.cin, wd, xd + b * g.cin * g.h * g.w,
           out.data() + b * g.cout * spatial, false);
    }
  } else if (is_depthwise3(g)) {
    depthwise3_forward(xd, wd, g, out.data());
  } else if (is_depthwise(g)) {
    depthwise_generic_forward(xd, wd, g, out.data());
  } else {
    const int64_t kk = g.cin_g * g.kh * g.kw;
    for (int64_t grp = 0; grp < g.groups; ++grp) {
      im2col_group(xd, g, grp, t_col);
      t_buf.resize(static_cast<std::size_t>(g.cout_g * g.batch * spatial));
      gemm(false, false, g.cout_g, g.batch * spatial, kk, wd + grp * g.cout_g * kk,
           t_col.data(), t_buf.data(), false);
      scatter_group(t_buf, g, grp, spatial, out.data());
    }
  }

  if (bias.defined()) {
    const double* bd = bias.data();
    for (int64_t b = 0; b < g.batch; ++b) {
      for (int64_t c = 0; c < g.cout; ++c) {
        double* dst = out.data() + (b * g.cout + c) * spatial;
        const double bv = bd[c];
        for (int64_t i = 0; i < spatial; ++i) dst[i] += bv;
      }
    }
  }

  auto x_impl = x.impl_ptr();
  auto w_impl = w.impl_ptr();
  auto b_impl = bias.defined() ? bias.impl_ptr() : nullptr;
  std::vector<Tensor> inputs = bias.defined() ? std::vector<Tensor>{x, w, bias}
                                              : std::vector<Tensor>{x, w};

  BackwardFn fn = [x_impl, w_impl, b_impl, g, spatial](const double* gout,
                                                       const GradSlot& slot) {
    double* gx = slot(x_impl.get());
    double* gw = slot(w_impl.get());
    double* gb = b_impl ? slot(b_impl.get()) : nullptr;
    const double* xd = x_impl->data.data();
    const double* wd = w_impl->data.data();

    if (gb) {
      for (int64_t b = 0; b < g.batch; ++b) {
        for (int64_t c = 0; c < g.cout; ++c) {
          const double* src = gout + (b * g.cout + c) * spatial;
          double acc = 0.0;
          for (int64_t i = 0; i < spatial; ++i) acc += src[i];
          gb[c] += acc;
        }
      }
    }
    if (!gx && !gw) return;

    if (is_pointwise(g)) {
      for (int64_t b = 0; b < g.batch; ++b) {
        const double* go = gout + b * g.cout * spatial;
        if (gx) {
          gemm(true, false, g.cin, spatial, g.cout, wd, go, gx + b * g.cin * spatial, true);
        }
        if (gw) {
          gemm(false, true, g.cout, g.cin, spatial, go, xd + b * g.cin * spatial, gw, true);
        }
      }
      return;
    }
    if (is_depthwise3(g)) {
      depthwise3_backward(xd, wd, gout, g, gx, gw);
      return;
    }
    if (is_depthwise(g)) {
      depthwise_generic_backward(xd, wd, gout, g, gx, gw);
      return;
    }
    const int64_t kk = g.cin_g * g.kh * g.kw;
    std::vector<double> gbuf;
    std::vector<double> gcol;
    for (int64_t grp = 0; grp < g.groups; ++grp) {
      gather_group(gout, g, grp, spatial, gbuf);
      if (gw) {
        im2col_group(xd, g, grp, t_col);
        // dW_g = dOut_g * col^T
        gemm(false, true, g.cout_g, kk, g.batch * spatial, gbuf.data(), t_col.data(),
             gw + grp * g.cout_g * kk, true);
      }
      if (gx) {
        gcol.assign(static_cast<std::size_t>(kk * g.batch * spatial), 0.0);
        // dCol = W_g^T * dOut_g
        gemm(true, false, kk, g.batch * spatial, g.cout_g, wd + grp * g.cout_g * kk,
             gbuf.data(), gcol.data(), false);
        col2im_group_add(gcol.data(), g, grp, gx);
      }
    }
  };
  return make_op_output({g.batch, g.cout, g.oh, g.ow}, std::move(out), inputs, std::move(fn));
}

}  // namespace wavedef
