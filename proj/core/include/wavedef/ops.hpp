#pragma once

#include <vector>

#include "wavedef/tensor.hpp"

namespace wavedef {

// ---- elementwise arithmetic (trailing-dimension broadcasting) ----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);

Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator+(const Tensor& a, double s);
Tensor operator+(double s, const Tensor& a);
Tensor operator-(const Tensor& a, double s);
Tensor operator*(const Tensor& a, double s);
Tensor operator*(double s, const Tensor& a);

Shape broadcast_shape(const Shape& a, const Shape& b);

// ---- reductions ----

Tensor reduce_sum(const Tensor& x, int axis, bool keepdims);
Tensor reduce_mean(const Tensor& x, int axis, bool keepdims);
Tensor sum(const Tensor& x);   // all elements -> rank-0 scalar
Tensor mean(const Tensor& x);  // all elements -> rank-0 scalar

// ---- pointwise functions ----

Tensor gelu(const Tensor& x);  // exact Gaussian-CDF form
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

// ---- normalization / attention helpers ----

Tensor softmax(const Tensor& x, int axis);
Tensor layer_norm(const Tensor& x, int axis, const Tensor& gamma,
                  const Tensor& beta, double eps);
Tensor l2_normalize(const Tensor& x, int axis, double eps = 1e-12);

// ---- linear algebra ----

/// [batch..., m, k] x [batch..., k, n] -> [batch..., m, n]. Batch dims must
/// match exactly, or the right operand may be rank-2 (shared weights).
Tensor matmul(const Tensor& a, const Tensor& b);

/// Cross-correlation (no kernel flip), zero padding, square stride/padding.
/// x: [B, C_in, H, W], w: [C_out, C_in/groups, kh, kw], bias: [C_out] or
/// undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
              int stride, int padding, int groups);

// ---- structural ops ----

Tensor reshape(const Tensor& x, Shape new_shape);
Tensor permute(const Tensor& x, const std::vector<int>& axes);
Tensor transpose(const Tensor& x, int axis_a, int axis_b);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, int64_t start, int64_t length);

enum class PadMode { Zero, Reflect };
Tensor pad2d(const Tensor& x, int top, int bottom, int left, int right,
             PadMode mode = PadMode::Zero);

enum class UpsampleMode { Nearest, Bilinear };
Tensor upsample2x(const Tensor& x, UpsampleMode mode = UpsampleMode::Nearest);
Tensor avgpool2x(const Tensor& x);

/// out[b,c,i,j] = x[b,c,2i+dy,2j+dx]; the four (dy,dx) picks tile the image.
Tensor pick2x2(const Tensor& x, int dy, int dx);
/// Inverse of the four picks: interleaves a,b,c,d back into 2H x 2W.
Tensor interleave2x2(const Tensor& a, const Tensor& b, const Tensor& c,
                     const Tensor& d);

// ---- classification loss kernel ----

/// Mean negative log-likelihood with a fused, max-shifted log-softmax.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// ---- non-differentiable utilities ----

bool all_finite(const Tensor& x);
double max_abs_diff(const Tensor& a, const Tensor& b);
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace wavedef
