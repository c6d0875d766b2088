#include "wavedef/nn.hpp"

#include <cmath>

#include "wavedef/ops.hpp"

namespace wavedef {

namespace {

Tensor fan_in_uniform(const Shape& shape, int64_t fan_in, std::mt19937_64& rng) {
  // He-style uniform bound; the gain keeps activation scale flat through
  // GELU stacks (gelu(x) ~ x/2 near zero).
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  return Tensor::uniform(shape, -bound, bound, rng, /*requires_grad=*/true);
}

// [B,C,H,W] -> [B, heads, C/heads, H*W]
Tensor to_heads(const Tensor& x, int heads) {
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  return reshape(x, {b, heads, c / heads, h * w});
}

Tensor from_heads(const Tensor& x, int64_t h, int64_t w) {
  const int64_t b = x.dim(0);
  return reshape(x, {b, x.dim(1) * x.dim(2), h, w});
}

void require_heads_divide(int64_t channels, int heads, const char* what) {
  if (heads < 1 || channels % heads != 0) {
    throw ShapeError(std::string(what) + ": heads (" + std::to_string(heads) +
                     ") must divide the channel count (" + std::to_string(channels) + ")");
  }
}

}  // namespace

// ---- Conv2dParams ----

Conv2dParams Conv2dParams::make(int out_channels, int in_channels, int kernel, int stride,
                                int padding, int groups, std::mt19937_64& rng) {
  Conv2dParams p;
  const int64_t fan_in = static_cast<int64_t>(in_channels / groups) * kernel * kernel;
  p.w = fan_in_uniform({out_channels, in_channels / groups, kernel, kernel}, fan_in, rng);
  p.b = Tensor::zeros({out_channels}, /*requires_grad=*/true);
  p.stride = stride;
  p.padding = padding;
  p.groups = groups;
  return p;
}

Conv2dParams Conv2dParams::make_zero(int out_channels, int in_channels, int kernel,
                                     int stride, int padding, int groups) {
  Conv2dParams p;
  p.w = Tensor::zeros({out_channels, in_channels / groups, kernel, kernel},
                      /*requires_grad=*/true);
  p.b = Tensor::zeros({out_channels}, /*requires_grad=*/true);
  p.stride = stride;
  p.padding = padding;
  p.groups = groups;
  return p;
}

Tensor Conv2dParams::forward(const Tensor& x) const {
  return conv2d(x, w, b, stride, padding, groups);
}

void Conv2dParams::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".w", w);
  fn(prefix + ".b", b);
}

// ---- LayerNormParams ----

LayerNormParams LayerNormParams::make(int channels) {
  LayerNormParams p;
  p.gamma = Tensor::full({channels}, 1.0, /*requires_grad=*/true);
  p.beta = Tensor::zeros({channels}, /*requires_grad=*/true);
  return p;
}

Tensor LayerNormParams::forward(const Tensor& x, double eps) const {
  return layer_norm(x, 1, gamma, beta, eps);
}

void LayerNormParams::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".gamma", gamma);
  fn(prefix + ".beta", beta);
}

// ---- MDTA ----

MdtaParams MdtaParams::make(int channels, int heads, std::mt19937_64& rng) {
  require_heads_divide(channels, heads, "mdta");
  MdtaParams p;
  p.qkv_pointwise = Conv2dParams::make(3 * channels, channels, 1, 1, 0, 1, rng);
  p.qkv_depthwise = Conv2dParams::make(3 * channels, 3 * channels, 3, 1, 1, 3 * channels, rng);
  p.out_pointwise = Conv2dParams::make(channels, channels, 1, 1, 0, 1, rng);
  p.temperature = Tensor::full({heads}, 1.0, /*requires_grad=*/true);
  p.heads = heads;
  return p;
}

void MdtaParams::visit(const std::string& prefix, const ParamVisitor& fn) {
  qkv_pointwise.visit(prefix + ".qkv_pw", fn);
  qkv_depthwise.visit(prefix + ".qkv_dw", fn);
  out_pointwise.visit(prefix + ".out_pw", fn);
  fn(prefix + ".temperature", temperature);
}

Tensor mdta(const Tensor& x, const MdtaParams& params) {
  const int64_t c = x.dim(1);
  require_heads_divide(c, params.heads, "mdta");
  const int64_t h = x.dim(2), w = x.dim(3);

  Tensor qkv = params.qkv_depthwise.forward(params.qkv_pointwise.forward(x));
  Tensor q = to_heads(slice(qkv, 1, 0, c), params.heads);
  Tensor k = to_heads(slice(qkv, 1, c, c), params.heads);
  Tensor v = to_heads(slice(qkv, 1, 2 * c, c), params.heads);

  q = l2_normalize(q, 3);
  k = l2_normalize(k, 3);

  // [B,heads,c/h,c/h]: attention over channels, independent of H*W.
  Tensor logits = matmul(q, transpose(k, 2, 3));
  Tensor temp = reshape(params.temperature, {params.heads, 1, 1});
  Tensor attn = softmax(logits * temp, 3);

  Tensor out = from_heads(matmul(attn, v), h, w);
  return params.out_pointwise.forward(out);
}

// ---- GDFN ----

GdfnParams GdfnParams::make(int channels, int expansion, std::mt19937_64& rng) {
  if (expansion < 1) throw ValueError("gdfn expansion must be >= 1");
  GdfnParams p;
  const int hidden = expansion * channels;
  p.expand_pointwise = Conv2dParams::make(2 * hidden, channels, 1, 1, 0, 1, rng);
  p.expand_depthwise = Conv2dParams::make(2 * hidden, 2 * hidden, 3, 1, 1, 2 * hidden, rng);
  p.project_pointwise = Conv2dParams::make(channels, hidden, 1, 1, 0, 1, rng);
  p.expansion = expansion;
  return p;
}

void GdfnParams::visit(const std::string& prefix, const ParamVisitor& fn) {
  expand_pointwise.visit(prefix + ".expand_pw", fn);
  expand_depthwise.visit(prefix + ".expand_dw", fn);
  project_pointwise.visit(prefix + ".project_pw", fn);
}

Tensor gdfn(const Tensor& x, const GdfnParams& params) {
  const int64_t hidden = params.expansion * x.dim(1);
  Tensor expanded = params.expand_depthwise.forward(params.expand_pointwise.forward(x));
  Tensor gate = slice(expanded, 1, 0, hidden);
  Tensor value = slice(expanded, 1, hidden, hidden);
  return params.project_pointwise.forward(gelu(gate) * value);
}

// ---- Transformer block ----

TransformerBlockParams TransformerBlockParams::make(int channels, int heads, int expansion,
                                                    std::mt19937_64& rng) {
  TransformerBlockParams p;
  p.norm1 = LayerNormParams::make(channels);
  p.norm2 = LayerNormParams::make(channels);
  p.mdta = MdtaParams::make(channels, heads, rng);
  p.gdfn = GdfnParams::make(channels, expansion, rng);
  return p;
}

void TransformerBlockParams::visit(const std::string& prefix, const ParamVisitor& fn) {
  norm1.visit(prefix + ".norm1", fn);
  norm2.visit(prefix + ".norm2", fn);
  mdta.visit(prefix + ".mdta", fn);
  gdfn.visit(prefix + ".gdfn", fn);
}

Tensor transformer_block(const Tensor& x, const TransformerBlockParams& params) {
  Tensor y = x + mdta(params.norm1.forward(x), params.mdta);
  return y + gdfn(params.norm2.forward(y), params.gdfn);
}

// ---- Cross-attention ----

CrossAttentionParams CrossAttentionParams::make(int channels, int heads,
                                                std::mt19937_64& rng) {
  require_heads_divide(channels, heads, "cross_attention");
  CrossAttentionParams p;
  p.q_pointwise = Conv2dParams::make(channels, channels, 1, 1, 0, 1, rng);
  p.q_depthwise = Conv2dParams::make(channels, channels, 3, 1, 1, channels, rng);
  p.kv_pointwise = Conv2dParams::make(2 * channels, channels, 1, 1, 0, 1, rng);
  p.kv_depthwise = Conv2dParams::make(2 * channels, 2 * channels, 3, 1, 1, 2 * channels, rng);
  p.out_pointwise = Conv2dParams::make(channels, channels, 1, 1, 0, 1, rng);
  p.heads = heads;
  return p;
}

void CrossAttentionParams::visit(const std::string& prefix, const ParamVisitor& fn) {
  q_pointwise.visit(prefix + ".q_pw", fn);
  q_depthwise.visit(prefix + ".q_dw", fn);
  kv_pointwise.visit(prefix + ".kv_pw", fn);
  kv_depthwise.visit(prefix + ".kv_dw", fn);
  out_pointwise.visit(prefix + ".out_pw", fn);
}

Tensor cross_attention(const Tensor& a, const Tensor& b, const CrossAttentionParams& params) {
  if (a.shape() != b.shape()) {
    throw ShapeError("cross_attention operands must share a shape (resample first): " +
                     shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  }
  const int64_t c = a.dim(1);
  require_heads_divide(c, params.heads, "cross_attention");
  const int64_t h = a.dim(2), w = a.dim(3);

  Tensor q = to_heads(params.q_depthwise.forward(params.q_pointwise.forward(a)), params.heads);
  Tensor kv = params.kv_depthwise.forward(params.kv_pointwise.forward(b));
  Tensor k = to_heads(slice(kv, 1, 0, c), params.heads);
  Tensor v = to_heads(slice(kv, 1, c, c), params.heads);

  Tensor attn = softmax(matmul(q, transpose(k, 2, 3)), 3);
  Tensor fused = from_heads(matmul(attn, v), h, w);
  return params.out_pointwise.forward(fused);
}

}  // namespace wavedef
