#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "wavedef/tensor.hpp"

namespace wavedef {

/// Visits every learnable tensor with a stable dotted name; the visit order
/// defines checkpoint and optimizer ordering.
using ParamVisitor = std::function<void(const std::string& name, Tensor& value)>;

struct Conv2dParams {
  Tensor w;  // [Cout, Cin/g, kh, kw]
  Tensor b;  // [Cout]
  int stride = 1;
  int padding = 0;
  int groups = 1;

  static Conv2dParams make(int out_channels, int in_channels, int kernel, int stride,
                           int padding, int groups, std::mt19937_64& rng);
  static Conv2dParams make_zero(int out_channels, int in_channels, int kernel, int stride,
                                int padding, int groups);
  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

struct LayerNormParams {
  Tensor gamma;  // [C], init 1
  Tensor beta;   // [C], init 0

  static LayerNormParams make(int channels);
  /// Channel-axis normalization of [B,C,H,W] features.
  Tensor forward(const Tensor& x, double eps = 1e-6) const;
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

/// Transposed-channel attention: self-attention across the feature dimension
/// with depthwise-refined q/k/v, L2-normalized queries/keys and a learnable
/// per-head temperature. Cost is linear in H*W.
struct MdtaParams {
  Conv2dParams qkv_pointwise;  // C -> 3C, 1x1
  Conv2dParams qkv_depthwise;  // 3x3 depthwise over 3C
  Conv2dParams out_pointwise;  // C -> C, 1x1
  Tensor temperature;          // [heads], init 1
  int heads = 1;

  static MdtaParams make(int channels, int heads, std::mt19937_64& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

/// Gated feed-forward: two expanded conv branches, one GELU-activated,
/// combined by element-wise product.
struct GdfnParams {
  Conv2dParams expand_pointwise;   // C -> 2*r*C, 1x1
  Conv2dParams expand_depthwise;   // 3x3 depthwise over 2*r*C
  Conv2dParams project_pointwise;  // r*C -> C, 1x1
  int expansion = 2;

  static GdfnParams make(int channels, int expansion, std::mt19937_64& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

struct TransformerBlockParams {
  LayerNormParams norm1;
  LayerNormParams norm2;
  MdtaParams mdta;
  GdfnParams gdfn;

  static TransformerBlockParams make(int channels, int heads, int expansion,
                                     std::mt19937_64& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

/// Queries from `a`, keys/values from `b`; fixed temperature 1 and no q/k
/// normalization (the attention logits are used exactly as computed).
struct CrossAttentionParams {
  Conv2dParams q_pointwise;   // C -> C, 1x1
  Conv2dParams q_depthwise;   // 3x3 depthwise over C
  Conv2dParams kv_pointwise;  // C -> 2C, 1x1
  Conv2dParams kv_depthwise;  // 3x3 depthwise over 2C
  Conv2dParams out_pointwise; // C -> C, 1x1
  int heads = 1;

  static CrossAttentionParams make(int channels, int heads, std::mt19937_64& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

Tensor mdta(const Tensor& x, const MdtaParams& params);
Tensor gdfn(const Tensor& x, const GdfnParams& params);

/// Pre-norm residual wiring: y = x + mdta(norm1(x)); out = y + gdfn(norm2(y)).
Tensor transformer_block(const Tensor& x, const TransformerBlockParams& params);

Tensor cross_attention(const Tensor& a, const Tensor& b, const CrossAttentionParams& params);

}  // namespace wavedef
