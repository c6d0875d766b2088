#pragma once

#include <cstdint>
#include <vector>

#include "wavedef/nn.hpp"
#include "wavedef/tensor.hpp"

namespace wavedef {

struct DenoiserConfig {
  int embed_dim = 48;
  int heads = 4;
  int scales = 3;  // 2 or 3
  int blocks_per_stage = 1;
  int gdfn_expansion = 2;
  int image_channels = 1;

  void validate() const;
};

struct ScaleFeatures {
  Tensor spatial;   // F_s
  Tensor frequency; // F_s^dwt
  Tensor ll;        // low-pass image feeding the next scale
};

/// Three-scale spatial-frequency denoiser: per scale, a transformer stage on
/// the image and one on the upsampled sum of detail subbands, fused by
/// cross-attention; coarse-to-fine cross-scale fusion; residual output
/// projection clamped to [0,1].
struct Denoiser {
  DenoiserConfig config;

  std::vector<Conv2dParams> embed_spatial;  // [scales], image -> C
  std::vector<Conv2dParams> embed_dwt;      // [scales], detail image -> C
  std::vector<std::vector<TransformerBlockParams>> t1_spatial;  // [scales][blocks]
  std::vector<std::vector<TransformerBlockParams>> t1_dwt;      // [scales][blocks]
  std::vector<CrossAttentionParams> ca_within;                  // [scales]
  std::vector<std::vector<TransformerBlockParams>> t2;          // [scales][blocks]
  std::vector<CrossAttentionParams> ca_across;                  // [scales-1]
  Conv2dParams output_projection;  // C -> image channels, zero-init

  static Denoiser init(const DenoiserConfig& config, uint64_t seed);

  ScaleFeatures extract_scale_features(const Tensor& x_scale, int scale) const;
  Tensor forward(const Tensor& x) const;

  void visit(const ParamVisitor& fn);
  std::vector<Tensor> parameters();
  int64_t param_count();
};

inline Tensor denoise(const Tensor& x, const Denoiser& model) { return model.forward(x); }

}  // namespace wavedef
