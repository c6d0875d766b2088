#include "wavedef/denoiser.hpp"

#include <string>

#include "wavedef/ops.hpp"
#include "wavedef/wavelet.hpp"

namespace wavedef {

void DenoiserConfig::validate() const {
  if (embed_dim < 1) throw ValueError("embed_dim must be positive");
  if (heads < 1 || embed_dim % heads != 0) {
    throw ShapeError("heads (" + std::to_string(heads) + ") must divide embed_dim (" +
                     std::to_string(embed_dim) + ")");
  }
  if (scales != 2 && scales != 3) throw ValueError("scales must be 2 or 3");
  if (blocks_per_stage < 1) throw ValueError("blocks_per_stage must be >= 1");
  if (gdfn_expansion < 1) throw ValueError("gdfn_expansion must be >= 1");
  if (image_channels < 1) throw ValueError("image_channels must be positive");
}

namespace {

std::vector<TransformerBlockParams> make_stage(const DenoiserConfig& cfg,
                                               std::mt19937_64& rng) {
  std::vector<TransformerBlockParams> stage;
  stage.reserve(static_cast<std::size_t>(cfg.blocks_per_stage));
  for (int i = 0; i < cfg.blocks_per_stage; ++i) {
    stage.push_back(
        TransformerBlockParams::make(cfg.embed_dim, cfg.heads, cfg.gdfn_expansion, rng));
  }
  return stage;
}

Tensor run_stage(const Tensor& x, const std::vector<TransformerBlockParams>& stage) {
  Tensor y = x;
  for (const auto& block : stage) y = transformer_block(y, block);
  return y;
}

void guard_finite(const Tensor& t, const std::string& stage) {
  if (!all_finite(t)) {
    throw NumericError("non-finite activation after stage '" + stage + "'");
  }
}

}  // namespace

Denoiser Denoiser::init(const DenoiserConfig& config, uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  Denoiser d;
  d.config = config;
  for (int s = 0; s < config.scales; ++s) {
    d.embed_spatial.push_back(
        Conv2dParams::make(config.embed_dim, config.image_channels, 3, 1, 1, 1, rng));
    d.embed_dwt.push_back(
        Conv2dParams::make(config.embed_dim, config.image_channels, 3, 1, 1, 1, rng));
    d.t1_spatial.push_back(make_stage(config, rng));
    d.t1_dwt.push_back(make_stage(config, rng));
    d.ca_within.push_back(CrossAttentionParams::make(config.embed_dim, config.heads, rng));
    d.t2.push_back(make_stage(config, rng));
  }
  for (int s = 0; s + 1 < config.scales; ++s) {
    d.ca_across.push_back(CrossAttentionParams::make(config.embed_dim, config.heads, rng));
  }
  // Zero output projection makes the initial network the identity map.
  d.output_projection =
      Conv2dParams::make_zero(config.image_channels, config.embed_dim, 3, 1, 1, 1);
  return d;
}

ScaleFeatures Denoiser::extract_scale_features(const Tensor& x_scale, int scale) const {
  if (scale < 0 || scale >= config.scales) throw ValueError("scale index out of range");
  if (x_scale.dim(2) % 2 != 0 || x_scale.dim(3) % 2 != 0) {
    throw GeometryError("scale input must have even extents, got " +
                        shape_to_string(x_scale.shape()));
  }
  WaveletPyramid p = dwt2(x_scale);
  Tensor detail = p.lh + p.hl + p.hh;
  Tensor detail_up = upsample2x(detail, UpsampleMode::Nearest);

  ScaleFeatures f;
  f.spatial = run_stage(embed_spatial[scale].forward(x_scale), t1_spatial[scale]);
  f.frequency = run_stage(embed_dwt[scale].forward(detail_up), t1_dwt[scale]);
  f.ll = p.ll;
  return f;
}

Tensor Denoiser::forward(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(1) != config.image_channels) {
    throw ShapeError("denoiser input must be [B," + std::to_string(config.image_channels) +
                     ",H,W], got " + shape_to_string(x.shape()));
  }
  const int64_t divisor = int64_t{1} << config.scales;
  if (x.dim(2) % divisor != 0 || x.dim(3) % divisor != 0) {
    throw GeometryError("denoiser input extents must be divisible by " +
                        std::to_string(divisor) + " for " + std::to_string(config.scales) +
                        " scales, got " + shape_to_string(x.shape()));
  }

  // First transformer stage at every scale, chaining the low-pass outputs.
  std::vector<ScaleFeatures> feats;
  Tensor current = x;
  for (int s = 0; s < config.scales; ++s) {
    feats.push_back(extract_scale_features(current, s));
    guard_finite(feats.back().spatial, "t1_spatial[" + std::to_string(s) + "]");
    guard_finite(feats.back().frequency, "t1_dwt[" + std::to_string(s) + "]");
    current = feats.back().ll;
  }

  // Within-scale fusion, then the second transformer stage.
  std::vector<Tensor> combined(static_cast<std::size_t>(config.scales));
  for (int s = 0; s < config.scales; ++s) {
    Tensor fused = cross_attention(feats[s].spatial, feats[s].frequency, ca_within[s]);
    combined[s] = run_stage(fused, t2[s]);
    guard_finite(combined[s], "t2[" + std::to_string(s) + "]");
  }

  // Coarse-to-fine cross-scale fusion on the finer grid.
  Tensor merged = combined[static_cast<std::size_t>(config.scales) - 1];
  for (int s = config.scales - 2; s >= 0; --s) {
    Tensor up = upsample2x(merged, UpsampleMode::Nearest);
    merged = cross_attention(combined[s], up, ca_across[s]);
    guard_finite(merged, "ca_across[" + std::to_string(s) + "]");
  }

  Tensor out = clamp(x + output_projection.forward(merged), 0.0, 1.0);
  guard_finite(out, "output_projection");
  return out;
}

void Denoiser::visit(const ParamVisitor& fn) {
  for (int s = 0; s < config.scales; ++s) {
    const std::string tag = std::to_string(s);
    embed_spatial[s].visit("embed_spatial." + tag, fn);
    embed_dwt[s].visit("embed_dwt." + tag, fn);
    for (std::size_t i = 0; i < t1_spatial[s].size(); ++i) {
      t1_spatial[s][i].visit("t1_spatial." + tag + "." + std::to_string(i), fn);
    }
    for (std::size_t i = 0; i < t1_dwt[s].size(); ++i) {
      t1_dwt[s][i].visit("t1_dwt." + tag + "." + std::to_string(i), fn);
    }
    ca_within[s].visit("ca_within." + tag, fn);
    for (std::size_t i = 0; i < t2[s].size(); ++i) {
      t2[s][i].visit("t2." + tag + "." + std::to_string(i), fn);
    }
  }
  for (std::size_t s = 0; s < ca_across.size(); ++s) {
    ca_across[s].visit("ca_across." + std::to_string(s), fn);
  }
  output_projection.visit("output_projection", fn);
}

std::vector<Tensor> Denoiser::parameters() {
  std::vector<Tensor> out;
  visit([&](const std::string&, Tensor& t) { out.push_back(t); });
  return out;
}

int64_t Denoiser::param_count() {
  int64_t n = 0;
  visit([&](const std::string&, Tensor& t) { n += t.size(); });
  return n;
}

}  // namespace wavedef
