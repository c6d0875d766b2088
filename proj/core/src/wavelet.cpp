#include "wavedef/wavelet.hpp"

#include "wavedef/ops.hpp"

namespace wavedef {

namespace {

void require_even_image(const Tensor& x) {
  if (x.rank() != 4) {
    throw ShapeError("dwt2 expects [B,C,H,W], got " + shape_to_string(x.shape()));
  }
  if (x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0) {
    throw GeometryError("dwt2 requires even spatial extents (reflect-pad first), got " +
                        shape_to_string(x.shape()));
  }
}

}  // namespace

WaveletPyramid dwt2(const Tensor& x) {
  require_even_image(x);
  Tensor a = pick2x2(x, 0, 0);
  Tensor b = pick2x2(x, 0, 1);
  Tensor c = pick2x2(x, 1, 0);
  Tensor d = pick2x2(x, 1, 1);

  WaveletPyramid p;
  p.ll = mul_scalar(a + b + c + d, 0.5);
  p.lh = mul_scalar(a - b + c - d, 0.5);
  p.hl = mul_scalar((a + b) - (c + d), 0.5);
  p.hh = mul_scalar((a - b) - (c - d), 0.5);
  p.source_shape = {x.dim(2), x.dim(3)};
  return p;
}

WaveletPyramid dwt2_reflect(const Tensor& x) {
  if (x.rank() != 4) {
    throw ShapeError("dwt2_reflect expects [B,C,H,W], got " + shape_to_string(x.shape()));
  }
  const int64_t h = x.dim(2);
  const int64_t w = x.dim(3);
  const int pad_h = static_cast<int>(h % 2);
  const int pad_w = static_cast<int>(w % 2);
  Tensor padded = (pad_h || pad_w) ? pad2d(x, 0, pad_h, 0, pad_w, PadMode::Reflect) : x;
  WaveletPyramid p = dwt2(padded);
  p.source_shape = {h, w};
  return p;
}

Tensor idwt2(const WaveletPyramid& p) {
  if (!p.ll.defined() || !p.lh.defined() || !p.hl.defined() || !p.hh.defined()) {
    throw ValueError("idwt2 on an incomplete pyramid");
  }
  if (p.ll.shape() != p.lh.shape() || p.ll.shape() != p.hl.shape() ||
      p.ll.shape() != p.hh.shape()) {
    throw ShapeError("idwt2 subband shapes disagree");
  }
  Tensor a = mul_scalar(p.ll + p.lh + p.hl + p.hh, 0.5);
  Tensor b = mul_scalar((p.ll - p.lh) + (p.hl - p.hh), 0.5);
  Tensor c = mul_scalar((p.ll + p.lh) - (p.hl + p.hh), 0.5);
  Tensor d = mul_scalar((p.ll - p.lh) - (p.hl - p.hh), 0.5);
  Tensor full = interleave2x2(a, b, c, d);

  const auto [src_h, src_w] = p.source_shape;
  if (src_h > 0 && (src_h != full.dim(2) || src_w != full.dim(3))) {
    if (src_h > full.dim(2) || src_w > full.dim(3)) {
      throw ShapeError("idwt2 source_shape larger than the reconstruction");
    }
    full = slice(slice(full, 2, 0, src_h), 3, 0, src_w);
  }
  return full;
}

SubbandEnergyProfile subband_energy_profile(const Tensor& clean, const Tensor& attacked) {
  if (clean.shape() != attacked.shape()) {
    throw ShapeError("subband_energy_profile shape mismatch: " +
                     shape_to_string(clean.shape()) + " vs " +
                     shape_to_string(attacked.shape()));
  }
  Tensor delta = attacked - clean;
  WaveletPyramid p = dwt2_reflect(delta);

  auto energy = [](const Tensor& t) {
    double acc = 0.0;
    const double* d = t.data();
    for (int64_t i = 0; i < t.size(); ++i) acc += d[i] * d[i];
    return acc;
  };
  const double ell = energy(p.ll);
  const double elh = energy(p.lh);
  const double ehl = energy(p.hl);
  const double ehh = energy(p.hh);
  const double total = ell + elh + ehl + ehh;

  SubbandEnergyProfile profile;
  if (total == 0.0) {
    profile.zero_energy = true;
    return profile;
  }
  profile.ll_fraction = ell / total;
  profile.lh_fraction = elh / total;
  profile.hl_fraction = ehl / total;
  profile.hh_fraction = ehh / total;
  return profile;
}

}  // namespace wavedef
