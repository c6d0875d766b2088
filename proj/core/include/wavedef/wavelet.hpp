#pragma once

#include <cstdint>
#include <utility>

#include "wavedef/tensor.hpp"

namespace wavedef {

/// One level of 2D orthonormal Haar analysis: four subbands at half the
/// spatial resolution. source_shape records the pre-padding extents so
/// idwt2 can crop reflect-padded inputs back.
struct WaveletPyramid {
  Tensor ll, lh, hl, hh;
  std::string basis = "haar-ortho";
  std::pair<int64_t, int64_t> source_shape{0, 0};
};

/// Analysis over non-overlapping 2x2 blocks [[a,b],[c,d]] per channel:
///   ll=(a+b+c+d)/2  lh=(a-b+c-d)/2  hl=(a+b-c-d)/2  hh=(a-b-c+d)/2
/// Requires even H and W; linear, hence differentiable.
WaveletPyramid dwt2(const Tensor& x);

/// dwt2 after reflect-padding odd extents up to even; idwt2 crops back.
WaveletPyramid dwt2_reflect(const Tensor& x);

/// Exact inverse of dwt2 (transpose of the orthonormal analysis).
Tensor idwt2(const WaveletPyramid& p);

struct SubbandEnergyProfile {
  double ll_fraction = 0.0;
  double lh_fraction = 0.0;
  double hl_fraction = 0.0;
  double hh_fraction = 0.0;
  bool zero_energy = false;

  double detail_fraction() const { return lh_fraction + hl_fraction + hh_fraction; }
};

/// Shares of the perturbation energy (attacked - clean) landing in each
/// subband of a single-level decomposition. Fractions sum to 1 unless the
/// perturbation is identically zero.
SubbandEnergyProfile subband_energy_profile(const Tensor& clean, const Tensor& attacked);

}  // namespace wavedef
