#pragma once

#include <cstdint>
#include <vector>

#include "wavedef/tensor.hpp"

namespace wavedef {
namespace detail {

// Strides for walking an input tensor while iterating over `out` (trailing
// alignment; broadcast dims contribute stride 0).
inline std::vector<int64_t> broadcast_strides(const Shape& in, const Shape& out) {
  auto in_strides = row_major_strides(in);
  std::vector<int64_t> eff(out.size(), 0);
  const int offset = static_cast<int>(out.size()) - static_cast<int>(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == out[offset + i]) {
      eff[offset + i] = in_strides[i];
    } else {
      eff[offset + i] = 0;  // broadcast dim (extent 1)
    }
  }
  return eff;
}

// Walk over `out` with the last axis hoisted into a tight inner loop;
// f(out_flat, off_a, off_b).
template <class F>
inline void for_each_binary(const Shape& out, const std::vector<int64_t>& sa,
                            const std::vector<int64_t>& sb, F&& f) {
  const int rank = static_cast<int>(out.size());
  if (rank == 0) {
    f(int64_t{0}, int64_t{0}, int64_t{0});
    return;
  }
  const int64_t inner = out[rank - 1];
  const int64_t sa_in = sa[rank - 1];
  const int64_t sb_in = sb[rank - 1];
  const int lead = rank - 1;
  int64_t blocks = 1;
  for (int i = 0; i < lead; ++i) blocks *= out[i];

  std::vector<int64_t> idx(static_cast<std::size_t>(lead == 0 ? 1 : lead), 0);
  int64_t offa = 0, offb = 0;
  int64_t flat = 0;
  for (int64_t blk = 0; blk < blocks; ++blk) {
    if (sa_in == 1 && sb_in == 1) {
      for (int64_t j = 0; j < inner; ++j) f(flat + j, offa + j, offb + j);
    } else if (sa_in == 1 && sb_in == 0) {
      for (int64_t j = 0; j < inner; ++j) f(flat + j, offa + j, offb);
    } else if (sa_in == 0 && sb_in == 1) {
      for (int64_t j = 0; j < inner; ++j) f(flat + j, offa, offb + j);
    } else {
      for (int64_t j = 0; j < inner; ++j) f(flat + j, offa + j * sa_in, offb + j * sb_in);
    }
    flat += inner;
    for (int ax = lead - 1; ax >= 0; --ax) {
      ++idx[ax];
      offa += sa[ax];
      offb += sb[ax];
      if (idx[ax] < out[ax]) break;
      offa -= sa[ax] * out[ax];
      offb -= sb[ax] * out[ax];
      idx[ax] = 0;
    }
  }
}

// Odometer walk over `shape` mapping each element to an offset through
// `strides` (same length as shape, entries may be 0); f(flat, off).
template <class F>
inline void for_each_mapped(const Shape& shape, const std::vector<int64_t>& strides, F&& f) {
  const int rank = static_cast<int>(shape.size());
  const int64_t n = shape_numel(shape);
  if (rank == 0) {
    f(int64_t{0}, int64_t{0});
    return;
  }
  std::vector<int64_t> idx(rank, 0);
  int64_t off = 0;
  for (int64_t flat = 0; flat < n; ++flat) {
    f(flat, off);
    for (int ax = rank - 1; ax >= 0; --ax) {
      ++idx[ax];
      off += strides[ax];
      if (idx[ax] < shape[ax]) break;
      off -= strides[ax] * shape[ax];
      idx[ax] = 0;
    }
  }
}

inline int normalize_axis(int axis, int rank) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " +
                     std::to_string(rank));
  }
  return axis;
}

}  // namespace detail
}  // namespace wavedef
