#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "wavedef/tensor.hpp"

namespace wavedef {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Container layout (all integers little-endian): magic "TDCP", u32 version,
/// u32 tensor count, then per tensor: u16 name length, name bytes, u8 rank,
/// u32 extents, f64 payload. Round-trips are byte-identical.
inline constexpr uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const NamedTensors& tensors);
NamedTensors parse_checkpoint(const std::uint8_t* bytes, std::size_t size);

void save_checkpoint(const std::string& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::string& path);

/// FNV-1a over the serialized bytes; used to prove frozen components stay
/// frozen across training phases.
uint64_t checkpoint_checksum(const NamedTensors& tensors);

/// Copies checkpoint values into an existing parameter set (matched by name;
/// missing, extra or shape-mismatched entries are errors).
void assign_named_tensors(const NamedTensors& source, NamedTensors& dest_params);

}  // namespace wavedef
