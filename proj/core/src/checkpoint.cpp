#include "wavedef/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

namespace wavedef {

namespace {

constexpr char kMagic[4] = {'T', 'D', 'C', 'P'};

void put_u16(std::vector<std::uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const uint64_t bits = std::bit_cast<uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

struct Reader {
  const std::uint8_t* p;
  std::size_t n;
  std::size_t pos = 0;

  void need(std::size_t k, const char* what) const {
    if (pos + k > n) throw FormatError(std::string("checkpoint truncated while reading ") + what);
  }
  uint16_t u16(const char* what) {
    need(2, what);
    uint16_t v = static_cast<uint16_t>(p[pos]) | (static_cast<uint16_t>(p[pos + 1]) << 8);
    pos += 2;
    return v;
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  uint8_t u8(const char* what) {
    need(1, what);
    return p[pos++];
  }
  double f64(const char* what) {
    need(8, what);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(p[pos + i]) << (8 * i);
    pos += 8;
    return std::bit_cast<double>(bits);
  }
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const NamedTensors& tensors) {
  std::unordered_set<std::string> seen;
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (!seen.insert(name).second) {
      throw FormatError("duplicate tensor name '" + name + "' in checkpoint");
    }
    if (name.size() > 0xffff) throw FormatError("tensor name too long");
    if (t.rank() > 0xff) throw FormatError("tensor rank too large");
    put_u16(out, static_cast<uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    for (int64_t d : t.shape()) {
      if (d > 0xffffffffLL) throw FormatError("tensor extent too large");
      put_u32(out, static_cast<uint32_t>(d));
    }
    const double* data = t.data();
    for (int64_t i = 0; i < t.size(); ++i) put_f64(out, data[i]);
  }
  return out;
}

NamedTensors parse_checkpoint(const std::uint8_t* bytes, std::size_t size) {
  Reader r{bytes, size};
  r.need(4, "magic");
  if (std::memcmp(bytes, kMagic, 4) != 0) throw FormatError("bad checkpoint magic");
  r.pos = 4;
  const uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const uint32_t count = r.u32("tensor count");

  NamedTensors out;
  std::unordered_set<std::string> seen;
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = r.u16("name length");
    r.need(name_len, "name");
    std::string name(reinterpret_cast<const char*>(bytes + r.pos), name_len);
    r.pos += name_len;
    if (!seen.insert(name).second) {
      throw FormatError("duplicate tensor name '" + name + "' in checkpoint");
    }
    const uint8_t rank = r.u8("rank");
    Shape shape;
    int64_t numel = 1;
    for (uint8_t d = 0; d < rank; ++d) {
      const uint32_t ext = r.u32("extent");
      if (ext == 0) throw FormatError("zero extent in checkpoint tensor '" + name + "'");
      shape.push_back(static_cast<int64_t>(ext));
      numel *= static_cast<int64_t>(ext);
      if (numel > (int64_t{1} << 40)) throw FormatError("checkpoint tensor too large");
    }
    // Validate the payload size before allocating for it.
    r.need(static_cast<std::size_t>(numel) * 8, "tensor payload");
    std::vector<double> data(static_cast<std::size_t>(numel));
    for (int64_t j = 0; j < numel; ++j) data[static_cast<std::size_t>(j)] = r.f64("payload");
    out.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(data)));
  }
  if (r.pos != size) throw FormatError("trailing bytes after checkpoint payload");
  return out;
}

void save_checkpoint(const std::string& path, const NamedTensors& tensors) {
  const auto bytes = serialize_checkpoint(tensors);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path + "'");
}

NamedTensors load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return parse_checkpoint(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size());
}

uint64_t checkpoint_checksum(const NamedTensors& tensors) {
  const auto bytes = serialize_checkpoint(tensors);
  uint64_t h = 1469598103934665603ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

void assign_named_tensors(const NamedTensors& source, NamedTensors& dest_params) {
  std::unordered_map<std::string, const Tensor*> index;
  for (const auto& [name, t] : source) index[name] = &t;
  if (index.size() != dest_params.size()) {
    throw FormatError("checkpoint has " + std::to_string(index.size()) +
                      " tensors, model expects " + std::to_string(dest_params.size()));
  }
  for (auto& [name, dest] : dest_params) {
    auto it = index.find(name);
    if (it == index.end()) throw FormatError("checkpoint is missing tensor '" + name + "'");
    const Tensor& src = *it->second;
    if (src.shape() != dest.shape()) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " +
                        shape_to_string(src.shape()) + ", model expects " +
                        shape_to_string(dest.shape()));
    }
    std::copy(src.data(), src.data() + src.size(), dest.data());
  }
}

}  // namespace wavedef
