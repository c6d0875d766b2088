#include "wavedef/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "wavedef/random.hpp"

namespace wavedef {

DatasetHandle DatasetHandle::subset(int64_t n) const {
  if (n < 0 || n >= count()) return *this;
  DatasetHandle out;
  out.name = name;
  out.split = split;
  const int64_t per = channels() * height() * width();
  std::vector<double> data(images.data(), images.data() + n * per);
  out.images = Tensor::from_data({n, channels(), height(), width()}, std::move(data));
  out.labels.assign(labels.begin(), labels.begin() + n);
  return out;
}

Tensor DatasetHandle::image(int64_t index) const {
  return batch({index});
}

Tensor DatasetHandle::batch(const std::vector<int64_t>& idx) const {
  const int64_t per = channels() * height() * width();
  std::vector<double> data(static_cast<std::size_t>(idx.size()) * per);
  const double* src = images.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= count()) throw ValueError("dataset index out of range");
    std::copy(src + idx[i] * per, src + (idx[i] + 1) * per, data.begin() + i * per);
  }
  return Tensor::from_data({static_cast<int64_t>(idx.size()), channels(), height(), width()},
                           std::move(data));
}

std::vector<int> DatasetHandle::label_batch(const std::vector<int64_t>& idx) const {
  std::vector<int> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out[i] = labels[static_cast<std::size_t>(idx[i])];
  }
  return out;
}

// ---- IDX ----

namespace {

constexpr uint32_t kIdxImagesMagic = 0x00000803;
constexpr uint32_t kIdxLabelsMagic = 0x00000801;

uint32_t read_u32_be(std::istream& in, const char* what) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw FormatError(std::string("IDX truncated while reading ") + what);
  return (uint32_t(buf[0]) << 24) | (uint32_t(buf[1]) << 16) | (uint32_t(buf[2]) << 8) |
         uint32_t(buf[3]);
}

}  // namespace

IdxContent load_idx(std::istream& in, int64_t max_count) {
  const uint32_t magic = read_u32_be(in, "magic");
  IdxContent out;
  if (magic == kIdxLabelsMagic) {
    const uint32_t n = read_u32_be(in, "label count");
    int64_t take = static_cast<int64_t>(n);
    if (max_count >= 0) take = std::min<int64_t>(take, max_count);
    // Grow as we read: the declared count is untrusted until the payload
    // actually arrives.
    for (int64_t i = 0; i < take; ++i) {
      const int c = in.get();
      if (c == EOF) throw FormatError("IDX label payload truncated");
      out.labels.push_back(c);
    }
    return out;
  }
  if (magic == kIdxImagesMagic) {
    const uint32_t n = read_u32_be(in, "image count");
    const uint32_t rows = read_u32_be(in, "rows");
    const uint32_t cols = read_u32_be(in, "cols");
    if (rows == 0 || cols == 0 || rows > 4096 || cols > 4096) {
      throw FormatError("IDX image dimensions out of range: " + std::to_string(rows) + "x" +
                        std::to_string(cols));
    }
    int64_t take = static_cast<int64_t>(n);
    if (max_count >= 0) take = std::min<int64_t>(take, max_count);
    const int64_t pixels = static_cast<int64_t>(rows) * cols;
    std::vector<double> data;
    std::vector<unsigned char> row(static_cast<std::size_t>(pixels));
    for (int64_t i = 0; i < take; ++i) {
      in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(pixels));
      if (in.gcount() != static_cast<std::streamsize>(pixels)) {
        throw FormatError("IDX image payload truncated at record " + std::to_string(i));
      }
      for (int64_t p = 0; p < pixels; ++p) {
        data.push_back(row[static_cast<std::size_t>(p)] / 255.0);
      }
    }
    out.is_images = true;
    out.images = (take > 0)
                     ? Tensor::from_data({take, 1, static_cast<int64_t>(rows),
                                          static_cast<int64_t>(cols)},
                                         std::move(data))
                     : Tensor();
    return out;
  }
  std::ostringstream os;
  os << "bad IDX magic 0x" << std::hex << magic;
  throw FormatError(os.str());
}

IdxContent load_idx_file(const std::string& path, int64_t max_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open IDX file '" + path + "'");
  return load_idx(in, max_count);
}

// ---- CIFAR-10 binary ----

Cifar10Data load_cifar10_binary(std::istream& in, int64_t max_count) {
  constexpr int64_t kRecord = 3073;
  constexpr int64_t kPixels = 3072;
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (static_cast<int64_t>(bytes.size()) % kRecord != 0) {
    throw FormatError("CIFAR-10 file length " + std::to_string(bytes.size()) +
                      " is not a multiple of 3073");
  }
  int64_t n = static_cast<int64_t>(bytes.size()) / kRecord;
  if (max_count >= 0) n = std::min(n, max_count);

  Cifar10Data out;
  out.labels.reserve(static_cast<std::size_t>(n));
  std::vector<double> data(static_cast<std::size_t>(n * kPixels));
  for (int64_t i = 0; i < n; ++i) {
    const unsigned char* rec =
        reinterpret_cast<const unsigned char*>(bytes.data()) + i * kRecord;
    const int label = rec[0];
    if (label > 9) throw FormatError("CIFAR-10 label out of range: " + std::to_string(label));
    out.labels.push_back(label);
    for (int64_t p = 0; p < kPixels; ++p) {
      data[static_cast<std::size_t>(i * kPixels + p)] = rec[1 + p] / 255.0;
    }
  }
  out.images = (n > 0) ? Tensor::from_data({n, 3, 32, 32}, std::move(data)) : Tensor();
  return out;
}

Cifar10Data load_cifar10_file(const std::string& path, int64_t max_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open CIFAR-10 file '" + path + "'");
  return load_cifar10_binary(in, max_count);
}

// ---- resize ----

Tensor resize_bilinear(const Tensor& images, int64_t out_h, int64_t out_w) {
  if (images.rank() != 4) throw ShapeError("resize_bilinear expects [N,C,H,W]");
  const int64_t n = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
  if (h == out_h && w == out_w) return images;

  auto taps = [](int64_t out_n, int64_t in_n) {
    std::vector<int64_t> i0(out_n), i1(out_n);
    std::vector<double> t(out_n);
    const double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
    for (int64_t o = 0; o < out_n; ++o) {
      const double s = (static_cast<double>(o) + 0.5) * scale - 0.5;
      const double f = std::floor(s);
      i0[o] = std::clamp<int64_t>(static_cast<int64_t>(f), 0, in_n - 1);
      i1[o] = std::clamp<int64_t>(static_cast<int64_t>(f) + 1, 0, in_n - 1);
      t[o] = s - f;
    }
    return std::make_tuple(i0, i1, t);
  };
  auto [y0, y1, ty] = taps(out_h, h);
  auto [x0, x1, tx] = taps(out_w, w);

  std::vector<double> out(static_cast<std::size_t>(n * c * out_h * out_w));
  const double* src = images.data();
  for (int64_t plane = 0; plane < n * c; ++plane) {
    const double* p = src + plane * h * w;
    double* dst = out.data() + plane * out_h * out_w;
    for (int64_t oy = 0; oy < out_h; ++oy) {
      const double* r0 = p + y0[oy] * w;
      const double* r1 = p + y1[oy] * w;
      for (int64_t ox = 0; ox < out_w; ++ox) {
        const double a = r0[x0[ox]] * (1.0 - tx[ox]) + r0[x1[ox]] * tx[ox];
        const double b = r1[x0[ox]] * (1.0 - tx[ox]) + r1[x1[ox]] * tx[ox];
        dst[oy * out_w + ox] = a * (1.0 - ty[oy]) + b * ty[oy];
      }
    }
  }
  return Tensor::from_data({n, c, out_h, out_w}, std::move(out));
}

// ---- synthetic dataset ----

DatasetHandle synthetic_dataset(uint64_t seed, int64_t n, int classes,
                                const std::string& split) {
  if (classes < 2) throw ValueError("synthetic dataset needs at least 2 classes");
  if (n < classes) throw ValueError("synthetic dataset needs n >= classes");
  constexpr int64_t kSize = 32;
  const uint64_t split_seed = seed_stream(seed, split == "test" ? "synthetic-test"
                                                                : "synthetic-train");

  std::vector<double> data(static_cast<std::size_t>(n * kSize * kSize));
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const int cls = static_cast<int>(i % classes);
    labels[static_cast<std::size_t>(i)] = cls;
    std::mt19937_64 rng(mix_seed(split_seed, static_cast<uint64_t>(i)));
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> amp_dist(0.25, 0.40);
    std::uniform_real_distribution<double> offset_dist(-0.05, 0.05);
    std::uniform_real_distribution<double> noise_dist(-0.10, 0.10);

    const double theta = std::numbers::pi * static_cast<double>(cls) /
                         static_cast<double>(classes);
    const double cs = std::cos(theta), sn = std::sin(theta);
    const double phase = phase_dist(rng);
    const double amp = amp_dist(rng);
    const double offset = 0.5 + offset_dist(rng);
    // 4-pixel period: the class signal lives in the detail subbands, like
    // the texture/edge content the attacks chase on real image sets
    const double freq = 2.0 * std::numbers::pi / 4.0;

    double* img = data.data() + i * kSize * kSize;
    for (int64_t y = 0; y < kSize; ++y) {
      for (int64_t x = 0; x < kSize; ++x) {
        const double u = static_cast<double>(x) * cs + static_cast<double>(y) * sn;
        double v = offset + amp * std::sin(freq * u + phase) + noise_dist(rng);
        img[y * kSize + x] = std::clamp(v, 0.0, 1.0);
      }
    }
  }

  DatasetHandle out;
  out.name = "synthetic";
  out.split = split;
  out.images = Tensor::from_data({n, 1, kSize, kSize}, std::move(data));
  out.labels = std::move(labels);
  return out;
}

// ---- dataset front door ----

namespace {

DatasetHandle load_mnist_like(const std::string& name, const std::string& split,
                              const std::string& data_dir, int64_t subset) {
  const std::string img_name =
      (split == "train") ? "train-images-idx3-ubyte" : "t10k-images-idx3-ubyte";
  const std::string lbl_name =
      (split == "train") ? "train-labels-idx1-ubyte" : "t10k-labels-idx1-ubyte";
  IdxContent images = load_idx_file(data_dir + "/" + img_name, subset);
  IdxContent lbls = load_idx_file(data_dir + "/" + lbl_name, subset);
  if (!images.is_images || images.labels.size() != 0) {
    throw FormatError("expected an IDX image file at " + data_dir + "/" + img_name);
  }
  if (lbls.is_images) {
    throw FormatError("expected an IDX label file at " + data_dir + "/" + lbl_name);
  }
  if (!images.images.defined() ||
      images.images.dim(0) != static_cast<int64_t>(lbls.labels.size())) {
    throw FormatError("IDX image/label counts disagree");
  }
  DatasetHandle out;
  out.name = name;
  out.split = split;
  out.images = resize_bilinear(images.images, 32, 32);
  out.labels = std::move(lbls.labels);
  return out;
}

DatasetHandle load_cifar_dir(const std::string& split, const std::string& data_dir,
                             int64_t subset) {
  DatasetHandle out;
  out.name = "cifar10";
  out.split = split;
  std::vector<double> data;
  std::vector<int> labels;
  int64_t h = 32, w = 32;
  auto append = [&](const Cifar10Data& part) {
    if (!part.images.defined()) return;
    data.insert(data.end(), part.images.data(), part.images.data() + part.images.size());
    labels.insert(labels.end(), part.labels.begin(), part.labels.end());
  };
  if (split == "train") {
    for (int i = 1; i <= 5; ++i) {
      const std::string path = data_dir + "/data_batch_" + std::to_string(i) + ".bin";
      int64_t remaining = (subset >= 0) ? subset - static_cast<int64_t>(labels.size()) : -1;
      if (subset >= 0 && remaining <= 0) break;
      append(load_cifar10_file(path, remaining));
    }
  } else {
    append(load_cifar10_file(data_dir + "/test_batch.bin", subset));
  }
  const int64_t n = static_cast<int64_t>(labels.size());
  out.images = (n > 0) ? Tensor::from_data({n, 3, h, w}, std::move(data)) : Tensor();
  out.labels = std::move(labels);
  return out;
}

}  // namespace

DatasetHandle load_dataset(const std::string& name, const std::string& split,
                           const std::string& data_dir, int64_t subset, uint64_t seed) {
  if (split != "train" && split != "test") {
    throw ValueError("split must be 'train' or 'test', got '" + split + "'");
  }
  if (name == "synthetic") {
    const int64_t n = (subset >= 0) ? subset : (split == "train" ? 2000 : 500);
    return synthetic_dataset(seed, n, 10, split);
  }
  if (name == "mnist" || name == "fmnist") {
    return load_mnist_like(name, split, data_dir, subset);
  }
  if (name == "cifar10") {
    return load_cifar_dir(split, data_dir, subset);
  }
  throw ValueError("unknown dataset '" + name + "'");
}

}  // namespace wavedef
