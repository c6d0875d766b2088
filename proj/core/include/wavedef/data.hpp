#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wavedef/tensor.hpp"

namespace wavedef {

struct DatasetHandle {
  std::string name;   // mnist | fmnist | cifar10 | synthetic
  std::string split;  // train | test
  Tensor images;      // [N,C,H,W], pixels in [0,1]
  std::vector<int> labels;

  int64_t count() const { return images.defined() ? images.dim(0) : 0; }
  int64_t channels() const { return images.dim(1); }
  int64_t height() const { return images.dim(2); }
  int64_t width() const { return images.dim(3); }

  /// First-n cap used to define the desk scale.
  DatasetHandle subset(int64_t n) const;
  Tensor image(int64_t index) const;                     // [1,C,H,W]
  Tensor batch(const std::vector<int64_t>& idx) const;   // [B,C,H,W]
  std::vector<int> label_batch(const std::vector<int64_t>& idx) const;
};

/// Raw IDX content: a label vector or an image stack, depending on the magic.
struct IdxContent {
  bool is_images = false;
  Tensor images;            // [N,1,H,W], pixels scaled by 1/255
  std::vector<int> labels;
};

/// Parses the big-endian IDX container (magic 0x803 images / 0x801 labels).
/// max_count >= 0 caps how many records are decoded.
IdxContent load_idx(std::istream& in, int64_t max_count = -1);
IdxContent load_idx_file(const std::string& path, int64_t max_count = -1);

/// CIFAR-10 binary: 3073-byte records (label byte + channel-planar RGB).
struct Cifar10Data {
  Tensor images;  // [N,3,32,32]
  std::vector<int> labels;
};
Cifar10Data load_cifar10_binary(std::istream& in, int64_t max_count = -1);
Cifar10Data load_cifar10_file(const std::string& path, int64_t max_count = -1);

/// Deterministic bilinear resize with half-pixel centers (load-time only).
Tensor resize_bilinear(const Tensor& images, int64_t out_h, int64_t out_w);

/// Class-conditional oriented gratings plus seeded noise; balanced labels,
/// separable enough for the desk classifier to exceed 95% accuracy.
DatasetHandle synthetic_dataset(uint64_t seed, int64_t n, int classes = 10,
                                const std::string& split = "train");

/// Loads one of the named datasets from `data_dir` using the canonical file
/// names, resizing everything to C x 32 x 32.
DatasetHandle load_dataset(const std::string& name, const std::string& split,
                           const std::string& data_dir, int64_t subset,
                           uint64_t seed);

}  // namespace wavedef
