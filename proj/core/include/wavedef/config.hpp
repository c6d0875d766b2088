#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wavedef/attacks.hpp"
#include "wavedef/denoiser.hpp"

namespace wavedef {

/// Flat key/value run configuration; every tunable the CLI exposes. Values
/// of -1 mean "resolve a per-dataset default at run time".
struct RunConfig {
  std::string dataset = "synthetic";
  std::string data_dir = "data";
  std::string out_dir = "out";
  uint64_t seed = 42;
  int64_t subset_train = 2000;
  int64_t subset_test = 500;

  int embed_dim = 48;
  int heads = 4;
  int scales = 3;
  int blocks_per_stage = 1;
  int gdfn_expansion = 2;

  int classifier_epochs = 6;
  int denoiser_epochs = 3;
  int retrain_epochs = 2;
  int batch_size = 8;
  double lr_start = 0.004;
  double lr_end = 0.0005;
  double charbonnier_eps = 1e-3;

  double train_epsilon = -1.0;
  double test_epsilon = -1.0;
  int attack_steps = 10;
  double attack_step_size = -1.0;
  double attack_decay = 1.0;
  bool attack_random_start = true;
  std::vector<std::string> attack_families = {"fgsm", "pgd", "mifgsm", "bim"};

  static RunConfig defaults() { return RunConfig{}; }
  static RunConfig parse(std::istream& in);
  static RunConfig parse_string(const std::string& text);
  static RunConfig load(const std::string& path);

  std::string dump() const;

  /// Per-dataset epsilon defaults (train/test): mnist 0.3/0.2, fmnist
  /// 0.3/0.1, cifar10 0.15/0.05, synthetic 0.3/0.3.
  double resolved_train_epsilon() const;
  double resolved_test_epsilon() const;

  DenoiserConfig denoiser_config(int image_channels) const;
  AttackSpec attack_spec(AttackFamily family, double epsilon) const;
  std::vector<AttackSpec> eval_attacks() const;

  void validate() const;
};

}  // namespace wavedef
