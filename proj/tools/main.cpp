// Command-line driver for the adversarial-defense laboratory: classifier
// training, the two defense phases, attack evaluation, subband analysis and
// the two ablations. Every tunable lives in a flat key/value config file;
// flags override individual keys.

#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wavedef/config.hpp"
#include "wavedef/errors.hpp"
#include "wavedef/pipeline.hpp"

namespace {

// Exit codes: 0 ok, 2 usage, 3 config, 4 missing file / I/O, 5 malformed
// input bytes, 6 invalid values or shapes, 7 numeric failure.
enum ExitCode {
  kOk = 0,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kFormat = 5,
  kValue = 6,
  kNumeric = 7,
};

struct CliOverrides {
  std::optional<std::string> config_path;
  std::optional<std::string> dataset;
  std::optional<std::string> data_dir;
  std::optional<std::string> out_dir;
  std::optional<uint64_t> seed;
  std::optional<int64_t> subset;
  std::optional<double> epsilon;
  std::optional<std::string> attack;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<int> heads;
};

void add_common_flags(CLI::App* cmd, CliOverrides& o) {
  cmd->add_option("--config", o.config_path, "flat key/value config file");
  cmd->add_option("--dataset", o.dataset, "synthetic|mnist|fmnist|cifar10");
  cmd->add_option("--data-dir", o.data_dir, "directory holding the dataset files");
  cmd->add_option("--out", o.out_dir, "directory for checkpoints and reports");
  cmd->add_option("--seed", o.seed, "master RNG seed");
  cmd->add_option("--subset", o.subset, "cap both splits at N samples");
  cmd->add_option("--epsilon", o.epsilon, "attack budget for evaluation");
  cmd->add_option("--attack", o.attack, "restrict to one family (fgsm|pgd|mifgsm|bim)");
  cmd->add_option("--epochs", o.epochs, "epoch count for this command's phase");
  cmd->add_option("--batch-size", o.batch_size, "training batch size");
  cmd->add_option("--heads", o.heads, "attention heads for the denoiser");
}

wavedef::RunConfig resolve_config(const CliOverrides& o, const std::string& phase) {
  wavedef::RunConfig config = o.config_path ? wavedef::RunConfig::load(*o.config_path)
                                            : wavedef::RunConfig::defaults();
  if (o.dataset) config.dataset = *o.dataset;
  if (o.data_dir) config.data_dir = *o.data_dir;
  if (o.out_dir) config.out_dir = *o.out_dir;
  if (o.seed) config.seed = *o.seed;
  if (o.subset) {
    config.subset_train = *o.subset;
    config.subset_test = *o.subset;
  }
  if (o.epsilon) config.test_epsilon = *o.epsilon;
  if (o.attack) config.attack_families = {*o.attack};
  if (o.batch_size) config.batch_size = *o.batch_size;
  if (o.heads) config.heads = *o.heads;
  if (o.epochs) {
    if (phase == "train-classifier") {
      config.classifier_epochs = *o.epochs;
    } else if (phase == "train-denoiser") {
      config.denoiser_epochs = *o.epochs;
    } else if (phase == "retrain") {
      config.retrain_epochs = *o.epochs;
    } else {
      config.classifier_epochs = *o.epochs;
      config.denoiser_epochs = *o.epochs;
      config.retrain_epochs = *o.epochs;
    }
  }
  config.validate();
  return config;
}

int fail(ExitCode code, const char* kind, const std::string& message) {
  std::fprintf(stderr, "error: %s: %s\n", kind, message.c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatial-frequency denoising defense laboratory"};
  app.require_subcommand(1);

  CliOverrides o;
  std::string ablation = "retrain";

  CLI::App* train_classifier = app.add_subcommand(
      "train-classifier", "train the victim classifier on clean images");
  CLI::App* train_denoiser = app.add_subcommand(
      "train-denoiser", "phase 1: fit the denoiser against a frozen classifier");
  CLI::App* retrain = app.add_subcommand(
      "retrain", "phase 2: fine-tune the classifier behind the frozen denoiser");
  CLI::App* attack_eval = app.add_subcommand(
      "attack-eval", "attack the test split and report accuracy per defense arm");
  CLI::App* analyze = app.add_subcommand(
      "analyze-subbands", "wavelet energy profile of attack perturbations");
  CLI::App* ablate = app.add_subcommand("ablate", "retrain or heads ablation");
  ablate->add_option("--ablation", ablation, "retrain|heads");
  CLI::App* dump = app.add_subcommand("dump-defaults", "print the default config");

  for (CLI::App* cmd : {train_classifier, train_denoiser, retrain, attack_eval, analyze,
                        ablate}) {
    add_common_flags(cmd, o);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return kUsage;
  }

  try {
    if (dump->parsed()) {
      std::fputs(wavedef::RunConfig::defaults().dump().c_str(), stdout);
      return kOk;
    }
    if (train_classifier->parsed()) {
      wavedef::cmd_train_classifier(resolve_config(o, "train-classifier"));
    } else if (train_denoiser->parsed()) {
      wavedef::cmd_train_denoiser(resolve_config(o, "train-denoiser"));
    } else if (retrain->parsed()) {
      wavedef::cmd_retrain(resolve_config(o, "retrain"));
    } else if (attack_eval->parsed()) {
      wavedef::cmd_attack_eval(resolve_config(o, "attack-eval"));
    } else if (analyze->parsed()) {
      wavedef::cmd_analyze_subbands(resolve_config(o, "analyze-subbands"));
    } else if (ablate->parsed()) {
      wavedef::cmd_ablate(resolve_config(o, "ablate"), ablation);
    }
    return kOk;
  } catch (const wavedef::ConfigError& e) {
    return fail(kConfig, "config", e.what());
  } catch (const wavedef::IoError& e) {
    return fail(kIo, "io", e.what());
  } catch (const wavedef::FormatError& e) {
    return fail(kFormat, "format", e.what());
  } catch (const wavedef::NumericError& e) {
    return fail(kNumeric, "numeric", e.what());
  } catch (const wavedef::Error& e) {
    return fail(kValue, "invalid", e.what());
  } catch (const std::exception& e) {
    return fail(kValue, "internal", e.what());
  }
}
