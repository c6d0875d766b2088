#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wavedef/attacks.hpp"
#include "wavedef/checkpoint.hpp"
#include "wavedef/classifier.hpp"
#include "wavedef/config.hpp"
#include "wavedef/data.hpp"
#include "wavedef/denoiser.hpp"
#include "wavedef/wavelet.hpp"

namespace wavedef {

struct TrainResult {
  /// Row 0 is the pre-training evaluation pass for the denoiser phase;
  /// training epochs follow.
  std::vector<double> epoch_losses;
  std::vector<double> epoch_lrs;
};

struct EvalRow {
  std::string attack;
  double epsilon = 0.0;
  int steps = 1;
  double step_size = 0.0;
  double decay = 0.0;
  double clean_acc = 0.0;
  double attacked_acc = 0.0;
  std::optional<double> defended_acc;
  std::optional<double> defended_retrained_acc;
  SubbandEnergyProfile subbands;  // mean per-sample fractions of the perturbation
};

struct EvalReport {
  std::string dataset;
  uint64_t seed = 0;
  std::vector<EvalRow> rows;
  std::string timestamp;  // meta only; never written into the CSV tables
};

struct AblationRow {
  std::string ablation;  // "retrain" | "heads"
  std::string arm;       // e.g. "no_retrain" / "full", "heads_1" / "heads_4"
  EvalRow row;
  /// The arm's headline defense accuracy (defended or defended+retrained).
  double defense_acc = 0.0;
};

// ---- named-tensor plumbing and model checkpoints ----

template <class Model>
NamedTensors named_params(Model& model) {
  NamedTensors out;
  model.visit([&](const std::string& name, Tensor& t) { out.emplace_back(name, t); });
  return out;
}

void save_denoiser(const std::string& path, Denoiser& model);
Denoiser load_denoiser(const std::string& path);
void save_classifier(const std::string& path, Classifier& model);
Classifier load_classifier(const std::string& path);

// ---- training phases ----

/// Attack chunks are larger than the optimizer batch so the classifier
/// gradients vectorize; both phases draw their per-chunk specs through this
/// derivation (reproducible from config alone).
int64_t training_attack_chunk(const RunConfig& config);
AttackSpec training_attack_spec(const RunConfig& config, double epsilon, uint64_t epoch,
                                uint64_t chunk, std::mt19937_64& mix_rng);

TrainResult train_classifier(Classifier& model, const DatasetHandle& train,
                             const RunConfig& config);

/// Phase 1: freeze the classifier, synthesize attacked inputs from the mix,
/// and fit the denoiser to reconstruct the clean images under the
/// Charbonnier loss. Throws if the frozen classifier changes.
TrainResult train_denoiser(Denoiser& model, const Classifier& frozen_classifier,
                           const DatasetHandle& train, const RunConfig& config);

/// Phase 2: freeze the denoiser, regenerate attacks against the classifier
/// being trained, and fine-tune it on denoised-adversarial plus clean
/// batches (1:1). Throws if the frozen denoiser changes.
TrainResult retrain_classifier(Classifier& model, const Denoiser& frozen_denoiser,
                               const DatasetHandle& train, const RunConfig& config);

// ---- evaluation ----

double accuracy_percent(const Classifier& model, const DatasetHandle& data);

EvalReport evaluate(const DatasetHandle& test, const Classifier& classifier,
                    const Denoiser* denoiser, const Classifier* retrained,
                    const std::vector<AttackSpec>& attacks, const RunConfig& config);

std::vector<AblationRow> ablation_retrain(const DatasetHandle& test,
                                          const Classifier& classifier,
                                          const Denoiser& denoiser,
                                          const Classifier& retrained,
                                          const std::vector<AttackSpec>& attacks,
                                          const RunConfig& config);

// ---- report serialization ----

extern const char* const kReportCsvHeader;

void write_report_csv(const EvalReport& report, std::ostream& out);
void write_subband_csv(const EvalReport& report, std::ostream& out);
void write_loss_curve_csv(const TrainResult& result, std::ostream& out);
void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& dataset,
                        std::ostream& out);

// ---- command orchestration (what the CLI subcommands run) ----

struct PipelinePaths {
  std::string classifier_ckpt;
  std::string classifier_loss;
  std::string denoiser_ckpt;
  std::string denoiser_loss;
  std::string retrained_ckpt;
  std::string retrain_loss;
  std::string report_csv;
  std::string subband_csv;
  std::string run_meta;

  static PipelinePaths under(const std::string& out_dir);
};

void cmd_train_classifier(const RunConfig& config);
void cmd_train_denoiser(const RunConfig& config);
void cmd_retrain(const RunConfig& config);
EvalReport cmd_attack_eval(const RunConfig& config);
void cmd_analyze_subbands(const RunConfig& config);
void cmd_ablate(const RunConfig& config, const std::string& which);

}  // namespace wavedef
