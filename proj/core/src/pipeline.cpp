#include "wavedef/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "wavedef/losses.hpp"
#include "wavedef/ops.hpp"
#include "wavedef/optim.hpp"
#include "wavedef/random.hpp"

namespace wavedef {

namespace {

constexpr int64_t kEvalBatch = 32;

std::vector<std::vector<int64_t>> make_batches(int64_t n, int64_t batch_size,
                                               std::mt19937_64* shuffle_rng) {
  std::vector<int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  if (shuffle_rng != nullptr) std::shuffle(order.begin(), order.end(), *shuffle_rng);
  std::vector<std::vector<int64_t>> batches;
  for (int64_t at = 0; at < n; at += batch_size) {
    const int64_t take = std::min(batch_size, n - at);
    batches.emplace_back(order.begin() + at, order.begin() + at + take);
  }
  return batches;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string now_string() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[64];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string format_acc(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string format_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

// ---- model checkpoints ----

namespace {

NamedTensors with_meta(NamedTensors params, std::initializer_list<std::pair<std::string, double>> meta) {
  for (const auto& [key, value] : meta) {
    params.emplace_back("meta." + key, Tensor::scalar(value));
  }
  return params;
}

double take_meta(const NamedTensors& all, const std::string& key) {
  for (const auto& [name, t] : all) {
    if (name == "meta." + key) return t.item();
  }
  throw FormatError("checkpoint is missing meta field '" + key + "'");
}

NamedTensors strip_meta(const NamedTensors& all) {
  NamedTensors out;
  for (const auto& entry : all) {
    if (entry.first.rfind("meta.", 0) != 0) out.push_back(entry);
  }
  return out;
}

}  // namespace

void save_denoiser(const std::string& path, Denoiser& model) {
  auto named = with_meta(named_params(model),
                         {{"embed_dim", model.config.embed_dim},
                          {"heads", model.config.heads},
                          {"scales", model.config.scales},
                          {"blocks_per_stage", model.config.blocks_per_stage},
                          {"gdfn_expansion", model.config.gdfn_expansion},
                          {"image_channels", model.config.image_channels}});
  save_checkpoint(path, named);
}

Denoiser load_denoiser(const std::string& path) {
  const NamedTensors all = load_checkpoint(path);
  DenoiserConfig config;
  config.embed_dim = static_cast<int>(take_meta(all, "embed_dim"));
  config.heads = static_cast<int>(take_meta(all, "heads"));
  config.scales = static_cast<int>(take_meta(all, "scales"));
  config.blocks_per_stage = static_cast<int>(take_meta(all, "blocks_per_stage"));
  config.gdfn_expansion = static_cast<int>(take_meta(all, "gdfn_expansion"));
  config.image_channels = static_cast<int>(take_meta(all, "image_channels"));
  Denoiser model = Denoiser::init(config, 0);
  NamedTensors dest = named_params(model);
  assign_named_tensors(strip_meta(all), dest);
  return model;
}

void save_classifier(const std::string& path, Classifier& model) {
  auto named = with_meta(named_params(model),
                         {{"image_channels", model.image_channels}});
  save_checkpoint(path, named);
}

Classifier load_classifier(const std::string& path) {
  const NamedTensors all = load_checkpoint(path);
  Classifier model = Classifier::init(static_cast<int>(take_meta(all, "image_channels")), 0);
  NamedTensors dest = named_params(model);
  assign_named_tensors(strip_meta(all), dest);
  return model;
}

// ---- training ----

int64_t training_attack_chunk(const RunConfig& config) {
  return std::max<int64_t>(config.batch_size, kEvalBatch);
}

AttackSpec training_attack_spec(const RunConfig& config, double epsilon, uint64_t epoch,
                                uint64_t chunk, std::mt19937_64& mix_rng) {
  const auto& families = config.attack_families;
  const std::size_t pick = families.size() == 1
                               ? 0
                               : static_cast<std::size_t>(mix_rng() % families.size());
  AttackSpec spec = config.attack_spec(attack_family_from_name(families[pick]), epsilon);
  spec.seed = seed_stream(config.seed, "attack-mix", epoch * 1000003ULL + chunk);
  return spec;
}

TrainResult train_classifier(Classifier& model, const DatasetHandle& train,
                             const RunConfig& config) {
  TrainResult result;
  Adam optimizer(model.parameters());
  const int epochs = config.classifier_epochs;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double lr = cosine_lr(config.lr_start, config.lr_end, epoch, epochs);
    std::mt19937_64 shuffle_rng(seed_stream(config.seed, "cls-shuffle",
                                            static_cast<uint64_t>(epoch)));
    std::vector<double> losses;
    for (const auto& batch : make_batches(train.count(), config.batch_size, &shuffle_rng)) {
      Tensor x = train.batch(batch);
      const std::vector<int> labels = train.label_batch(batch);
      Tape tape;
      Tensor loss = cross_entropy_loss(model.forward(x), labels);
      const double loss_value = loss.item();
      if (!std::isfinite(loss_value)) throw NumericError("non-finite classifier loss");
      tape.backward(loss);
      optimizer.step(lr);
      optimizer.zero_grad();
      losses.push_back(loss_value);
    }
    result.epoch_losses.push_back(mean_of(losses));
    result.epoch_lrs.push_back(lr);
  }
  return result;
}

TrainResult train_denoiser(Denoiser& model, const Classifier& frozen_classifier,
                           const DatasetHandle& train, const RunConfig& config) {
  if (config.attack_families.empty()) {
    throw ConfigError("denoiser training needs a non-empty attack mix");
  }
  Classifier& frozen = const_cast<Classifier&>(frozen_classifier);
  NamedTensors frozen_named = named_params(frozen);
  const uint64_t checksum_before = checkpoint_checksum(frozen_named);

  TrainResult result;
  Adam optimizer(model.parameters());
  const double train_eps = config.resolved_train_epsilon();
  const int epochs = config.denoiser_epochs;
  // Attacks run in larger chunks than the optimizer batch: the classifier
  // gradients vectorize better that way and the mix is sampled per chunk.
  const int64_t chunk_size = training_attack_chunk(config);

  // Epoch 0 is a pure evaluation pass: with the zero-initialized output
  // projection it reports the Charbonnier level of the raw perturbations.
  for (int epoch = 0; epoch <= epochs; ++epoch) {
    const bool training = epoch > 0;
    const double lr = training ? cosine_lr(config.lr_start, config.lr_end, epoch - 1, epochs)
                               : 0.0;
    std::mt19937_64 shuffle_rng(seed_stream(config.seed, "dn-shuffle",
                                            static_cast<uint64_t>(epoch)));
    std::mt19937_64 mix_rng(seed_stream(config.seed, "dn-mix", static_cast<uint64_t>(epoch)));
    std::vector<double> losses;
    uint64_t chunk_index = 0;
    for (const auto& chunk : make_batches(train.count(), chunk_size,
                                          training ? &shuffle_rng : nullptr)) {
      const AttackSpec spec = training_attack_spec(config, train_eps,
                                              static_cast<uint64_t>(epoch), chunk_index,
                                              mix_rng);
      Tensor x_clean = train.batch(chunk);
      const std::vector<int> labels = train.label_batch(chunk);
      Tensor x_adv = run_attack(x_clean, labels, frozen, spec,
                                static_cast<int64_t>(chunk_index) * chunk_size);

      const int64_t take = static_cast<int64_t>(chunk.size());
      if (!training) {
        Tensor loss = charbonnier_loss(model.forward(x_adv), x_clean, config.charbonnier_eps);
        const double loss_value = loss.item();
        if (!std::isfinite(loss_value)) throw NumericError("non-finite denoiser loss");
        losses.push_back(loss_value);
      } else {
        for (int64_t at = 0; at < take; at += config.batch_size) {
          const int64_t sub = std::min<int64_t>(config.batch_size, take - at);
          Tensor xa = slice(x_adv, 0, at, sub);
          Tensor xc = slice(x_clean, 0, at, sub);
          Tape tape;
          Tensor loss = charbonnier_loss(model.forward(xa), xc, config.charbonnier_eps);
          const double loss_value = loss.item();
          if (!std::isfinite(loss_value)) throw NumericError("non-finite denoiser loss");
          tape.backward(loss);
          optimizer.step(lr);
          optimizer.zero_grad();
          losses.push_back(loss_value);
        }
      }
      ++chunk_index;
    }
    result.epoch_losses.push_back(mean_of(losses));
    result.epoch_lrs.push_back(lr);
  }

  if (checkpoint_checksum(frozen_named) != checksum_before) {
    throw Error("frozen classifier changed during denoiser training");
  }
  return result;
}

TrainResult retrain_classifier(Classifier& model, const Denoiser& frozen_denoiser,
                               const DatasetHandle& train, const RunConfig& config) {
  Denoiser& frozen = const_cast<Denoiser&>(frozen_denoiser);
  NamedTensors frozen_named = named_params(frozen);
  const uint64_t checksum_before = checkpoint_checksum(frozen_named);

  TrainResult result;
  Adam optimizer(model.parameters());
  const double train_eps = config.resolved_train_epsilon();
  const int epochs = config.retrain_epochs;
  const int64_t chunk_size = training_attack_chunk(config);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double lr = cosine_lr(config.lr_start, config.lr_end, epoch, epochs);
    std::mt19937_64 shuffle_rng(seed_stream(config.seed, "rt-shuffle",
                                            static_cast<uint64_t>(epoch)));
    std::mt19937_64 mix_rng(seed_stream(config.seed, "rt-mix", static_cast<uint64_t>(epoch)));
    std::vector<double> losses;
    uint64_t chunk_index = 0;
    for (const auto& chunk : make_batches(train.count(), chunk_size, &shuffle_rng)) {
      const AttackSpec spec = training_attack_spec(config, train_eps,
                                              static_cast<uint64_t>(epoch) + 7919ULL,
                                              chunk_index, mix_rng);
      Tensor x_clean = train.batch(chunk);
      const std::vector<int> labels = train.label_batch(chunk);
      // Attacks regenerate online, per chunk, against the classifier being
      // trained.
      Tensor x_adv = run_attack(x_clean, labels, model, spec,
                                static_cast<int64_t>(chunk_index) * chunk_size);
      Tensor denoised = frozen.forward(x_adv);

      const int64_t take = static_cast<int64_t>(chunk.size());
      for (int64_t at = 0; at < take; at += config.batch_size) {
        const int64_t sub = std::min<int64_t>(config.batch_size, take - at);
        // Clean images mix in 1:1 so clean accuracy is preserved.
        Tensor inputs = concat({slice(denoised, 0, at, sub), slice(x_clean, 0, at, sub)}, 0);
        std::vector<int> both(labels.begin() + at, labels.begin() + at + sub);
        both.insert(both.end(), labels.begin() + at, labels.begin() + at + sub);

        Tape tape;
        Tensor loss = cross_entropy_loss(model.forward(inputs), both);
        const double loss_value = loss.item();
        if (!std::isfinite(loss_value)) throw NumericError("non-finite retraining loss");
        tape.backward(loss);
        optimizer.step(lr);
        optimizer.zero_grad();
        losses.push_back(loss_value);
      }
      ++chunk_index;
    }
    result.epoch_losses.push_back(mean_of(losses));
    result.epoch_lrs.push_back(lr);
  }

  if (checkpoint_checksum(frozen_named) != checksum_before) {
    throw Error("frozen denoiser changed during classifier retraining");
  }
  return result;
}

// ---- evaluation ----

namespace {

std::vector<int> predict(const Classifier& model, const Tensor& images) {
  return argmax_rows(model.forward(images));
}

double score(const std::vector<int>& predictions, const std::vector<int>& labels,
             std::size_t offset) {
  int hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == labels[offset + i]) ++hits;
  }
  return static_cast<double>(hits);
}

}  // namespace

double accuracy_percent(const Classifier& model, const DatasetHandle& data) {
  if (data.count() == 0) throw ValueError("accuracy over an empty dataset");
  double hits = 0.0;
  for (int64_t at = 0; at < data.count(); at += kEvalBatch) {
    const int64_t take = std::min<int64_t>(kEvalBatch, data.count() - at);
    std::vector<int64_t> idx(static_cast<std::size_t>(take));
    std::iota(idx.begin(), idx.end(), at);
    hits += score(predict(model, data.batch(idx)), data.labels, static_cast<std::size_t>(at));
  }
  return 100.0 * hits / static_cast<double>(data.count());
}

EvalReport evaluate(const DatasetHandle& test, const Classifier& classifier,
                    const Denoiser* denoiser, const Classifier* retrained,
                    const std::vector<AttackSpec>& attacks, const RunConfig& config) {
  if (test.count() == 0) throw ValueError("evaluate over an empty dataset");
  EvalReport report;
  report.dataset = test.name;
  report.seed = config.seed;
  report.timestamp = now_string();

  const double clean_acc = accuracy_percent(classifier, test);

  for (const AttackSpec& raw : attacks) {
    const AttackSpec spec = raw.normalized();
    EvalRow row;
    row.attack = attack_family_name(spec.family);
    row.epsilon = spec.epsilon;
    row.steps = spec.steps;
    row.step_size = spec.step_size;
    row.decay = spec.family == AttackFamily::Mifgsm ? spec.decay : 0.0;
    row.clean_acc = clean_acc;

    double attacked_hits = 0.0, defended_hits = 0.0, retrained_hits = 0.0;
    double frac_ll = 0.0, frac_lh = 0.0, frac_hl = 0.0, frac_hh = 0.0;
    int64_t profiled = 0;

    for (int64_t at = 0; at < test.count(); at += kEvalBatch) {
      const int64_t take = std::min<int64_t>(kEvalBatch, test.count() - at);
      std::vector<int64_t> idx(static_cast<std::size_t>(take));
      std::iota(idx.begin(), idx.end(), at);
      Tensor x = test.batch(idx);
      const std::vector<int> labels = test.label_batch(idx);

      Tensor x_adv = run_attack(x, labels, classifier, spec, at);
      attacked_hits += score(predict(classifier, x_adv), test.labels,
                             static_cast<std::size_t>(at));

      // Per-sample share of perturbation energy in each subband.
      for (int64_t i = 0; i < take; ++i) {
        std::vector<int64_t> one{at + i};
        const auto profile = subband_energy_profile(test.batch(one),
                                                    slice(x_adv, 0, i, 1));
        if (!profile.zero_energy) {
          frac_ll += profile.ll_fraction;
          frac_lh += profile.lh_fraction;
          frac_hl += profile.hl_fraction;
          frac_hh += profile.hh_fraction;
          ++profiled;
        }
      }

      if (denoiser != nullptr) {
        Tensor den = denoiser->forward(x_adv);
        defended_hits += score(predict(classifier, den), test.labels,
                               static_cast<std::size_t>(at));
        if (retrained != nullptr) {
          retrained_hits += score(predict(*retrained, den), test.labels,
                                  static_cast<std::size_t>(at));
        }
      }
    }

    const double n = static_cast<double>(test.count());
    row.attacked_acc = 100.0 * attacked_hits / n;
    if (denoiser != nullptr) {
      row.defended_acc = 100.0 * defended_hits / n;
      if (retrained != nullptr) row.defended_retrained_acc = 100.0 * retrained_hits / n;
    }
    if (profiled > 0) {
      row.subbands.ll_fraction = frac_ll / static_cast<double>(profiled);
      row.subbands.lh_fraction = frac_lh / static_cast<double>(profiled);
      row.subbands.hl_fraction = frac_hl / static_cast<double>(profiled);
      row.subbands.hh_fraction = frac_hh / static_cast<double>(profiled);
    } else {
      row.subbands.zero_energy = true;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::vector<AblationRow> ablation_retrain(const DatasetHandle& test,
                                          const Classifier& classifier,
                                          const Denoiser& denoiser,
                                          const Classifier& retrained,
                                          const std::vector<AttackSpec>& attacks,
                                          const RunConfig& config) {
  EvalReport report = evaluate(test, classifier, &denoiser, &retrained, attacks, config);
  std::vector<AblationRow> rows;
  for (const auto& row : report.rows) {
    AblationRow no_retrain{"retrain", "no_retrain", row, row.defended_acc.value_or(0.0)};
    AblationRow full{"retrain", "full", row, row.defended_retrained_acc.value_or(0.0)};
    rows.push_back(std::move(no_retrain));
    rows.push_back(std::move(full));
  }
  return rows;
}

// ---- serialization ----

const char* const kReportCsvHeader =
    "dataset,attack,epsilon,steps,step_size,decay,clean_acc,attacked_acc,defended_acc,"
    "defended_retrained_acc";

void write_report_csv(const EvalReport& report, std::ostream& out) {
  out << kReportCsvHeader << "\n";
  for (const auto& row : report.rows) {
    out << report.dataset << "," << row.attack << "," << format_num(row.epsilon) << ","
        << row.steps << "," << format_num(row.step_size) << "," << format_num(row.decay)
        << "," << format_acc(row.clean_acc) << "," << format_acc(row.attacked_acc) << ","
        << (row.defended_acc ? format_acc(*row.defended_acc) : "") << ","
        << (row.defended_retrained_acc ? format_acc(*row.defended_retrained_acc) : "")
        << "\n";
  }
}

void write_subband_csv(const EvalReport& report, std::ostream& out) {
  out << "attack,epsilon,ll_fraction,lh_fraction,hl_fraction,hh_fraction\n";
  char buf[160];
  for (const auto& row : report.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%g,%.6f,%.6f,%.6f,%.6f", row.attack.c_str(),
                  row.epsilon, row.subbands.ll_fraction, row.subbands.lh_fraction,
                  row.subbands.hl_fraction, row.subbands.hh_fraction);
    out << buf << "\n";
  }
}

void write_loss_curve_csv(const TrainResult& result, std::ostream& out) {
  out << "epoch,lr,mean_loss\n";
  char buf[96];
  for (std::size_t i = 0; i < result.epoch_losses.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g", i, result.epoch_lrs[i],
                  result.epoch_losses[i]);
    out << buf << "\n";
  }
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& dataset,
                        std::ostream& out) {
  out << "ablation,arm,dataset,attack,epsilon,clean_acc,attacked_acc,defense_acc\n";
  for (const auto& r : rows) {
    out << r.ablation << "," << r.arm << "," << dataset << "," << r.row.attack << ","
        << format_num(r.row.epsilon) << "," << format_acc(r.row.clean_acc) << ","
        << format_acc(r.row.attacked_acc) << "," << format_acc(r.defense_acc) << "\n";
  }
}

// ---- command orchestration ----

PipelinePaths PipelinePaths::under(const std::string& out_dir) {
  PipelinePaths p;
  p.classifier_ckpt = out_dir + "/classifier.tdcp";
  p.classifier_loss = out_dir + "/classifier_loss.csv";
  p.denoiser_ckpt = out_dir + "/denoiser.tdcp";
  p.denoiser_loss = out_dir + "/denoiser_loss.csv";
  p.retrained_ckpt = out_dir + "/classifier_retrained.tdcp";
  p.retrain_loss = out_dir + "/retrain_loss.csv";
  p.report_csv = out_dir + "/report.csv";
  p.subband_csv = out_dir + "/subband_energy.csv";
  p.run_meta = out_dir + "/run_meta.txt";
  return p;
}

namespace {

void ensure_out_dir(const RunConfig& config) {
  std::filesystem::create_directories(config.out_dir);
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << contents;
}

void append_meta(const RunConfig& config, const std::string& section,
                 const std::string& body) {
  const auto paths = PipelinePaths::under(config.out_dir);
  std::ofstream out(paths.run_meta, std::ios::app);
  if (!out) throw IoError("cannot open '" + paths.run_meta + "' for writing");
  out << "[" << section << " @ " << now_string() << "]\n" << body << "\n";
}

std::string loss_csv_string(const TrainResult& result) {
  std::ostringstream os;
  write_loss_curve_csv(result, os);
  return os.str();
}

}  // namespace

void cmd_train_classifier(const RunConfig& config) {
  ensure_out_dir(config);
  const auto paths = PipelinePaths::under(config.out_dir);
  DatasetHandle train = load_dataset(config.dataset, "train", config.data_dir,
                                     config.subset_train, config.seed);
  DatasetHandle test = load_dataset(config.dataset, "test", config.data_dir,
                                    config.subset_test, config.seed);
  Classifier model = Classifier::init(static_cast<int>(train.channels()),
                                      seed_stream(config.seed, "cls-init"));
  const TrainResult result = train_classifier(model, train, config);
  save_classifier(paths.classifier_ckpt, model);
  write_file(paths.classifier_loss, loss_csv_string(result));
  const double clean = accuracy_percent(model, test);
  append_meta(config, "train-classifier",
              "clean_test_accuracy = " + format_acc(clean) + "\n" + config.dump());
  std::printf("clean test accuracy: %s%%\n", format_acc(clean).c_str());
}

void cmd_train_denoiser(const RunConfig& config) {
  ensure_out_dir(config);
  const auto paths = PipelinePaths::under(config.out_dir);
  DatasetHandle train = load_dataset(config.dataset, "train", config.data_dir,
                                     config.subset_train, config.seed);
  Classifier classifier = load_classifier(paths.classifier_ckpt);
  Denoiser model = Denoiser::init(config.denoiser_config(static_cast<int>(train.channels())),
                                  seed_stream(config.seed, "dn-init"));
  const TrainResult result = train_denoiser(model, classifier, train, config);
  save_denoiser(paths.denoiser_ckpt, model);
  write_file(paths.denoiser_loss, loss_csv_string(result));
  append_meta(config, "train-denoiser",
              "initial_loss = " + format_num(result.epoch_losses.front()) +
                  "\nfinal_loss = " + format_num(result.epoch_losses.back()) + "\n" +
                  config.dump());
  std::printf("denoiser loss: %.6f -> %.6f\n", result.epoch_losses.front(),
              result.epoch_losses.back());
}

void cmd_retrain(const RunConfig& config) {
  ensure_out_dir(config);
  const auto paths = PipelinePaths::under(config.out_dir);
  DatasetHandle train = load_dataset(config.dataset, "train", config.data_dir,
                                     config.subset_train, config.seed);
  Classifier model = load_classifier(paths.classifier_ckpt);
  Denoiser denoiser = load_denoiser(paths.denoiser_ckpt);
  const TrainResult result = retrain_classifier(model, denoiser, train, config);
  save_classifier(paths.retrained_ckpt, model);
  write_file(paths.retrain_loss, loss_csv_string(result));
  append_meta(config, "retrain",
              "final_loss = " + format_num(result.epoch_losses.back()) + "\n" + config.dump());
  std::printf("retraining loss: %.6f -> %.6f\n", result.epoch_losses.front(),
              result.epoch_losses.back());
}

EvalReport cmd_attack_eval(const RunConfig& config) {
  ensure_out_dir(config);
  const auto paths = PipelinePaths::under(config.out_dir);
  DatasetHandle test = load_dataset(config.dataset, "test", config.data_dir,
                                    config.subset_test, config.seed);
  Classifier classifier = load_classifier(paths.classifier_ckpt);

  std::optional<Denoiser> denoiser;
  if (std::filesystem::exists(paths.denoiser_ckpt)) {
    denoiser = load_denoiser(paths.denoiser_ckpt);
  }
  std::optional<Classifier> retrained;
  if (std::filesystem::exists(paths.retrained_ckpt)) {
    retrained = load_classifier(paths.retrained_ckpt);
  }

  const EvalReport report = evaluate(test, classifier,
                                     denoiser ? &*denoiser : nullptr,
                                     retrained ? &*retrained : nullptr,
                                     config.eval_attacks(), config);
  {
    std::ostringstream os;
    write_report_csv(report, os);
    write_file(paths.report_csv, os.str());
  }
  {
    std::ostringstream os;
    write_subband_csv(report, os);
    write_file(paths.subband_csv, os.str());
  }
  append_meta(config, "attack-eval", config.dump());
  for (const auto& row : report.rows) {
    std::printf("%-7s eps=%-5g clean=%s attacked=%s defended=%s retrained=%s\n",
                row.attack.c_str(), row.epsilon, format_acc(row.clean_acc).c_str(),
                format_acc(row.attacked_acc).c_str(),
                row.defended_acc ? format_acc(*row.defended_acc).c_str() : "-",
                row.defended_retrained_acc ? format_acc(*row.defended_retrained_acc).c_str()
                                           : "-");
  }
  return report;
}

void cmd_analyze_subbands(const RunConfig& config) {
  ensure_out_dir(config);
  const auto paths = PipelinePaths::under(config.out_dir);
  DatasetHandle test = load_dataset(config.dataset, "test", config.data_dir,
                                    config.subset_test, config.seed);
  Classifier classifier = load_classifier(paths.classifier_ckpt);
  const EvalReport report =
      evaluate(test, classifier, nullptr, nullptr, config.eval_attacks(), config);
  std::ostringstream os;
  write_subband_csv(report, os);
  write_file(paths.subband_csv, os.str());
  append_meta(config, "analyze-subbands", config.dump());
  for (const auto& row : report.rows) {
    std::printf("%-7s ll=%.4f lh=%.4f hl=%.4f hh=%.4f\n", row.attack.c_str(),
                row.subbands.ll_fraction, row.subbands.lh_fraction, row.subbands.hl_fraction,
                row.subbands.hh_fraction);
  }
}

void cmd_ablate(const RunConfig& config, const std::string& which) {
  ensure_out_dir(config);
  const auto paths = PipelinePaths::under(config.out_dir);
  DatasetHandle train = load_dataset(config.dataset, "train", config.data_dir,
                                     config.subset_train, config.seed);
  DatasetHandle test = load_dataset(config.dataset, "test", config.data_dir,
                                    config.subset_test, config.seed);
  const auto attacks = config.eval_attacks();

  if (which == "retrain") {
    Classifier classifier = load_classifier(paths.classifier_ckpt);
    Denoiser denoiser = load_denoiser(paths.denoiser_ckpt);
    Classifier retrained = load_classifier(paths.retrained_ckpt);
    const auto rows = ablation_retrain(test, classifier, denoiser, retrained, attacks, config);
    std::ostringstream os;
    write_ablation_csv(rows, config.dataset, os);
    write_file(config.out_dir + "/ablation_retrain.csv", os.str());
    append_meta(config, "ablate-retrain", config.dump());
    return;
  }
  if (which == "heads") {
    // Trains one full arm per head count; every arm gets its own classifier,
    // denoiser and retrained classifier under the same seed.
    std::vector<AblationRow> rows;
    for (int head_count : {1, 4}) {
      RunConfig arm = config;
      arm.heads = head_count;
      Classifier classifier = Classifier::init(static_cast<int>(train.channels()),
                                               seed_stream(arm.seed, "cls-init"));
      train_classifier(classifier, train, arm);
      Denoiser denoiser = Denoiser::init(
          arm.denoiser_config(static_cast<int>(train.channels())),
          seed_stream(arm.seed, "dn-init"));
      train_denoiser(denoiser, classifier, train, arm);
      // Tensor handles share buffers, so the retrained arm needs a deep copy.
      Classifier retrained = Classifier::init(classifier.image_channels, 0);
      {
        NamedTensors src = named_params(classifier);
        NamedTensors dst = named_params(retrained);
        assign_named_tensors(src, dst);
      }
      retrain_classifier(retrained, denoiser, train, arm);
      EvalReport report = evaluate(test, classifier, &denoiser, &retrained, attacks, arm);
      for (const auto& row : report.rows) {
        rows.push_back(AblationRow{"heads", "heads_" + std::to_string(head_count), row,
                                   row.defended_retrained_acc.value_or(0.0)});
      }
    }
    std::ostringstream os;
    write_ablation_csv(rows, config.dataset, os);
    write_file(config.out_dir + "/ablation_heads.csv", os.str());
    append_meta(config, "ablate-heads", config.dump());
    return;
  }
  throw ValueError("unknown ablation '" + which + "' (expected retrain|heads)");
}

}  // namespace wavedef
