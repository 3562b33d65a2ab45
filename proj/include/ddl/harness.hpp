#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ddl/attacks.hpp"
#include "ddl/data_io.hpp"
#include "ddl/denoise.hpp"
#include "ddl/dictionary.hpp"
#include "ddl/metrics.hpp"
#include "ddl/mlp.hpp"

namespace ddl {

enum class AttackKind { Fgsm, Jsma };
std::string to_string(AttackKind kind);

/// Everything a CLI invocation can set. Field defaults are the desk-scale
/// protocol; `apply_setting` maps flag / config-file keys onto fields.
struct ExperimentConfig {
  std::string dataset = "mnist";  // mnist | cifar10 | synthetic
  std::filesystem::path data_dir;
  std::size_t train_n = 2000;
  std::size_t test_n = 500;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::filesystem::path output_dir = "out";
  std::filesystem::path model_path;       // default <out>/model.ddlw
  std::filesystem::path dictionary_path;  // default <out>/dictionary.ddl1
  bool quiet = false;

  TrainConfig train;
  std::vector<std::size_t> hidden = {784, 256};

  std::vector<AttackKind> attacks = {AttackKind::Fgsm};
  double epsilon = 0.3;
  FgsmVariant fgsm_variant = FgsmVariant::Sign;
  JsmaConfig jsma;
  std::size_t jsma_n = 100;

  std::filesystem::path input;  // dataset file consumed by attack / denoise / learn-dict
  std::filesystem::path clean;
  std::filesystem::path perturbed;
  std::filesystem::path denoised;
  std::string attack_name;  // label for a standalone evaluate

  Provenance dict_source = Provenance::CleanTrain;
  DictLearnConfig dict;  // num_atoms 0 = 38 for gray, 2 for colour
  std::size_t dict_patches = 20000;  // random patch subsample used for learning, 0 = all
  std::size_t patch_size = 8;
  bool center = true;

  CoderConfig coder;
  bool denoise_clean = false;
  MetricOptions metrics;

  ExperimentConfig();

  std::filesystem::path model_file() const;
  std::filesystem::path dictionary_file() const;
};

// Throws Error(Usage) for unknown keys or unparsable values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
void apply_settings(ExperimentConfig& config, const KeyValues& settings);
KeyValues effective_settings(const ExperimentConfig& config);
std::vector<std::string> known_setting_keys();

struct Splits {
  LabeledDataset train;
  LabeledDataset test;
};
Splits load_splits(const ExperimentConfig& config);

// Random subsample (without replacement) of the stride-1 patches of `ds`.
Eigen::MatrixXd collect_patches(const LabeledDataset& ds, std::size_t patch_size, bool center,
                                std::size_t limit, std::uint64_t seed);

struct ReportRow {
  std::string model_name;
  std::string dataset;
  std::string attack;
  std::optional<double> epsilon;
  double clean_acc = 0.0;
  std::optional<double> perturbed_acc;
  std::optional<double> denoised_acc;
  std::optional<double> mean_psnr_perturbed;
  std::optional<double> mean_psnr_denoised;
  std::optional<double> mean_ssim_perturbed;
  std::optional<double> mean_ssim_denoised;
  std::optional<double> clean_denoised_acc;
  std::string dictionary_source;
  double wall_time_s = 0.0;
};

// report.csv (4-decimal fixed) and report.json carrying the same rounded values.
void write_report(const std::vector<ReportRow>& rows, const std::filesystem::path& dir);
std::vector<ReportRow> read_report_json(const std::filesystem::path& path);

std::vector<EpochLog> cmd_train(const ExperimentConfig& config);

struct AttackOutputs {
  std::filesystem::path clean;
  std::filesystem::path perturbed;
  std::vector<AttackResult> results;
};
AttackOutputs cmd_attack(const ExperimentConfig& config, AttackKind kind);

Dictionary cmd_learn_dict(const ExperimentConfig& config);

struct DenoiseOutputs {
  std::filesystem::path denoised;
  std::vector<std::optional<QualityReport>> quality;
};
DenoiseOutputs cmd_denoise(const ExperimentConfig& config);

ReportRow cmd_evaluate(const ExperimentConfig& config);

std::vector<ReportRow> cmd_pipeline(const ExperimentConfig& config);

}  // namespace ddl
