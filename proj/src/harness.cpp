#include "ddl/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "ddl/error.hpp"
#include "ddl/parallel.hpp"
#include "ddl/patches.hpp"

#ifndef DDL_DEFAULT_DATA_DIR
#define DDL_DEFAULT_DATA_DIR "data/mnist"
#endif

namespace ddl {
namespace {

using Clock = std::chrono::steady_clock;

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(ErrorCode::Usage, "invalid value '" + value + "' for " + key);
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  try {
    if (!value.empty() && value[0] == '-') bad_value(key, value);
    const auto v = std::stoull(value, &used);
    if (used == value.size()) return v;
  } catch (const std::logic_error&) {
  }
  bad_value(key, value);
}

double to_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  try {
    const double v = std::stod(value, &used);
    if (used == value.size() && std::isfinite(v)) return v;
  } catch (const std::logic_error&) {
  }
  bad_value(key, value);
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  bad_value(key, value);
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream in(value);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(static_cast<std::size_t>(to_u64(key, item)));
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"dataset",
       [](auto& c, auto& k, auto& v) {
         if (v != "mnist" && v != "cifar10" && v != "synthetic") bad_value(k, v);
         c.dataset = v;
       }},
      {"data-dir", [](auto& c, auto&, auto& v) { c.data_dir = v; }},
      {"train-n", [](auto& c, auto& k, auto& v) { c.train_n = to_u64(k, v); }},
      {"test-n", [](auto& c, auto& k, auto& v) { c.test_n = to_u64(k, v); }},
      {"seed", [](auto& c, auto& k, auto& v) { c.seed = to_u64(k, v); }},
      {"threads", [](auto& c, auto& k, auto& v) { c.threads = std::max<std::size_t>(1, to_u64(k, v)); }},
      {"out", [](auto& c, auto&, auto& v) { c.output_dir = v; }},
      {"model", [](auto& c, auto&, auto& v) { c.model_path = v; }},
      {"dictionary", [](auto& c, auto&, auto& v) { c.dictionary_path = v; }},
      {"quiet", [](auto& c, auto& k, auto& v) { c.quiet = to_bool(k, v); }},
      {"epochs", [](auto& c, auto& k, auto& v) { c.train.epochs = to_u64(k, v); }},
      {"batch-size", [](auto& c, auto& k, auto& v) { c.train.batch_size = to_u64(k, v); }},
      {"lr", [](auto& c, auto& k, auto& v) { c.train.learning_rate = to_double(k, v); }},
      {"hidden", [](auto& c, auto& k, auto& v) { c.hidden = to_sizes(k, v); }},
      {"attack",
       [](auto& c, auto& k, auto& v) {
         if (v == "fgsm") c.attacks = {AttackKind::Fgsm};
         else if (v == "jsma") c.attacks = {AttackKind::Jsma};
         else if (v == "both") c.attacks = {AttackKind::Fgsm, AttackKind::Jsma};
         else bad_value(k, v);
       }},
      {"kind",
       [](auto& c, auto& k, auto& v) {
         if (v == "fgsm") c.attacks = {AttackKind::Fgsm};
         else if (v == "jsma") c.attacks = {AttackKind::Jsma};
         else bad_value(k, v);
       }},
      {"epsilon",
       [](auto& c, auto& k, auto& v) {
         const double e = to_double(k, v);
         if (e < 0.0 || e > 1.0) bad_value(k, v);
         c.epsilon = e;
       }},
      {"fgsm-variant",
       [](auto& c, auto& k, auto& v) {
         if (v == "sign") c.fgsm_variant = FgsmVariant::Sign;
         else if (v == "raw" || v == "raw-gradient") c.fgsm_variant = FgsmVariant::RawGradient;
         else bad_value(k, v);
       }},
      {"theta", [](auto& c, auto& k, auto& v) { c.jsma.theta = to_double(k, v); }},
      {"budget", [](auto& c, auto& k, auto& v) { c.jsma.max_features = to_u64(k, v); }},
      {"target",
       [](auto& c, auto& k, auto& v) {
         if (v == "next" || v == "next-class") c.jsma.fixed_target.reset();
         else c.jsma.fixed_target = static_cast<int>(to_u64(k, v));
       }},
      {"jacobian",
       [](auto& c, auto& k, auto& v) {
         if (v == "softmax") c.jsma.jacobian = JacobianOutput::Softmax;
         else if (v == "logits") c.jsma.jacobian = JacobianOutput::Logits;
         else bad_value(k, v);
       }},
      {"jsma-n", [](auto& c, auto& k, auto& v) { c.jsma_n = to_u64(k, v); }},
      {"input", [](auto& c, auto&, auto& v) { c.input = v; }},
      {"clean", [](auto& c, auto&, auto& v) { c.clean = v; }},
      {"perturbed", [](auto& c, auto&, auto& v) { c.perturbed = v; }},
      {"denoised", [](auto& c, auto&, auto& v) { c.denoised = v; }},
      {"attack-name", [](auto& c, auto&, auto& v) { c.attack_name = v; }},
      {"source",
       [](auto& c, auto& k, auto& v) {
         try {
           c.dict_source = parse_provenance(v);
         } catch (const Error&) {
           bad_value(k, v);
         }
       }},
      {"atoms", [](auto& c, auto& k, auto& v) { c.dict.num_atoms = to_u64(k, v); }},
      {"lambda", [](auto& c, auto& k, auto& v) { c.dict.lambda = to_double(k, v); }},
      {"dict-epochs", [](auto& c, auto& k, auto& v) { c.dict.epochs = to_u64(k, v); }},
      {"dict-batch", [](auto& c, auto& k, auto& v) { c.dict.batch_size = to_u64(k, v); }},
      {"dict-patches", [](auto& c, auto& k, auto& v) { c.dict_patches = to_u64(k, v); }},
      {"patch-size", [](auto& c, auto& k, auto& v) { c.patch_size = to_u64(k, v); }},
      {"no-center", [](auto& c, auto& k, auto& v) { c.center = !to_bool(k, v); }},
      {"sparsity", [](auto& c, auto& k, auto& v) { c.coder.sparsity = to_u64(k, v); }},
      {"omp-tol", [](auto& c, auto& k, auto& v) { c.coder.omp_relative_tol = to_double(k, v); }},
      {"denoise-clean", [](auto& c, auto& k, auto& v) { c.denoise_clean = to_bool(k, v); }},
      {"psnr-fixed-peak", [](auto& c, auto& k, auto& v) { c.metrics.fixed_peak = to_bool(k, v); }},
      {"per-channel",
       [](auto& c, auto& k, auto& v) {
         c.metrics.color = to_bool(k, v) ? ColorReduction::PerChannel : ColorReduction::ChannelMean;
       }},
  };
  return table;
}

void progress(const ExperimentConfig& config, const std::string& message) {
  if (!config.quiet) std::cerr << "[ddl] " << message << '\n';
}

std::filesystem::path locate(const std::filesystem::path& dir, const std::string& name) {
  for (const auto& candidate : {dir / name, dir / (name + ".gz")}) {
    if (std::filesystem::exists(candidate)) return candidate;
  }
  throw Error(ErrorCode::Io, "cannot find " + name + "[.gz] in " + dir.string());
}

std::filesystem::path resolve_data_dir(const ExperimentConfig& config) {
  if (!config.data_dir.empty()) return config.data_dir;
  if (const char* env = std::getenv("DDL_DATA_DIR"); env && *env) return env;
  return DDL_DEFAULT_DATA_DIR;
}

void prepare_output(const ExperimentConfig& config) {
  std::filesystem::create_directories(config.output_dir);
  write_key_values(config.output_dir / "effective_config.txt", effective_settings(config));
}

LabeledDataset dataset_or_test(const ExperimentConfig& config, const std::filesystem::path& path) {
  return path.empty() ? load_splits(config).test : load_dataset(path);
}

std::optional<double> attack_magnitude(const ExperimentConfig& config, const std::string& attack) {
  if (attack == "fgsm") return config.epsilon;
  if (attack == "jsma") return config.jsma.theta;
  return std::nullopt;
}

std::string cell(const std::optional<double>& v) { return v ? fixed(*v, 4) : ""; }

nlohmann::json json_cell(const std::optional<double>& v) {
  if (!v) return nullptr;
  return std::stod(fixed(*v, 4));
}

std::optional<double> from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::string to_string(AttackKind kind) { return kind == AttackKind::Fgsm ? "fgsm" : "jsma"; }

ExperimentConfig::ExperimentConfig() {
  dict.num_atoms = 0;
  coder.mode = CoderMode::Omp;
  coder.sparsity = 5;
}

std::filesystem::path ExperimentConfig::model_file() const {
  return model_path.empty() ? output_dir / "model.ddlw" : model_path;
}

std::filesystem::path ExperimentConfig::dictionary_file() const {
  return dictionary_path.empty() ? output_dir / "dictionary.ddl1" : dictionary_path;
}

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw Error(ErrorCode::Usage, "unknown setting '" + key + "'");
  it->second(config, key, value);
}

void apply_settings(ExperimentConfig& config, const KeyValues& settings) {
  for (const auto& [key, value] : settings) apply_setting(config, key, value);
}

std::vector<std::string> known_setting_keys() {
  std::vector<std::string> keys;
  for (const auto& entry : setters()) keys.push_back(entry.first);
  return keys;
}

KeyValues effective_settings(const ExperimentConfig& c) {
  const std::string attacks = c.attacks.size() > 1 ? "both" : to_string(c.attacks.front());
  return {
      {"dataset", c.dataset},
      {"data-dir", resolve_data_dir(c).string()},
      {"train-n", std::to_string(c.train_n)},
      {"test-n", std::to_string(c.test_n)},
      {"seed", std::to_string(c.seed)},
      {"threads", std::to_string(c.threads)},
      {"out", c.output_dir.string()},
      {"model", c.model_file().string()},
      {"dictionary", c.dictionary_file().string()},
      {"epochs", std::to_string(c.train.epochs)},
      {"batch-size", std::to_string(c.train.batch_size)},
      {"lr", exact(c.train.learning_rate)},
      {"hidden", join(c.hidden)},
      {"attack", attacks},
      {"epsilon", exact(c.epsilon)},
      {"fgsm-variant", c.fgsm_variant == FgsmVariant::Sign ? "sign" : "raw-gradient"},
      {"theta", exact(c.jsma.theta)},
      {"budget", std::to_string(c.jsma.max_features)},
      {"target", c.jsma.fixed_target ? std::to_string(*c.jsma.fixed_target) : "next"},
      {"jacobian", c.jsma.jacobian == JacobianOutput::Softmax ? "softmax" : "logits"},
      {"jsma-n", std::to_string(c.jsma_n)},
      {"input", c.input.string()},
      {"clean", c.clean.string()},
      {"perturbed", c.perturbed.string()},
      {"denoised", c.denoised.string()},
      {"source", to_string(c.dict_source)},
      {"atoms", c.dict.num_atoms ? std::to_string(c.dict.num_atoms) : "auto"},
      {"lambda", exact(c.dict.lambda)},
      {"dict-epochs", std::to_string(c.dict.epochs)},
      {"dict-batch", std::to_string(c.dict.batch_size)},
      {"dict-patches", std::to_string(c.dict_patches)},
      {"patch-size", std::to_string(c.patch_size)},
      {"no-center", c.center ? "false" : "true"},
      {"sparsity", std::to_string(c.coder.sparsity)},
      {"omp-tol", exact(c.coder.omp_relative_tol)},
      {"denoise-clean", c.denoise_clean ? "true" : "false"},
      {"psnr-fixed-peak", c.metrics.fixed_peak ? "true" : "false"},
      {"per-channel", c.metrics.color == ColorReduction::PerChannel ? "true" : "false"},
  };
}

Splits load_splits(const ExperimentConfig& config) {
  Splits splits;
  if (config.dataset == "synthetic") {
    const Shape shape{16, 16, 1};
    splits.train = synthesize_dataset(config.seed, std::max<std::size_t>(config.train_n, 10), shape, 10);
    splits.test = synthesize_dataset(config.seed + 1, std::max<std::size_t>(config.test_n, 10), shape, 10);
  } else if (config.dataset == "mnist") {
    const auto dir = resolve_data_dir(config);
    splits.train = load_idx(locate(dir, "train-images-idx3-ubyte"), locate(dir, "train-labels-idx1-ubyte"));
    splits.test = load_idx(locate(dir, "t10k-images-idx3-ubyte"), locate(dir, "t10k-labels-idx1-ubyte"));
  } else if (config.dataset == "cifar10") {
    const auto dir = resolve_data_dir(config);
    std::vector<std::filesystem::path> batches;
    for (int b = 1; b <= 5; ++b) {
      const auto p = dir / ("data_batch_" + std::to_string(b) + ".bin");
      if (std::filesystem::exists(p)) batches.push_back(p);
    }
    if (batches.empty()) throw Error(ErrorCode::Io, "no CIFAR-10 training batches in " + dir.string());
    splits.train = load_cifar_binary(batches);
    splits.test = load_cifar_binary({dir / "test_batch.bin"});
  } else {
    throw Error(ErrorCode::Usage, "unknown dataset " + config.dataset);
  }
  splits.train = take_first(splits.train, config.train_n);
  splits.test = take_first(splits.test, config.test_n);
  return splits;
}

Eigen::MatrixXd collect_patches(const LabeledDataset& ds, std::size_t patch_size, bool center,
                                std::size_t limit, std::uint64_t seed) {
  std::vector<PatchMatrix> parts;
  parts.reserve(ds.size());
  for (const auto& img : ds.images) parts.push_back(extract_patches(img, patch_size, center));
  Eigen::MatrixXd all = stack_patches(parts);
  if (limit == 0 || static_cast<std::size_t>(all.cols()) <= limit) return all;
  std::vector<Eigen::Index> pick(static_cast<std::size_t>(all.cols()));
  std::iota(pick.begin(), pick.end(), Eigen::Index{0});
  Rng rng(seed);
  rng.shuffle(pick);
  pick.resize(limit);
  std::sort(pick.begin(), pick.end());
  Eigen::MatrixXd subset(all.rows(), static_cast<Eigen::Index>(limit));
  for (std::size_t i = 0; i < limit; ++i) subset.col(static_cast<Eigen::Index>(i)) = all.col(pick[i]);
  return subset;
}

void write_report(const std::vector<ReportRow>& rows, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "report.csv", std::ios::trunc);
  if (!csv) throw Error(ErrorCode::Io, "cannot write report.csv in " + dir.string());
  csv << "model_name,dataset,attack,epsilon,clean_acc,perturbed_acc,denoised_acc,"
         "mean_psnr_perturbed,mean_psnr_denoised,mean_ssim_perturbed,mean_ssim_denoised,"
         "clean_denoised_acc,dictionary_source,wall_time_s\n";
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    csv << r.model_name << ',' << r.dataset << ',' << r.attack << ',' << cell(r.epsilon) << ','
        << fixed(r.clean_acc, 4) << ',' << cell(r.perturbed_acc) << ',' << cell(r.denoised_acc)
        << ',' << cell(r.mean_psnr_perturbed) << ',' << cell(r.mean_psnr_denoised) << ','
        << cell(r.mean_ssim_perturbed) << ',' << cell(r.mean_ssim_denoised) << ','
        << cell(r.clean_denoised_acc) << ',' << r.dictionary_source << ','
        << fixed(r.wall_time_s, 4) << '\n';
    rows_json.push_back({
        {"model_name", r.model_name},
        {"dataset", r.dataset},
        {"attack", r.attack},
        {"epsilon", json_cell(r.epsilon)},
        {"clean_acc", json_cell(r.clean_acc)},
        {"perturbed_acc", json_cell(r.perturbed_acc)},
        {"denoised_acc", json_cell(r.denoised_acc)},
        {"mean_psnr_perturbed", json_cell(r.mean_psnr_perturbed)},
        {"mean_psnr_denoised", json_cell(r.mean_psnr_denoised)},
        {"mean_ssim_perturbed", json_cell(r.mean_ssim_perturbed)},
        {"mean_ssim_denoised", json_cell(r.mean_ssim_denoised)},
        {"clean_denoised_acc", json_cell(r.clean_denoised_acc)},
        {"dictionary_source", r.dictionary_source},
        {"wall_time_s", json_cell(r.wall_time_s)},
    });
  }
  std::ofstream json(dir / "report.json", std::ios::trunc);
  if (!json) throw Error(ErrorCode::Io, "cannot write report.json in " + dir.string());
  json << nlohmann::json{{"rows", rows_json}}.dump(2) << '\n';
}

std::vector<ReportRow> read_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  const auto doc = nlohmann::json::parse(in);
  std::vector<ReportRow> rows;
  for (const auto& j : doc.at("rows")) {
    ReportRow r;
    r.model_name = j.at("model_name");
    r.dataset = j.at("dataset");
    r.attack = j.at("attack");
    r.epsilon = from_json(j.at("epsilon"));
    r.clean_acc = j.at("clean_acc").get<double>();
    r.perturbed_acc = from_json(j.at("perturbed_acc"));
    r.denoised_acc = from_json(j.at("denoised_acc"));
    r.mean_psnr_perturbed = from_json(j.at("mean_psnr_perturbed"));
    r.mean_psnr_denoised = from_json(j.at("mean_psnr_denoised"));
    r.mean_ssim_perturbed = from_json(j.at("mean_ssim_perturbed"));
    r.mean_ssim_denoised = from_json(j.at("mean_ssim_denoised"));
    r.clean_denoised_acc = from_json(j.at("clean_denoised_acc"));
    r.dictionary_source = j.at("dictionary_source");
    r.wall_time_s = j.at("wall_time_s").get<double>();
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<EpochLog> cmd_train(const ExperimentConfig& config) {
  prepare_output(config);
  const Splits splits = load_splits(config);
  if (splits.train.empty()) throw Error(ErrorCode::InvalidArgument, "training split is empty");

  std::vector<std::size_t> sizes = {splits.train.images.front().size()};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(static_cast<std::size_t>(splits.train.num_classes));
  // Dropout 0.5 on the input and 0.2 after the first hidden layer.
  std::vector<double> dropouts(sizes.size() - 1, 0.0);
  dropouts[0] = 0.5;
  if (dropouts.size() > 2) dropouts[1] = 0.2;
  MlpModel model = make_mlp(sizes, dropouts, config.seed);

  TrainConfig train_config = config.train;
  train_config.seed = config.seed;
  std::vector<EpochLog> log;
  if (train_config.epochs > 0) {
    progress(config, "training " + std::to_string(train_config.epochs) + " epochs on " +
                         std::to_string(splits.train.size()) + " images");
    log = train(model, splits.train, train_config, &splits.test);
  }
  save_model(model, config.model_file());

  std::ofstream csv(config.output_dir / "train_log.csv", std::ios::trunc);
  csv << "epoch,loss,train_acc,test_acc\n";
  for (const auto& e : log) {
    csv << e.epoch << ',' << fixed(e.loss, 6) << ',' << fixed(e.train_acc, 6) << ','
        << (e.test_acc ? fixed(*e.test_acc, 6) : "") << '\n';
  }
  if (!log.empty()) {
    progress(config, "final train_acc " + fixed(log.back().train_acc, 4) + " test_acc " +
                         (log.back().test_acc ? fixed(*log.back().test_acc, 4) : "-"));
  }
  return log;
}

AttackOutputs cmd_attack(const ExperimentConfig& config, AttackKind kind) {
  prepare_output(config);
  const MlpModel model = load_model(config.model_file());
  LabeledDataset clean = dataset_or_test(config, config.input);
  if (kind == AttackKind::Jsma) clean = take_first(clean, config.jsma_n);
  const std::string name = to_string(kind);
  progress(config, name + " on " + std::to_string(clean.size()) + " images");

  std::vector<AttackResult> results(clean.size());
  parallel_for(clean.size(), config.threads, [&](std::size_t i) {
    results[i] = kind == AttackKind::Fgsm
                     ? fgsm_perturb(model, clean.images[i], clean.labels[i], config.epsilon,
                                    config.fgsm_variant)
                     : jsma_attack(model, clean.images[i], clean.labels[i], config.jsma);
  });

  LabeledDataset perturbed;
  perturbed.num_classes = clean.num_classes;
  perturbed.labels = clean.labels;
  std::ofstream csv(config.output_dir / ("attack_" + name + ".csv"), std::ios::trunc);
  csv << "index,label,target,prediction,success,targeted_success,features_changed,"
         "distinct_features,iterations,linf\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    double linf = 0.0;
    for (std::size_t p = 0; p < r.adversarial.size(); ++p) {
      linf = std::max(linf, std::abs(r.adversarial.pixels[p] - clean.images[i].pixels[p]));
    }
    csv << i << ',' << clean.labels[i] << ',' << r.target << ',' << r.prediction << ','
        << r.success << ',' << r.targeted_success << ',' << r.features_changed << ','
        << r.distinct_features << ',' << r.iterations << ',' << fixed(linf, 6) << '\n';
    perturbed.images.push_back(r.adversarial);
  }

  AttackOutputs out;
  out.clean = config.output_dir / ("clean_" + name + ".ddl1");
  out.perturbed = config.output_dir / ("perturbed_" + name + ".ddl1");
  save_dataset(clean, out.clean);
  save_dataset(perturbed, out.perturbed);
  out.results = std::move(results);
  return out;
}

Dictionary cmd_learn_dict(const ExperimentConfig& config) {
  prepare_output(config);
  LabeledDataset source;
  if (config.dict_source == Provenance::CleanTrain) {
    source = load_splits(config).train;
  } else {
    if (config.input.empty()) {
      throw Error(ErrorCode::Usage, "--source perturbed needs --input <perturbed dataset>");
    }
    source = load_dataset(config.input);
  }
  if (source.empty()) throw Error(ErrorCode::NotEnoughPatches, "source dataset is empty");

  DictLearnConfig dict_config = config.dict;
  dict_config.seed = config.seed;
  if (dict_config.num_atoms == 0) dict_config.num_atoms = source.images.front().channels == 1 ? 38 : 2;
  const Eigen::MatrixXd patches =
      collect_patches(source, config.patch_size, config.center, config.dict_patches, config.seed);
  progress(config, "learning " + std::to_string(dict_config.num_atoms) + " atoms from " +
                       std::to_string(patches.cols()) + " patches");

  std::vector<EpochReport> epochs;
  LearnObserver observer;
  observer.on_epoch = [&](const EpochReport& r) {
    epochs.push_back(r);
    progress(config, "  epoch " + std::to_string(r.epoch) + " mean reconstruction error " +
                         fixed(r.mean_reconstruction_error, 6));
  };
  const Dictionary dict = learn_dictionary(patches, dict_config, config.dict_source, observer);
  save_dictionary(dict, config.dictionary_file());

  std::ofstream csv(config.output_dir / "dict_log.csv", std::ios::trunc);
  csv << "epoch,mean_reconstruction_error\n";
  for (const auto& e : epochs) csv << e.epoch << ',' << fixed(e.mean_reconstruction_error, 8) << '\n';
  return dict;
}

DenoiseOutputs cmd_denoise(const ExperimentConfig& config) {
  prepare_output(config);
  if (config.input.empty()) throw Error(ErrorCode::Usage, "denoise needs --input <dataset>");
  const Dictionary dict = load_dictionary(config.dictionary_file());
  const LabeledDataset noisy = load_dataset(config.input);
  std::optional<LabeledDataset> reference;
  if (!config.clean.empty()) {
    reference = load_dataset(config.clean);
    if (reference->size() != noisy.size()) {
      throw Error(ErrorCode::LengthMismatch, "--clean and --input hold different image counts");
    }
  }

  DenoiseConfig denoise_config;
  denoise_config.coder = config.coder;
  denoise_config.patch_size = config.patch_size;
  denoise_config.center = config.center;
  denoise_config.threads = config.threads;
  progress(config, "denoising " + std::to_string(noisy.size()) + " images");
  const LabeledDataset denoised = denoise_dataset(noisy, dict.atoms, denoise_config);

  DenoiseOutputs out;
  out.denoised = config.output_dir / ("denoised_" + config.input.stem().string() + ".ddl1");
  save_dataset(denoised, out.denoised);

  std::ofstream csv(config.output_dir / ("denoise_" + config.input.stem().string() + "_quality.csv"),
                    std::ios::trunc);
  csv << "index,psnr_noisy,psnr_denoised,ssim_noisy,ssim_denoised\n";
  for (std::size_t i = 0; i < denoised.size(); ++i) {
    csv << i << ',';
    if (reference) {
      const auto before = quality(reference->images[i], noisy.images[i], config.metrics);
      const auto after = quality(reference->images[i], denoised.images[i], config.metrics);
      csv << fixed(report_psnr(before.psnr_db), 4) << ',' << fixed(report_psnr(after.psnr_db), 4)
          << ',' << fixed(before.ssim, 4) << ',' << fixed(after.ssim, 4) << '\n';
      out.quality.push_back(after);
    } else {
      csv << ",,,\n";
      out.quality.push_back(std::nullopt);
    }
  }
  return out;
}

ReportRow cmd_evaluate(const ExperimentConfig& config) {
  prepare_output(config);
  const auto start = Clock::now();
  const MlpModel model = load_model(config.model_file());
  const LabeledDataset clean = dataset_or_test(config, config.clean);
  std::optional<LabeledDataset> perturbed, denoised;
  if (!config.perturbed.empty()) perturbed = load_dataset(config.perturbed);
  if (!config.denoised.empty()) denoised = load_dataset(config.denoised);

  const AccuracyRow acc = accuracy_table(model, clean, perturbed ? &*perturbed : nullptr,
                                         denoised ? &*denoised : nullptr, config.metrics);
  ReportRow row;
  row.model_name = config.model_file().stem().string();
  row.dataset = config.dataset;
  row.attack = config.attack_name.empty() ? (perturbed ? "unknown" : "none") : config.attack_name;
  row.epsilon = attack_magnitude(config, row.attack);
  row.clean_acc = acc.clean_acc;
  row.perturbed_acc = acc.perturbed_acc;
  row.denoised_acc = acc.denoised_acc;
  row.mean_psnr_perturbed = acc.mean_psnr_perturbed;
  row.mean_psnr_denoised = acc.mean_psnr_denoised;
  row.mean_ssim_perturbed = acc.mean_ssim_perturbed;
  row.mean_ssim_denoised = acc.mean_ssim_denoised;
  row.dictionary_source = denoised ? to_string(config.dict_source) : "";
  row.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
  write_report({row}, config.output_dir);
  return row;
}

std::vector<ReportRow> cmd_pipeline(const ExperimentConfig& config) {
  prepare_output(config);
  cmd_train(config);

  std::vector<ReportRow> rows;
  std::optional<Dictionary> shared_dict;
  for (AttackKind kind : config.attacks) {
    const auto start = Clock::now();
    const std::string name = to_string(kind);
    const AttackOutputs attacked = cmd_attack(config, kind);

    ExperimentConfig stage = config;
    if (config.dict_source == Provenance::CleanTrain) {
      if (!shared_dict) shared_dict = cmd_learn_dict(stage);
    } else {
      stage.input = attacked.perturbed;
      stage.dictionary_path = config.output_dir / ("dictionary_" + name + ".ddl1");
      cmd_learn_dict(stage);
    }

    stage.input = attacked.perturbed;
    stage.clean = attacked.clean;
    const DenoiseOutputs denoised = cmd_denoise(stage);

    std::optional<double> clean_denoised_acc;
    if (config.denoise_clean) {
      stage.input = attacked.clean;
      stage.clean.clear();
      const DenoiseOutputs clean_denoised = cmd_denoise(stage);
      clean_denoised_acc = evaluate_accuracy(load_model(config.model_file()),
                                             load_dataset(clean_denoised.denoised));
    }

    stage.clean = attacked.clean;
    stage.perturbed = attacked.perturbed;
    stage.denoised = denoised.denoised;
    stage.attack_name = name;
    ReportRow row = cmd_evaluate(stage);
    row.clean_denoised_acc = clean_denoised_acc;
    row.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
    progress(config, name + ": clean " + fixed(row.clean_acc, 4) + " perturbed " +
                         cell(row.perturbed_acc) + " denoised " + cell(row.denoised_acc) +
                         " psnr " + cell(row.mean_psnr_perturbed) + " -> " +
                         cell(row.mean_psnr_denoised));
    rows.push_back(std::move(row));
  }
  write_report(rows, config.output_dir);
  return rows;
}

}  // namespace ddl
