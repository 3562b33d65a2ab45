// ddl: train / attack / learn-dict / denoise / evaluate / pipeline.
#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "ddl/error.hpp"
#include "ddl/harness.hpp"

namespace {

struct OptionSpec {
  const char* key;
  const char* help;
  bool is_flag = false;
};

const std::vector<OptionSpec> kShared = {
    {"config", "key=value file; flags override it"},
    {"seed", "seed for every stochastic component"},
    {"out", "output directory"},
    {"threads", "worker cap for per-image work"},
    {"dataset", "mnist | cifar10 | synthetic"},
    {"data-dir", "directory with the raw dataset files"},
    {"train-n", "training subset size"},
    {"test-n", "test subset size"},
    {"model", "model file (default <out>/model.ddlw)"},
    {"dictionary", "dictionary file (default <out>/dictionary.ddl1)"},
    {"quiet", "no progress output", true},
};

const std::vector<OptionSpec> kTrain = {
    {"epochs", "training epochs"},
    {"batch-size", "mini-batch size"},
    {"lr", "Adam learning rate"},
    {"hidden", "comma separated hidden widths"},
};

const std::vector<OptionSpec> kAttack = {
    {"epsilon", "FGSM step size"},
    {"fgsm-variant", "sign | raw-gradient"},
    {"theta", "JSMA per-feature change"},
    {"budget", "JSMA feature budget"},
    {"target", "JSMA target: next | class index"},
    {"jacobian", "JSMA forward derivative: softmax | logits"},
    {"jsma-n", "number of test images attacked by JSMA"},
};

const std::vector<OptionSpec> kDict = {
    {"source", "clean | perturbed"},
    {"atoms", "number of atoms (default 38 gray, 2 colour)"},
    {"lambda", "sparsity penalty"},
    {"dict-epochs", "passes over the patch set"},
    {"dict-batch", "patches per dictionary update"},
    {"dict-patches", "patch subsample size, 0 = all"},
    {"patch-size", "square patch side"},
    {"no-center", "do not remove patch means", true},
};

const std::vector<OptionSpec> kDenoise = {
    {"sparsity", "OMP atom budget T"},
    {"omp-tol", "OMP relative residual tolerance"},
    {"patch-size", "square patch side"},
    {"no-center", "do not remove patch means", true},
};

const std::vector<OptionSpec> kMetrics = {
    {"psnr-fixed-peak", "PSNR with peak 1.0", true},
    {"per-channel", "colour metrics averaged per channel", true},
};

struct Command {
  CLI::App* app = nullptr;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;

  void add(const std::vector<OptionSpec>& specs) {
    for (const auto& spec : specs) {
      const std::string name = std::string("--") + spec.key;
      if (app->get_option_no_throw(name)) continue;
      if (spec.is_flag) {
        app->add_flag(name, flags[spec.key], spec.help);
      } else {
        app->add_option(name, values[spec.key], spec.help);
      }
    }
  }

  ddl::ExperimentConfig config() const {
    ddl::ExperimentConfig cfg;
    if (app->count("--config")) ddl::apply_settings(cfg, ddl::read_key_values(values.at("config")));
    for (const auto& [key, value] : values) {
      if (key != "config" && app->count("--" + key)) ddl::apply_setting(cfg, key, value);
    }
    for (const auto& [key, set] : flags) {
      if (set) ddl::apply_setting(cfg, key, "true");
    }
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Denoising dictionary learning against adversarial examples"};
  app.require_subcommand(1);

  std::map<std::string, Command> commands;
  auto make = [&](const std::string& name, const std::string& help) -> Command& {
    Command& cmd = commands[name];
    cmd.app = app.add_subcommand(name, help);
    cmd.add(kShared);
    return cmd;
  };

  Command& train = make("train", "train the MLP classifier");
  train.add(kTrain);

  Command& attack = make("attack", "perturb a dataset with FGSM or JSMA");
  attack.add({{"kind", "fgsm | jsma"}, {"input", "dataset to attack (default test split)"}});
  attack.add(kAttack);

  Command& learn = make("learn-dict", "learn a patch dictionary");
  learn.add({{"input", "perturbed dataset, for --source perturbed"}});
  learn.add(kDict);

  Command& denoise = make("denoise", "sparse-code and reassemble every image");
  denoise.add({{"input", "dataset to denoise"}, {"clean", "reference images for PSNR/SSIM"}});
  denoise.add(kDenoise);
  denoise.add(kMetrics);

  Command& evaluate = make("evaluate", "accuracy and quality report");
  evaluate.add({{"clean", "clean dataset (default test split)"},
                {"perturbed", "perturbed dataset"},
                {"denoised", "denoised dataset"},
                {"attack-name", "attack label for the report row"},
                {"source", "dictionary source recorded in the report"},
                {"epsilon", "FGSM step recorded in the report"},
                {"theta", "JSMA step recorded in the report"}});
  evaluate.add(kMetrics);

  Command& pipeline = make("pipeline", "train, attack, learn-dict, denoise, evaluate");
  pipeline.add({{"attack", "fgsm | jsma | both"},
                {"denoise-clean", "also report accuracy on denoised clean images", true}});
  pipeline.add(kTrain);
  pipeline.add(kAttack);
  pipeline.add(kDict);
  pipeline.add(kDenoise);
  pipeline.add(kMetrics);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e);
    return status == 0 ? 0 : 1;
  }

  try {
    for (auto& [name, cmd] : commands) {
      if (!cmd.app->parsed()) continue;
      const ddl::ExperimentConfig cfg = cmd.config();
      if (name == "train") {
        ddl::cmd_train(cfg);
      } else if (name == "attack") {
        if (cfg.attacks.size() != 1) throw ddl::Error(ddl::ErrorCode::Usage, "--kind takes one attack");
        ddl::cmd_attack(cfg, cfg.attacks.front());
      } else if (name == "learn-dict") {
        ddl::cmd_learn_dict(cfg);
      } else if (name == "denoise") {
        ddl::cmd_denoise(cfg);
      } else if (name == "evaluate") {
        ddl::cmd_evaluate(cfg);
      } else if (name == "pipeline") {
        ddl::cmd_pipeline(cfg);
      }
    }
  } catch (const ddl::Error& e) {
    std::cerr << "error [" << ddl::to_string(e.code()) << "]: " << e.what() << '\n';
    return ddl::exit_status(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
