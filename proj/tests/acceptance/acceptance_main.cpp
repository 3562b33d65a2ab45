// Prints one PASS/FAIL line per acceptance criterion and exits non-zero if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "ddl/data_io.hpp"
#include "ddl/dictionary.hpp"
#include "ddl/harness.hpp"
#include "ddl/metrics.hpp"
#include "ddl/mlp.hpp"
#include "ddl/patches.hpp"
#include "ddl/sparse_coding.hpp"
#include "oracles/frames.hpp"
#include "oracles/oracles.hpp"

using namespace ddl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "ddl_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n, double lo, double hi) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

MlpModel random_model(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> sizes = {3 + rng.below(8)};
  const std::size_t hidden = 1 + rng.below(2);
  for (std::size_t h = 0; h < hidden; ++h) sizes.push_back(4 + rng.below(10));
  sizes.push_back(2 + rng.below(8));
  MlpModel m = make_mlp(sizes, {}, seed);
  for (auto& layer : m.layers) layer.bias = random_vector(rng, layer.bias.size(), -0.3, 0.3);
  return m;
}

Outcome gradients() {
  double worst_grad = 0.0, worst_jac = 0.0;
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const MlpModel m = random_model(1000 + static_cast<std::uint64_t>(trial));
    const Eigen::VectorXd x = random_vector(rng, static_cast<Eigen::Index>(m.input_size()), 0.0, 1.0);
    const int label = static_cast<int>(rng.below(m.num_classes()));
    const auto loss = [&](const Eigen::VectorXd& v) {
      return Eigen::VectorXd::Constant(1, cross_entropy(forward(m, v), label));
    };
    const Eigen::MatrixXd numeric = oracle::numeric_jacobian(loss, x).transpose();
    worst_grad = std::max(worst_grad, oracle::relative_error(input_gradient(m, x, label), numeric));
    const auto probs = [&](const Eigen::VectorXd& v) { return forward(m, v); };
    worst_jac = std::max(worst_jac, oracle::relative_error(forward_jacobian(m, x),
                                                           oracle::numeric_jacobian(probs, x)));
  }
  return {worst_grad < 1e-5 && worst_jac < 1e-4,
          "max rel err gradient " + fmt("%.2e", worst_grad) + ", jacobian " + fmt("%.2e", worst_jac)};
}

Outcome jacobian_columns() {
  double worst = 0.0;
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const MlpModel m = random_model(2000 + static_cast<std::uint64_t>(trial));
    const Eigen::VectorXd x = random_vector(rng, static_cast<Eigen::Index>(m.input_size()), 0.0, 1.0);
    worst = std::max(worst, forward_jacobian(m, x).colwise().sum().cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-10, "max |column sum| " + fmt("%.2e", worst)};
}

// Planted T-sparse signal over a random support with coefficients bounded away from 0.
Eigen::VectorXd plant(Rng& rng, const Eigen::MatrixXd& dict, int sparsity, std::vector<std::size_t>& support) {
  std::vector<std::size_t> all(static_cast<std::size_t>(dict.cols()));
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
  rng.shuffle(all);
  support.assign(all.begin(), all.begin() + sparsity);
  std::sort(support.begin(), support.end());
  Eigen::VectorXd y = Eigen::VectorXd::Zero(dict.rows());
  for (std::size_t j : support) {
    const double c = rng.uniform(0.5, 1.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    y += c * dict.col(static_cast<Eigen::Index>(j));
  }
  return y;
}

Eigen::MatrixXd recovery_dictionary(Rng& rng, int sparsity, int& m) {
  if (sparsity == 1) {
    m = 6 + static_cast<int>(rng.below(11));
    return frames::random_unit(rng, m, 2 * m);
  }
  if (sparsity == 3) {
    m = 15;
    return frames::paley_frame(rng, 29);
  }
  m = 7 + static_cast<int>(rng.below(10));
  if (m == 7) return frames::paley_frame(rng, 13);
  if (m == 9 && rng.uniform() < 0.5) return frames::paley_frame(rng, 17);
  auto frame = frames::alternating_projection(rng, m, 2 * m, 1.0 / 3.0);
  return frame ? *frame : frames::random_unit(rng, m, 2 * m);
}

Outcome omp_recovery() {
  Rng rng(13);
  int qualifying[4] = {0, 0, 0, 0}, recovered[4] = {0, 0, 0, 0};
  for (int trial = 0; trial < 100; ++trial) {
    const int t = 1 + trial % 3;
    int m = 0;
    const Eigen::MatrixXd dict = recovery_dictionary(rng, t, m);
    if (frames::coherence(dict) >= 1.0 / (2.0 * t - 1.0)) continue;
    ++qualifying[t];
    std::vector<std::size_t> planted;
    const Eigen::VectorXd y = plant(rng, dict, t, planted);
    SparseCode code = omp_encode(y, dict, static_cast<std::size_t>(t), 0.0);
    std::sort(code.support.begin(), code.support.end());
    recovered[t] += code.support == planted;
  }

  double worst_gap = 0.0;
  int sub_ok = 0;
  const int sub_n = 20;
  for (int trial = 0; trial < sub_n; ++trial) {
    const auto frame = frames::alternating_projection(rng, 6, 8, 1.0 / 3.0);
    if (!frame) continue;
    std::vector<std::size_t> planted;
    const Eigen::VectorXd y = plant(rng, *frame, 2, planted);
    const SparseCode code = omp_encode(y, *frame, 2, 0.0);
    const double ours = (y - *frame * code.coefficients).squaredNorm();
    const oracle::SupportFit best = oracle::best_support(y, *frame, 2);
    const double gap = std::abs(ours - best.residual * best.residual);
    worst_gap = std::max(worst_gap, gap);
    sub_ok += gap <= 1e-8;
  }

  bool pass = sub_ok == sub_n;
  std::string detail;
  for (int t = 1; t <= 3; ++t) {
    pass = pass && qualifying[t] > 0 && recovered[t] == qualifying[t];
    detail += "T=" + std::to_string(t) + " " + std::to_string(recovered[t]) + "/" +
              std::to_string(qualifying[t]) + " qualifying, ";
  }
  detail += "6x8 oracle " + std::to_string(sub_ok) + "/" + std::to_string(sub_n) +
            " max gap " + fmt("%.1e", worst_gap);
  return {pass, detail};
}

Outcome ista_optimality() {
  Rng rng(14);
  double worst_obj = 0.0, worst_sub = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index m = 4 + static_cast<Eigen::Index>(rng.below(7));
    Eigen::MatrixXd dict(m, 2 * m);
    for (Eigen::Index j = 0; j < dict.cols(); ++j) dict.col(j) = random_vector(rng, m, -1.0, 1.0);
    dict.colwise().normalize();
    const Eigen::VectorXd y = random_vector(rng, m, -1.0, 1.0);
    const double lambda = rng.uniform(0.02, 0.3);
    const SparseCode code = ista_encode(y, dict, lambda, 200000, 1e-13);
    const Eigen::VectorXd ref = oracle::coordinate_descent_lasso(y, dict, lambda);
    worst_obj = std::max(worst_obj, std::abs(lasso_objective(y, dict, code.coefficients, lambda) -
                                             oracle::lasso_value(y, dict, ref, lambda)));
    const Eigen::VectorXd corr = dict.transpose() * (y - dict * code.coefficients);
    for (Eigen::Index j = 0; j < corr.size(); ++j) {
      const double s = code.coefficients(j);
      const double violation = s == 0.0 ? std::max(0.0, std::abs(corr(j)) - lambda)
                                        : std::abs(corr(j) - lambda * (s > 0.0 ? 1.0 : -1.0));
      worst_sub = std::max(worst_sub, violation);
    }
  }
  return {worst_obj <= 1e-6 && worst_sub <= 1e-6,
          "max objective gap " + fmt("%.2e", worst_obj) + ", max subgradient violation " +
              fmt("%.2e", worst_sub)};
}

Outcome dictionary_descent() {
  const fs::path dir = DDL_TEST_DATA_DIR;
  const auto ds = take_first(
      load_idx(dir / "train-images-idx3-ubyte.gz", dir / "train-labels-idx1-ubyte.gz"), 6);
  std::vector<PatchMatrix> parts;
  for (const auto& img : ds.images) parts.push_back(extract_patches(img, 8));
  const Eigen::MatrixXd patches = stack_patches(parts);

  DictLearnConfig cfg;
  cfg.num_atoms = 38;
  cfg.epochs = 2;
  std::size_t passes = 0, increases = 0;
  double worst_norm = 0.0, worst_rise = 0.0;
  LearnObserver obs;
  obs.on_update = [&](const UpdateReport& r) {
    ++passes;
    worst_norm = std::max(worst_norm, r.max_atom_norm);
    const double rise = r.surrogate_after - r.surrogate_before;
    worst_rise = std::max(worst_rise, rise);
    increases += rise > 1e-9 * std::max(1.0, std::abs(r.surrogate_before));
  };
  learn_dictionary(patches, cfg, Provenance::CleanTrain, obs);
  return {passes > 0 && increases == 0 && worst_norm <= 1.0 + 1e-12,
          std::to_string(passes) + " passes, max norm " + fmt("%.15f", worst_norm) +
              ", increases " + std::to_string(increases) + ", max rise " + fmt("%.1e", worst_rise)};
}

Outcome patch_round_trip() {
  Rng rng(16);
  const std::vector<std::array<std::size_t, 4>> shapes = {
      {8, 8, 1, 8}, {32, 32, 3, 8}, {28, 28, 1, 8}, {11, 17, 1, 5}, {12, 9, 3, 4}, {20, 20, 3, 8}};
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto& s = shapes[static_cast<std::size_t>(trial) % shapes.size()];
    Image img(s[0], s[1], s[2]);
    for (auto& p : img.pixels) p = rng.uniform();
    const auto pm = extract_patches(img, s[3], trial % 2 == 0);
    const Image back = reassemble(pm, pm.data);
    for (std::size_t i = 0; i < img.size(); ++i)
      worst = std::max(worst, std::abs(back.pixels[i] - img.pixels[i]));
  }
  return {worst <= 1e-10, "max pixel error " + fmt("%.2e", worst)};
}

Outcome metric_oracles() {
  Rng rng(17);
  double worst_ssim = 0.0;
  bool identity = true;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t h = 8 + rng.below(16), w = 8 + rng.below(16);
    Image x(h, w, 1), y(h, w, 1);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x.pixels[i] = rng.uniform();
      y.pixels[i] = std::clamp(x.pixels[i] + rng.uniform(-0.4, 0.4), 0.0, 1.0);
    }
    const double expected =
        oracle::windowed_ssim(x.pixels, y.pixels, static_cast<int>(h), static_cast<int>(w), 8);
    worst_ssim = std::max(worst_ssim, std::abs(ssim(x, y) - expected));
    identity = identity && ssim(x, x) == 1.0;
  }

  // Unit peak and every pixel off by 0.1: MSE 0.01, 20 dB.
  Image ref(10, 10, 1, 0.5);
  ref.pixels[0] = 1.0;
  Image test = ref;
  for (auto& p : test.pixels) p -= 0.1;
  double worst_psnr = std::abs(psnr(ref, test) - 20.0);
  // Peak 0.5 with error 0.25 everywhere: 10 log10(4) dB.
  const Image half(6, 6, 1, 0.5), quarter(6, 6, 1, 0.25);
  worst_psnr = std::max(worst_psnr, std::abs(psnr(half, quarter) - 10.0 * std::log10(4.0)));
  MetricOptions fixed;
  fixed.fixed_peak = true;
  worst_psnr = std::max(worst_psnr, std::abs(psnr(half, quarter, fixed) - 10.0 * std::log10(16.0)));
  const bool sentinel = psnr(ref, ref) == kPsnrInfinite && report_psnr(psnr(ref, ref)) == 100.0;

  return {worst_ssim <= 1e-10 && worst_psnr <= 1e-9 && identity && sentinel,
          "ssim max diff " + fmt("%.2e", worst_ssim) + ", psnr max diff " + fmt("%.2e", worst_psnr) +
              ", ssim(x,x)==1 " + (identity ? "yes" : "no")};
}

std::string opt(const std::optional<double>& v) { return v ? fmt("%.4f", *v) : "n/a"; }

const ReportRow* find_row(const std::vector<ReportRow>& rows, const std::string& attack) {
  for (const auto& r : rows)
    if (r.attack == attack) return &r;
  return nullptr;
}

struct DeskRun {
  std::vector<ReportRow> rows;
  double seconds = 0.0;
  std::size_t jsma_targeted = 0;
  std::size_t jsma_total = 0;
  std::string error;
};

DeskRun desk_run() {
  DeskRun run;
  ExperimentConfig config;
  config.data_dir = DDL_TEST_DATA_DIR;
  config.output_dir = scratch("desk");
  config.attacks = {AttackKind::Fgsm, AttackKind::Jsma};
  config.quiet = true;
  const auto start = std::chrono::steady_clock::now();
  try {
    run.rows = cmd_pipeline(config);
  } catch (const std::exception& e) {
    run.error = e.what();
    return run;
  }
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::ifstream csv(config.output_dir / "attack_jsma.csv");
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() < 6) continue;
    ++run.jsma_total;
    run.jsma_targeted += cells[5] == "1";
  }
  return run;
}

Outcome fgsm_table(const DeskRun& run) {
  if (!run.error.empty()) return {false, run.error};
  const ReportRow* r = find_row(run.rows, "fgsm");
  if (!r || !r->perturbed_acc || !r->denoised_acc) return {false, "no fgsm row"};
  const double clean = r->clean_acc, pert = *r->perturbed_acc, den = *r->denoised_acc;
  const bool pass = clean >= 0.90 && pert <= clean - 0.40 && den >= pert + 0.20 && clean > den &&
                    den > pert && run.seconds <= 600.0;
  return {pass, "clean " + opt(clean) + ", perturbed " + opt(pert) + ", denoised " + opt(den) +
                    ", pipeline " + fmt("%.1f", run.seconds) + " s"};
}

Outcome jsma_table(const DeskRun& run) {
  if (!run.error.empty()) return {false, run.error};
  const ReportRow* r = find_row(run.rows, "jsma");
  if (!r || !r->perturbed_acc || !r->denoised_acc || run.jsma_total == 0) return {false, "no jsma row"};
  const double rate = static_cast<double>(run.jsma_targeted) / static_cast<double>(run.jsma_total);
  const bool pass = rate >= 0.70 && *r->denoised_acc >= *r->perturbed_acc && run.seconds <= 600.0;
  return {pass, "targeted success " + std::to_string(run.jsma_targeted) + "/" +
                    std::to_string(run.jsma_total) + ", perturbed " + opt(r->perturbed_acc) +
                    ", denoised " + opt(r->denoised_acc)};
}

Outcome quality_direction(const DeskRun& run) {
  if (!run.error.empty()) return {false, run.error};
  const ReportRow* r = find_row(run.rows, "fgsm");
  if (!r || !r->mean_psnr_perturbed || !r->mean_psnr_denoised || !r->mean_ssim_perturbed ||
      !r->mean_ssim_denoised)
    return {false, "no fgsm quality columns"};
  const double gain = *r->mean_psnr_denoised - *r->mean_psnr_perturbed;
  const bool pass = gain >= 2.0 && *r->mean_ssim_denoised > *r->mean_ssim_perturbed;
  return {pass, "psnr " + opt(r->mean_psnr_perturbed) + " -> " + opt(r->mean_psnr_denoised) +
                    " dB (gain " + fmt("%.2f", gain) + "), ssim " + opt(r->mean_ssim_perturbed) +
                    " -> " + opt(r->mean_ssim_denoised)};
}

bool same_values(const ReportRow& a, const ReportRow& b) {
  return a.model_name == b.model_name && a.dataset == b.dataset && a.attack == b.attack &&
         a.epsilon == b.epsilon && a.clean_acc == b.clean_acc && a.perturbed_acc == b.perturbed_acc &&
         a.denoised_acc == b.denoised_acc && a.mean_psnr_perturbed == b.mean_psnr_perturbed &&
         a.mean_psnr_denoised == b.mean_psnr_denoised &&
         a.mean_ssim_perturbed == b.mean_ssim_perturbed &&
         a.mean_ssim_denoised == b.mean_ssim_denoised &&
         a.clean_denoised_acc == b.clean_denoised_acc && a.dictionary_source == b.dictionary_source;
}

Outcome determinism() {
  std::vector<std::vector<ReportRow>> reports;
  for (const char* name : {"repeat_a", "repeat_b"}) {
    ExperimentConfig config;
    config.dataset = "synthetic";
    config.train_n = 120;
    config.test_n = 40;
    config.hidden = {32};
    config.train.epochs = 5;
    config.attacks = {AttackKind::Fgsm, AttackKind::Jsma};
    config.jsma_n = 10;
    config.dict_patches = 3000;
    config.denoise_clean = true;
    config.quiet = true;
    config.seed = 7;
    config.output_dir = scratch(name);
    cmd_pipeline(config);
    reports.push_back(read_report_json(config.output_dir / "report.json"));
  }
  bool pass = reports[0].size() == 2 && reports[0].size() == reports[1].size();
  for (std::size_t i = 0; pass && i < reports[0].size(); ++i)
    pass = same_values(reports[0][i], reports[1][i]);
  return {pass, std::to_string(reports[0].size()) + " rows compared"};
}

}  // namespace

int main() {
  int failures = 0;
  auto run = [&](int id, const std::string& name, double limit_s, const std::function<Outcome()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = fn();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (limit_s > 0.0 && secs > limit_s) {
      out.pass = false;
      out.detail += ", over the " + fmt("%.0f", limit_s) + " s limit";
    }
    failures += !out.pass;
    std::printf("%s [%d] %s (%s, %.2f s)\n", out.pass ? "PASS" : "FAIL", id, name.c_str(),
                out.detail.c_str(), secs);
    std::fflush(stdout);
  };

  run(1, "gradient and Jacobian vs central differences", 10, gradients);
  run(2, "softmax Jacobian columns sum to zero", 5, jacobian_columns);
  run(3, "OMP exact recovery on incoherent dictionaries", 30, omp_recovery);
  run(4, "ISTA optimality vs coordinate descent", 30, ista_optimality);
  run(5, "dictionary unit ball and surrogate descent", 60, dictionary_descent);
  run(6, "patch extract/reassemble round trip", 5, patch_round_trip);
  run(7, "SSIM and PSNR oracles", 0, metric_oracles);

  DeskRun desk;
  const auto start = std::chrono::steady_clock::now();
  desk = desk_run();
  const double desk_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("     desk-scale MNIST pipeline finished in %.1f s\n", desk_s);
  run(8, "desk-scale FGSM table", 0, [&] { return fgsm_table(desk); });
  run(9, "desk-scale JSMA table", 0, [&] { return jsma_table(desk); });
  run(10, "denoising improves PSNR by 2 dB and SSIM", 0, [&] { return quality_direction(desk); });
  run(11, "pipeline reports are deterministic", 0, determinism);

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
