#pragma once

#include <limits>
#include <optional>

#include "ddl/image.hpp"
#include "ddl/mlp.hpp"

namespace ddl {

// Colour images are reduced to the mean of their channels before scoring by
// default; PerChannel scores each channel and averages the scores.
enum class ColorReduction { ChannelMean, PerChannel };

struct MetricOptions {
  ColorReduction color = ColorReduction::ChannelMean;
  bool fixed_peak = false;  // PSNR peak 1.0 instead of max(reference)
  std::size_t ssim_window = 8;
};

inline constexpr double kPsnrInfinite = std::numeric_limits<double>::infinity();
inline constexpr double kPsnrReportCap = 100.0;

double mean_squared_error(const Image& reference, const Image& test);

// 10 log10(max(reference)^2 / MSE); +infinity when MSE is 0.
double psnr(const Image& reference, const Image& test, const MetricOptions& options = {});

// Mean SSIM over all stride-1 windows, c1 = (0.01)^2, c2 = (0.03)^2, population
// statistics.
double ssim(const Image& x, const Image& y, const MetricOptions& options = {});

struct QualityReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
  double mse = 0.0;
};

QualityReport quality(const Image& reference, const Image& test, const MetricOptions& options = {});

// PSNR as shown in reports: the infinite sentinel becomes 100 dB.
double report_psnr(double psnr_db);

struct AccuracyRow {
  double clean_acc = 0.0;
  std::optional<double> perturbed_acc;
  std::optional<double> denoised_acc;
  std::optional<double> mean_psnr_perturbed;
  std::optional<double> mean_psnr_denoised;
  std::optional<double> mean_ssim_perturbed;
  std::optional<double> mean_ssim_denoised;
};

// Accuracy on each dataset variant plus mean PSNR / SSIM of each variant
// against the clean images (PSNR averaged after the 100 dB cap).
AccuracyRow accuracy_table(const MlpModel& model, const LabeledDataset& clean,
                           const LabeledDataset* perturbed, const LabeledDataset* denoised,
                           const MetricOptions& options = {});

}  // namespace ddl
