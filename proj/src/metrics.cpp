#include "ddl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ddl/error.hpp"

namespace ddl {
namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void check_shapes(const Image& a, const Image& b) {
  if (!a.same_shape(b) || a.size() != b.size()) {
    throw Error(ErrorCode::ShapeMismatch, "images differ in shape");
  }
}

Image channel(const Image& img, std::size_t ch) {
  Image out(img.height, img.width, 1);
  for (std::size_t p = 0; p < img.height * img.width; ++p) out.pixels[p] = img.pixels[p * img.channels + ch];
  return out;
}

Image channel_mean(const Image& img) {
  if (img.channels == 1) return img;
  Image out(img.height, img.width, 1);
  for (std::size_t p = 0; p < img.height * img.width; ++p) {
    double sum = 0.0;
    for (std::size_t ch = 0; ch < img.channels; ++ch) sum += img.pixels[p * img.channels + ch];
    out.pixels[p] = sum / static_cast<double>(img.channels);
  }
  return out;
}

// Applies a single-channel metric under the configured colour reduction.
template <typename Fn>
double reduce_channels(const Image& a, const Image& b, const MetricOptions& options, Fn&& metric) {
  check_shapes(a, b);
  if (a.channels == 1 || options.color == ColorReduction::ChannelMean) {
    return metric(channel_mean(a), channel_mean(b));
  }
  double total = 0.0;
  for (std::size_t ch = 0; ch < a.channels; ++ch) total += metric(channel(a, ch), channel(b, ch));
  return total / static_cast<double>(a.channels);
}

double gray_psnr(const Image& reference, const Image& test, bool fixed_peak) {
  const double peak = fixed_peak ? 1.0 : *std::max_element(reference.pixels.begin(), reference.pixels.end());
  if (peak <= 0.0) throw Error(ErrorCode::ZeroReference, "reference image is all zero");
  const double mse = mean_squared_error(reference, test);
  if (mse == 0.0) return kPsnrInfinite;
  return 10.0 * std::log10(peak * peak / mse);
}

// Summed-area table with a zero guard row and column.
std::vector<double> integral(const Image& img, const std::vector<double>& values) {
  const std::size_t w = img.width + 1;
  std::vector<double> table((img.height + 1) * w, 0.0);
  for (std::size_t r = 0; r < img.height; ++r) {
    double row_sum = 0.0;
    for (std::size_t c = 0; c < img.width; ++c) {
      row_sum += values[r * img.width + c];
      table[(r + 1) * w + c + 1] = table[r * w + c + 1] + row_sum;
    }
  }
  return table;
}

double gray_ssim(const Image& x, const Image& y, std::size_t window) {
  if (window == 0 || x.height < window || x.width < window) {
    throw Error(ErrorCode::ImageSmallerThanWindow,
                std::to_string(x.height) + "x" + std::to_string(x.width) +
                    " image is smaller than the " + std::to_string(window) + "x" +
                    std::to_string(window) + " window");
  }
  const std::size_t n = x.pixels.size();
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x.pixels[i] * x.pixels[i];
    yy[i] = y.pixels[i] * y.pixels[i];
    xy[i] = x.pixels[i] * y.pixels[i];
  }
  const auto sx = integral(x, x.pixels), sy = integral(x, y.pixels);
  const auto sxx = integral(x, xx), syy = integral(x, yy), sxy = integral(x, xy);
  const std::size_t w = x.width + 1;
  auto box = [&](const std::vector<double>& t, std::size_t r, std::size_t c) {
    return t[(r + window) * w + c + window] - t[r * w + c + window] - t[(r + window) * w + c] +
           t[r * w + c];
  };

  const double area = static_cast<double>(window * window);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + window <= x.height; ++r) {
    for (std::size_t c = 0; c + window <= x.width; ++c) {
      const double mx = box(sx, r, c) / area;
      const double my = box(sy, r, c) / area;
      const double vx = box(sxx, r, c) / area - mx * mx;
      const double vy = box(syy, r, c) / area - my * my;
      const double cov = box(sxy, r, c) / area - mx * my;
      total += ((2.0 * mx * my + kC1) * (2.0 * cov + kC2)) /
               ((mx * mx + my * my + kC1) * (vx + vy + kC2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

template <typename Fn>
std::optional<double> mean_over(const LabeledDataset& clean, const LabeledDataset* other, Fn&& fn) {
  if (!other || clean.empty()) return std::nullopt;
  double total = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) total += fn(clean.images[i], other->images[i]);
  return total / static_cast<double>(clean.size());
}

void check_pair(const LabeledDataset& clean, const LabeledDataset* other, const char* name) {
  if (!other) return;
  if (other->size() != clean.size() || other->labels != clean.labels) {
    throw Error(ErrorCode::LengthMismatch, std::string(name) + " set does not line up with the clean set");
  }
}

}  // namespace

double mean_squared_error(const Image& reference, const Image& test) {
  check_shapes(reference, test);
  if (reference.size() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = reference.pixels[i] - test.pixels[i];
    sum += d * d;
  }
  return sum / static_cast<double>(reference.size());
}

double psnr(const Image& reference, const Image& test, const MetricOptions& options) {
  return reduce_channels(reference, test, options, [&](const Image& a, const Image& b) {
    return gray_psnr(a, b, options.fixed_peak);
  });
}

double ssim(const Image& x, const Image& y, const MetricOptions& options) {
  return reduce_channels(x, y, options, [&](const Image& a, const Image& b) {
    return gray_ssim(a, b, options.ssim_window);
  });
}

QualityReport quality(const Image& reference, const Image& test, const MetricOptions& options) {
  return {psnr(reference, test, options), ssim(reference, test, options),
          mean_squared_error(reference, test)};
}

double report_psnr(double psnr_db) { return std::min(psnr_db, kPsnrReportCap); }

AccuracyRow accuracy_table(const MlpModel& model, const LabeledDataset& clean,
                           const LabeledDataset* perturbed, const LabeledDataset* denoised,
                           const MetricOptions& options) {
  check_pair(clean, perturbed, "perturbed");
  check_pair(clean, denoised, "denoised");
  AccuracyRow row;
  row.clean_acc = evaluate_accuracy(model, clean);
  if (perturbed) row.perturbed_acc = evaluate_accuracy(model, *perturbed);
  if (denoised) row.denoised_acc = evaluate_accuracy(model, *denoised);
  auto psnr_of = [&](const Image& a, const Image& b) { return report_psnr(psnr(a, b, options)); };
  auto ssim_of = [&](const Image& a, const Image& b) { return ssim(a, b, options); };
  row.mean_psnr_perturbed = mean_over(clean, perturbed, psnr_of);
  row.mean_psnr_denoised = mean_over(clean, denoised, psnr_of);
  row.mean_ssim_perturbed = mean_over(clean, perturbed, ssim_of);
  row.mean_ssim_denoised = mean_over(clean, denoised, ssim_of);
  return row;
}

}  // namespace ddl
