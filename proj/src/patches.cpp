#include "ddl/patches.hpp"

#include <algorithm>
#include <string>

#include "ddl/error.hpp"

namespace ddl {

PatchMatrix extract_patches(const Image& img, std::size_t patch_size, bool center) {
  if (patch_size == 0) throw Error(ErrorCode::InvalidArgument, "patch size must be positive");
  if (patch_size > std::min(img.height, img.width)) {
    throw Error(ErrorCode::PatchTooLarge, "patch size " + std::to_string(patch_size) +
                                              " does not fit a " + std::to_string(img.height) +
                                              "x" + std::to_string(img.width) + " image");
  }
  const std::size_t rows = img.height - patch_size + 1;
  const std::size_t cols = img.width - patch_size + 1;
  const std::size_t dim = patch_size * patch_size * img.channels;

  PatchMatrix pm;
  pm.source_height = img.height;
  pm.source_width = img.width;
  pm.channels = img.channels;
  pm.patch_size = patch_size;
  pm.centered = center;
  pm.data.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(rows * cols));
  pm.means = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows * cols));
  pm.offsets.reserve(rows * cols);

  const std::size_t run = patch_size * img.channels;  // contiguous pixels per patch row
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const auto p = static_cast<Eigen::Index>(pm.offsets.size());
      for (std::size_t pr = 0; pr < patch_size; ++pr) {
        const double* src = &img.pixels[((r + pr) * img.width + c) * img.channels];
        for (std::size_t k = 0; k < run; ++k) {
          pm.data(static_cast<Eigen::Index>(pr * run + k), p) = src[k];
        }
      }
      if (center) {
        const double mean = pm.data.col(p).mean();
        pm.data.col(p).array() -= mean;
        pm.means(p) = mean;
      }
      pm.offsets.push_back({r, c});
    }
  }
  return pm;
}

Image reassemble(const PatchMatrix& pm, const Eigen::MatrixXd& reconstructed) {
  if (reconstructed.rows() != pm.data.rows() || reconstructed.cols() != pm.data.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "reconstructed patches are " +
                                              std::to_string(reconstructed.rows()) + "x" +
                                              std::to_string(reconstructed.cols()) +
                                              ", expected " + std::to_string(pm.data.rows()) +
                                              "x" + std::to_string(pm.data.cols()));
  }
  Image out(pm.source_height, pm.source_width, pm.channels);
  std::vector<double> coverage(out.size(), 0.0);
  const std::size_t run = pm.patch_size * pm.channels;

  // Raster-order accumulation keeps the sums independent of how columns were coded.
  for (std::size_t p = 0; p < pm.offsets.size(); ++p) {
    const auto [r, c] = pm.offsets[p];
    const double mean = pm.means(static_cast<Eigen::Index>(p));
    for (std::size_t pr = 0; pr < pm.patch_size; ++pr) {
      const std::size_t base = ((r + pr) * pm.source_width + c) * pm.channels;
      for (std::size_t k = 0; k < run; ++k) {
        out.pixels[base + k] +=
            reconstructed(static_cast<Eigen::Index>(pr * run + k), static_cast<Eigen::Index>(p)) +
            mean;
        coverage[base + k] += 1.0;
      }
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.pixels[i] = std::clamp(out.pixels[i] / coverage[i], 0.0, 1.0);
  }
  return out;
}

Eigen::MatrixXd stack_patches(const std::vector<PatchMatrix>& parts) {
  Eigen::Index total = 0;
  Eigen::Index dim = parts.empty() ? 0 : parts.front().data.rows();
  for (const auto& part : parts) {
    if (part.data.rows() != dim) {
      throw Error(ErrorCode::DimensionMismatch, "patch sets of differing dimension");
    }
    total += part.data.cols();
  }
  Eigen::MatrixXd stacked(dim, total);
  Eigen::Index at = 0;
  for (const auto& part : parts) {
    stacked.middleCols(at, part.data.cols()) = part.data;
    at += part.data.cols();
  }
  return stacked;
}

}  // namespace ddl
