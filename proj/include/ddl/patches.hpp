#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "ddl/image.hpp"

namespace ddl {

struct PatchOffset {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const PatchOffset&, const PatchOffset&) = default;
};

/// All stride-1 patches of one image, one vectorized patch per column.
///
/// Column layout is (patch row, patch col, channel) with channel fastest, so a
/// colour patch is a single 8*8*3 vector. When `centered` is set, each column
/// has had its mean subtracted and the mean is kept in `means`.
struct PatchMatrix {
  Eigen::MatrixXd data;
  Eigen::VectorXd means;
  std::vector<PatchOffset> offsets;
  std::size_t source_height = 0;
  std::size_t source_width = 0;
  std::size_t channels = 1;
  std::size_t patch_size = 0;
  bool centered = true;

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(data.rows()); }
  std::size_t count() const noexcept { return static_cast<std::size_t>(data.cols()); }
};

PatchMatrix extract_patches(const Image& img, std::size_t patch_size, bool center = true);

// Overlap-average the (re-meaned) columns back into an image, clamped to [0,1].
Image reassemble(const PatchMatrix& pm, const Eigen::MatrixXd& reconstructed);

// Concatenate the patches of several images into one M x sum(P) matrix.
Eigen::MatrixXd stack_patches(const std::vector<PatchMatrix>& parts);

}  // namespace ddl
