#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "ddl/image.hpp"
#include "ddl/sparse_coding.hpp"

namespace ddl {

struct DenoiseConfig {
  CoderConfig coder;
  std::size_t patch_size = 8;
  bool center = true;
  std::size_t threads = 1;
};

// extract_patches -> code every column against `atoms` -> D S -> reassemble.
Image denoise_image(const Image& img, const Eigen::MatrixXd& atoms, const DenoiseConfig& config);

// Images are independent; with threads > 1 they are split across workers and
// the result is identical to the sequential run.
LabeledDataset denoise_dataset(const LabeledDataset& ds, const Eigen::MatrixXd& atoms,
                               const DenoiseConfig& config);

}  // namespace ddl
