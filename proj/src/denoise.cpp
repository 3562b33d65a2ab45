#include "ddl/denoise.hpp"

#include <string>

#include "ddl/error.hpp"
#include "ddl/parallel.hpp"
#include "ddl/patches.hpp"

namespace ddl {

Image denoise_image(const Image& img, const Eigen::MatrixXd& atoms, const DenoiseConfig& config) {
  const PatchMatrix pm = extract_patches(img, config.patch_size, config.center);
  if (static_cast<std::size_t>(atoms.rows()) != pm.dimension()) {
    throw Error(ErrorCode::DimensionMismatch,
                "dictionary atoms have length " + std::to_string(atoms.rows()) +
                    " but patches have length " + std::to_string(pm.dimension()));
  }
  const auto codes = batch_encode(pm.data, atoms, config.coder);
  return reassemble(pm, reconstruct(atoms, codes));
}

LabeledDataset denoise_dataset(const LabeledDataset& ds, const Eigen::MatrixXd& atoms,
                               const DenoiseConfig& config) {
  LabeledDataset out;
  out.num_classes = ds.num_classes;
  out.labels = ds.labels;
  out.images.resize(ds.size());
  parallel_for(ds.size(), config.threads,
               [&](std::size_t i) { out.images[i] = denoise_image(ds.images[i], atoms, config); });
  return out;
}

}  // namespace ddl
