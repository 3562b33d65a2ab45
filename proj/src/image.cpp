#include "ddl/image.hpp"

#include <algorithm>
#include <string>

#include "ddl/error.hpp"

namespace ddl {

void validate(const Image& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw Error(ErrorCode::ShapeMismatch, "channels must be 1 or 3, got " +
                                              std::to_string(img.channels));
  }
  if (img.pixels.size() != img.height * img.width * img.channels) {
    throw Error(ErrorCode::ShapeMismatch, "pixel count does not match declared shape");
  }
  for (double v : img.pixels) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "pixel value outside [0,1]: " + std::to_string(v));
    }
  }
}

void validate(const LabeledDataset& ds) {
  if (ds.images.size() != ds.labels.size()) {
    throw Error(ErrorCode::CountMismatch, std::to_string(ds.images.size()) + " images vs " +
                                              std::to_string(ds.labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    validate(ds.images[i]);
    if (!ds.images[i].same_shape(ds.images.front())) {
      throw Error(ErrorCode::ShapeMismatch, "image " + std::to_string(i) + " differs in shape");
    }
    if (ds.labels[i] < 0 || ds.labels[i] >= ds.num_classes) {
      throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(ds.labels[i]) +
                                                  " at index " + std::to_string(i));
    }
  }
}

LabeledDataset take_first(const LabeledDataset& ds, std::size_t n) {
  LabeledDataset out;
  out.num_classes = ds.num_classes;
  const std::size_t count = std::min(n, ds.size());
  out.images.assign(ds.images.begin(), ds.images.begin() + static_cast<std::ptrdiff_t>(count));
  out.labels.assign(ds.labels.begin(), ds.labels.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

}  // namespace ddl
