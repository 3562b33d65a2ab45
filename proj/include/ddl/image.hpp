#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ddl {

/// Dense image with pixels in [0,1], row-major, channels interleaved.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

  std::size_t size() const noexcept { return pixels.size(); }
  double& at(std::size_t row, std::size_t col, std::size_t ch = 0) {
    return pixels[(row * width + col) * channels + ch];
  }
  double at(std::size_t row, std::size_t col, std::size_t ch = 0) const {
    return pixels[(row * width + col) * channels + ch];
  }
  bool same_shape(const Image& other) const noexcept {
    return height == other.height && width == other.width && channels == other.channels;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

struct LabeledDataset {
  std::vector<Image> images;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const noexcept { return images.size(); }
  bool empty() const noexcept { return images.empty(); }

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

// Throws ddl::Error when pixel range, shape uniformity, or label bounds are violated.
void validate(const Image& img);
void validate(const LabeledDataset& ds);

LabeledDataset take_first(const LabeledDataset& ds, std::size_t n);

}  // namespace ddl
