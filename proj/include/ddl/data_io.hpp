#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ddl/image.hpp"

namespace ddl {

// IDX image/label pair (MNIST layout). Either file may be gzip-compressed;
// compression is detected from the 0x1F8B prefix, not the extension.
LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path);

// CIFAR-10 binary batches: 3073-byte records, label byte then R, G, B planes.
LabeledDataset load_cifar_binary(const std::vector<std::filesystem::path>& paths);

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
};

// Deterministic fixture: class k is a noisy bright blob at its own position on a
// ring around the image centre, labels assigned round-robin.
LabeledDataset synthesize_dataset(std::uint64_t seed, std::size_t count, Shape shape,
                                  int num_classes);

// "DDL1": magic, rows and cols as u32 LE, then row-major f64 LE.
void save_matrix(const Eigen::MatrixXd& m, const std::filesystem::path& path);
Eigen::MatrixXd load_matrix(const std::filesystem::path& path);

// In-memory variants used by the container formats that embed DDL1 blocks.
void append_matrix(std::vector<std::uint8_t>& out, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const std::vector<std::uint8_t>& bytes, std::size_t& offset);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

// Flat key=value text with '#' comments.
using KeyValues = std::map<std::string, std::string>;
KeyValues read_key_values(const std::filesystem::path& path);
void write_key_values(const std::filesystem::path& path, const KeyValues& kv);

// Dataset persistence: one image per matrix row in a DDL1 file, plus a
// "<path>.meta" key=value sidecar with the shape, class count and labels.
void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);

}  // namespace ddl
