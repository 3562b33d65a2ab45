#include "ddl/data_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ddl/error.hpp"
#include "ddl/random.hpp"

namespace ddl {
namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
constexpr std::size_t kCifarSide = 32;
constexpr std::size_t kCifarRecord = 1 + 3 * kCifarSide * kCifarSide;
constexpr char kMatrixMagic[4] = {'D', 'D', 'L', '1'};

bool is_gzip(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& compressed,
                                 const std::filesystem::path& origin) {
  z_stream stream{};
  // 16 + MAX_WBITS selects the gzip wrapper.
  if (inflateInit2(&stream, 16 + MAX_WBITS) != Z_OK) {
    throw Error(ErrorCode::Io, "zlib init failed for " + origin.string());
  }
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> chunk(1 << 16);
  stream.next_in = const_cast<Bytef*>(compressed.data());
  stream.avail_in = static_cast<uInt>(compressed.size());
  int status = Z_OK;
  while (status != Z_STREAM_END) {
    stream.next_out = chunk.data();
    stream.avail_out = static_cast<uInt>(chunk.size());
    status = inflate(&stream, Z_NO_FLUSH);
    if (status != Z_OK && status != Z_STREAM_END) {
      inflateEnd(&stream);
      throw Error(ErrorCode::Truncated, "corrupt or truncated gzip stream in " + origin.string());
    }
    out.insert(out.end(), chunk.begin(), chunk.begin() + (chunk.size() - stream.avail_out));
    if (status == Z_OK && stream.avail_in == 0 && stream.avail_out != 0) {
      inflateEnd(&stream);
      throw Error(ErrorCode::Truncated, "gzip stream ends early in " + origin.string());
    }
  }
  inflateEnd(&stream);
  return out;
}

std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return is_gzip(bytes) ? gunzip(bytes, path) : bytes;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t at,
                        const std::filesystem::path& origin) {
  if (at + 4 > b.size()) {
    throw Error(ErrorCode::Truncated, "header cut short in " + origin.string());
  }
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void put_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_le32(const std::vector<std::uint8_t>& b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[at + i]} << (8 * i);
  return v;
}

std::size_t parse_size(const KeyValues& kv, const std::string& key,
                       const std::filesystem::path& origin) {
  auto it = kv.find(key);
  if (it == kv.end()) {
    throw Error(ErrorCode::Truncated, "missing '" + key + "' in " + origin.string());
  }
  return static_cast<std::size_t>(std::stoull(it->second));
}

}  // namespace

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
  const auto img = read_maybe_gzip(images_path);
  const auto lab = read_maybe_gzip(labels_path);

  if (read_be32(img, 0, images_path) != kIdxImageMagic) {
    throw Error(ErrorCode::BadMagic, images_path.string() + " is not an IDX image file");
  }
  if (read_be32(lab, 0, labels_path) != kIdxLabelMagic) {
    throw Error(ErrorCode::BadMagic, labels_path.string() + " is not an IDX label file");
  }
  const std::size_t count = read_be32(img, 4, images_path);
  const std::size_t rows = read_be32(img, 8, images_path);
  const std::size_t cols = read_be32(img, 12, images_path);
  const std::size_t label_count = read_be32(lab, 4, labels_path);
  if (count != label_count) {
    throw Error(ErrorCode::CountMismatch, std::to_string(count) + " images vs " +
                                              std::to_string(label_count) + " labels");
  }
  const std::size_t pixels = rows * cols;
  if (img.size() < 16 + count * pixels) {
    throw Error(ErrorCode::Truncated, images_path.string() + " shorter than its header");
  }
  if (lab.size() < 8 + count) {
    throw Error(ErrorCode::Truncated, labels_path.string() + " shorter than its header");
  }

  LabeledDataset ds;
  ds.num_classes = 10;
  ds.images.reserve(count);
  ds.labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Image image(rows, cols, 1);
    const std::uint8_t* src = img.data() + 16 + i * pixels;
    for (std::size_t p = 0; p < pixels; ++p) image.pixels[p] = src[p] / 255.0;
    ds.images.push_back(std::move(image));
    ds.labels.push_back(lab[8 + i]);
  }
  validate(ds);
  return ds;
}

LabeledDataset load_cifar_binary(const std::vector<std::filesystem::path>& paths) {
  LabeledDataset ds;
  ds.num_classes = 10;
  constexpr std::size_t plane = kCifarSide * kCifarSide;
  for (const auto& path : paths) {
    const auto bytes = read_file(path);
    if (bytes.size() % kCifarRecord != 0) {
      throw Error(ErrorCode::Truncated,
                  path.string() + " is not a whole number of 3073-byte records");
    }
    for (std::size_t rec = 0; rec < bytes.size() / kCifarRecord; ++rec) {
      const std::uint8_t* src = bytes.data() + rec * kCifarRecord;
      if (src[0] > 9) {
        throw Error(ErrorCode::LabelOutOfRange, "label byte " + std::to_string(src[0]) +
                                                    " in record " + std::to_string(rec) +
                                                    " of " + path.string());
      }
      Image image(kCifarSide, kCifarSide, 3);
      for (std::size_t p = 0; p < plane; ++p) {
        for (std::size_t ch = 0; ch < 3; ++ch) {
          image.pixels[p * 3 + ch] = src[1 + ch * plane + p] / 255.0;
        }
      }
      ds.images.push_back(std::move(image));
      ds.labels.push_back(src[0]);
    }
  }
  return ds;
}

LabeledDataset synthesize_dataset(std::uint64_t seed, std::size_t count, Shape shape,
                                  int num_classes) {
  if (num_classes < 1 || count < static_cast<std::size_t>(num_classes)) {
    throw Error(ErrorCode::InvalidArgument, "synthesize_dataset needs count >= classes >= 1");
  }
  if (shape.height == 0 || shape.width == 0 || (shape.channels != 1 && shape.channels != 3)) {
    throw Error(ErrorCode::InvalidArgument, "synthesize_dataset: bad shape");
  }
  const double side = static_cast<double>(std::min(shape.height, shape.width));
  const double cy = (static_cast<double>(shape.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(shape.width) - 1.0) / 2.0;
  const double radius = 0.3 * side;
  const double sigma = std::max(0.15 * side, 0.75);

  std::vector<Image> prototypes;
  for (int k = 0; k < num_classes; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / num_classes;
    const double by = cy + radius * std::sin(angle);
    const double bx = cx + radius * std::cos(angle);
    Image proto(shape.height, shape.width, shape.channels);
    for (std::size_t r = 0; r < shape.height; ++r) {
      for (std::size_t c = 0; c < shape.width; ++c) {
        const double d2 = (r - by) * (r - by) + (c - bx) * (c - bx);
        const double blob = std::exp(-d2 / (2.0 * sigma * sigma));
        for (std::size_t ch = 0; ch < shape.channels; ++ch) {
          const double tint =
              shape.channels == 1
                  ? 1.0
                  : 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi *
                                         (static_cast<double>(k) / num_classes + ch / 3.0));
          proto.at(r, c, ch) = blob * tint;
        }
      }
    }
    prototypes.push_back(std::move(proto));
  }

  Rng rng(seed);
  LabeledDataset ds;
  ds.num_classes = num_classes;
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(num_classes));
    Image img = prototypes[label];
    for (double& v : img.pixels) v = std::clamp(0.75 * v + 0.25 * rng.uniform(), 0.0, 1.0);
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
  return ds;
}

void append_matrix(std::vector<std::uint8_t>& out, const Eigen::MatrixXd& m) {
  out.insert(out.end(), std::begin(kMatrixMagic), std::end(kMatrixMagic));
  put_le32(out, static_cast<std::uint32_t>(m.rows()));
  put_le32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const auto bits = std::bit_cast<std::uint64_t>(m(r, c));
      for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
  }
}

Eigen::MatrixXd read_matrix(const std::vector<std::uint8_t>& bytes, std::size_t& offset) {
  if (offset + 12 > bytes.size()) throw Error(ErrorCode::Truncated, "matrix header cut short");
  if (std::memcmp(bytes.data() + offset, kMatrixMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, "expected DDL1 matrix block");
  }
  const std::size_t rows = get_le32(bytes, offset + 4);
  const std::size_t cols = get_le32(bytes, offset + 8);
  offset += 12;
  if (offset + rows * cols * 8 > bytes.size()) {
    throw Error(ErrorCode::Truncated, "matrix data shorter than " + std::to_string(rows) + "x" +
                                          std::to_string(cols));
  }
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= std::uint64_t{bytes[offset + i]} << (8 * i);
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = std::bit_cast<double>(bits);
      offset += 8;
    }
  }
  return m;
}

void save_matrix(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(12 + static_cast<std::size_t>(m.size()) * 8);
  append_matrix(bytes, m);
  write_file(path, bytes);
}

Eigen::MatrixXd load_matrix(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::size_t offset = 0;
  try {
    return read_matrix(bytes, offset);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  KeyValues kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto first = s.find_first_not_of(" \t\r");
      if (first == std::string::npos) return std::string{};
      const auto last = s.find_last_not_of(" \t\r");
      return s.substr(first, last - first + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void write_key_values(const std::filesystem::path& path, const KeyValues& kv) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& [key, value] : kv) out << key << '=' << value << '\n';
}

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path) {
  const Image shape = ds.empty() ? Image{} : ds.images.front();
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(ds.size()),
                       static_cast<Eigen::Index>(shape.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t p = 0; p < shape.size(); ++p) {
      rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = ds.images[i].pixels[p];
    }
  }
  save_matrix(rows, path);

  std::string labels;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    if (i) labels += ',';
    labels += std::to_string(ds.labels[i]);
  }
  write_key_values(path.string() + ".meta", {{"height", std::to_string(shape.height)},
                                             {"width", std::to_string(shape.width)},
                                             {"channels", std::to_string(shape.channels)},
                                             {"num_classes", std::to_string(ds.num_classes)},
                                             {"count", std::to_string(ds.size())},
                                             {"labels", labels}});
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
  const Eigen::MatrixXd rows = load_matrix(path);
  const std::filesystem::path meta_path = path.string() + ".meta";
  const KeyValues meta = read_key_values(meta_path);
  const std::size_t h = parse_size(meta, "height", meta_path);
  const std::size_t w = parse_size(meta, "width", meta_path);
  const std::size_t c = parse_size(meta, "channels", meta_path);
  const std::size_t count = parse_size(meta, "count", meta_path);
  if (static_cast<std::size_t>(rows.rows()) != count ||
      (count > 0 && static_cast<std::size_t>(rows.cols()) != h * w * c)) {
    throw Error(ErrorCode::CountMismatch, path.string() + " disagrees with its .meta sidecar");
  }

  LabeledDataset ds;
  ds.num_classes = static_cast<int>(parse_size(meta, "num_classes", meta_path));
  std::stringstream labels(meta.count("labels") ? meta.at("labels") : "");
  for (std::string item; std::getline(labels, item, ',');) ds.labels.push_back(std::stoi(item));
  if (ds.labels.size() != count) {
    throw Error(ErrorCode::CountMismatch, meta_path.string() + " label count differs from rows");
  }
  for (std::size_t i = 0; i < count; ++i) {
    Image img(h, w, c);
    for (std::size_t p = 0; p < img.size(); ++p) {
      img.pixels[p] = rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p));
    }
    ds.images.push_back(std::move(img));
  }
  validate(ds);
  return ds;
}

}  // namespace ddl
