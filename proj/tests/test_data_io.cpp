#include <doctest.h>

#include <array>
#include <cstring>
#include <fstream>

#include "ddl/data_io.hpp"
#include "test_util.hpp"

using namespace ddl;

namespace {

std::vector<std::uint8_t> idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                                     std::uint8_t fill) {
  std::vector<std::uint8_t> out;
  testutil::put_be32(out, 0x803);
  testutil::put_be32(out, count);
  testutil::put_be32(out, rows);
  testutil::put_be32(out, cols);
  for (std::uint32_t i = 0; i < count * rows * cols; ++i) out.push_back(static_cast<std::uint8_t>(fill + i));
  return out;
}

std::vector<std::uint8_t> idx_labels(std::uint32_t count) {
  std::vector<std::uint8_t> out;
  testutil::put_be32(out, 0x801);
  testutil::put_be32(out, count);
  for (std::uint32_t i = 0; i < count; ++i) out.push_back(static_cast<std::uint8_t>(i % 10));
  return out;
}

std::vector<std::uint8_t> cifar_record(std::uint8_t label) {
  std::vector<std::uint8_t> rec(3073);
  rec[0] = label;
  for (std::size_t i = 0; i < 3072; ++i) rec[1 + i] = static_cast<std::uint8_t>(i / 1024 * 100 + i % 7);
  return rec;
}

}  // namespace

TEST_CASE("idx: ten 28x28 images from a hand-built header") {
  const auto dir = testutil::scratch("idx_basic");
  write_file(dir / "img", idx_images(10, 28, 28, 0));
  write_file(dir / "lbl", idx_labels(10));
  const LabeledDataset ds = load_idx(dir / "img", dir / "lbl");
  REQUIRE(ds.size() == 10);
  CHECK(ds.images[0].height == 28);
  CHECK(ds.images[0].width == 28);
  CHECK(ds.images[0].channels == 1);
  CHECK(ds.labels[3] == 3);
  CHECK(ds.num_classes == 10);
  // byte i of the pixel block is (i mod 256)
  CHECK(ds.images[1].pixels[0] == (784 % 256) / 255.0);
}

TEST_CASE("idx: byte 255 maps to exactly 1.0 and 0 to 0.0") {
  const auto dir = testutil::scratch("idx_scale");
  auto img = idx_images(1, 2, 2, 0);
  img[16] = 255;
  img[17] = 0;
  write_file(dir / "img", img);
  write_file(dir / "lbl", idx_labels(1));
  const auto ds = load_idx(dir / "img", dir / "lbl");
  CHECK(ds.images[0].pixels[0] == 1.0);
  CHECK(ds.images[0].pixels[1] == 0.0);
}

TEST_CASE("idx: format errors") {
  const auto dir = testutil::scratch("idx_errors");
  write_file(dir / "img", idx_images(3, 4, 4, 0));
  write_file(dir / "lbl", idx_labels(3));

  SUBCASE("swapped files are BadMagic") {
    CHECK_ERROR_CODE(load_idx(dir / "lbl", dir / "img"), ErrorCode::BadMagic);
  }
  SUBCASE("count disagreement") {
    write_file(dir / "lbl2", idx_labels(2));
    CHECK_ERROR_CODE(load_idx(dir / "img", dir / "lbl2"), ErrorCode::CountMismatch);
  }
  SUBCASE("pixel block shorter than header") {
    auto img = idx_images(3, 4, 4, 0);
    img.resize(img.size() - 1);
    write_file(dir / "img2", img);
    CHECK_ERROR_CODE(load_idx(dir / "img2", dir / "lbl"), ErrorCode::Truncated);
  }
  SUBCASE("header cut short") {
    write_file(dir / "img3", {0, 0, 8, 3, 0});
    CHECK_ERROR_CODE(load_idx(dir / "img3", dir / "lbl"), ErrorCode::Truncated);
  }
  SUBCASE("missing file") {
    CHECK_ERROR_CODE(load_idx(dir / "nope", dir / "lbl"), ErrorCode::Io);
  }
}

TEST_CASE("idx: bundled gzip MNIST subset matches its known label histogram") {
  // Histogram computed by an independent Python reader when the subset was made.
  const std::array<int, 10> train_hist = {399, 394, 408, 400, 399, 399, 387, 406, 410, 398};
  const std::array<int, 10> test_hist = {101, 106, 92, 100, 101, 101, 113, 94, 90, 102};
  const auto dir = testutil::mnist_dir();
  const auto train =
      load_idx(dir / "train-images-idx3-ubyte.gz", dir / "train-labels-idx1-ubyte.gz");
  const auto test = load_idx(dir / "t10k-images-idx3-ubyte.gz", dir / "t10k-labels-idx1-ubyte.gz");
  REQUIRE(train.size() == 4000);
  REQUIRE(test.size() == 1000);
  std::array<int, 10> h1{}, h2{};
  for (int l : train.labels) ++h1[l];
  for (int l : test.labels) ++h2[l];
  CHECK(h1 == train_hist);
  CHECK(h2 == test_hist);
  validate(train);
  validate(test);

  // gzip is recognised by content, not by the file name
  const auto copy = testutil::scratch("idx_gzip_name");
  std::filesystem::copy_file(dir / "t10k-images-idx3-ubyte.gz", copy / "images");
  std::filesystem::copy_file(dir / "t10k-labels-idx1-ubyte.gz", copy / "labels");
  CHECK(load_idx(copy / "images", copy / "labels") == test);
}

TEST_CASE("cifar: records, planar to interleaved, errors") {
  const auto dir = testutil::scratch("cifar");
  SUBCASE("single record keeps its label and channel layout") {
    write_file(dir / "one.bin", cifar_record(7));
    const auto ds = load_cifar_binary({dir / "one.bin"});
    REQUIRE(ds.size() == 1);
    CHECK(ds.labels[0] == 7);
    const Image& img = ds.images[0];
    CHECK(img.height == 32);
    CHECK(img.channels == 3);
    // plane value at planar index c*1024 + r*32 + col
    const std::size_t r = 5, c = 9;
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const std::size_t planar = ch * 1024 + r * 32 + c;
      CHECK(img.at(r, c, ch) == (planar / 1024 * 100 + planar % 7) / 255.0);
    }
  }
  SUBCASE("30730 bytes hold ten images") {
    std::vector<std::uint8_t> bytes;
    for (int i = 0; i < 10; ++i) {
      const auto rec = cifar_record(static_cast<std::uint8_t>(i));
      bytes.insert(bytes.end(), rec.begin(), rec.end());
    }
    REQUIRE(bytes.size() == 30730);
    write_file(dir / "ten.bin", bytes);
    CHECK(load_cifar_binary({dir / "ten.bin"}).size() == 10);
  }
  SUBCASE("label above 9") {
    write_file(dir / "bad.bin", cifar_record(10));
    CHECK_ERROR_CODE(load_cifar_binary({dir / "bad.bin"}), ErrorCode::LabelOutOfRange);
  }
  SUBCASE("partial record") {
    auto rec = cifar_record(1);
    rec.pop_back();
    write_file(dir / "short.bin", rec);
    CHECK_ERROR_CODE(load_cifar_binary({dir / "short.bin"}), ErrorCode::Truncated);
  }
}

TEST_CASE("synthesize: deterministic, round-robin labels, pixels in range") {
  const auto a = synthesize_dataset(1, 100, {8, 8, 1}, 2);
  const auto b = synthesize_dataset(1, 100, {8, 8, 1}, 2);
  CHECK(a == b);
  CHECK_FALSE(a == synthesize_dataset(2, 100, {8, 8, 1}, 2));
  validate(a);

  const auto ten = synthesize_dataset(3, 10, {16, 16, 1}, 10);
  std::vector<int> seen(10, 0);
  for (int l : ten.labels) ++seen[l];
  CHECK(seen == std::vector<int>(10, 1));

  const auto colour = synthesize_dataset(4, 20, {8, 8, 3}, 4);
  validate(colour);
  CHECK(colour.images[0].channels == 3);
}

TEST_CASE("matrix files: size, bit-exact round trip, bad magic, truncation") {
  const auto dir = testutil::scratch("matrix");
  save_matrix(Eigen::MatrixXd::Identity(2, 2), dir / "eye.ddl1");
  CHECK(std::filesystem::file_size(dir / "eye.ddl1") == 4 + 8 + 32);
  const auto bytes = read_file(dir / "eye.ddl1");
  CHECK(std::memcmp(bytes.data(), "DDL1", 4) == 0);
  CHECK(bytes[4] == 2);  // rows, little endian
  CHECK(bytes[8] == 2);

  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd m = testutil::random_matrix(rng, 1 + trial % 5, 1 + trial % 7) * 1e3;
    m(0, 0) = -0.0;
    save_matrix(m, dir / "m.ddl1");
    const Eigen::MatrixXd back = load_matrix(dir / "m.ddl1");
    REQUIRE(back.rows() == m.rows());
    REQUIRE(back.cols() == m.cols());
    CHECK(std::memcmp(back.data(), m.data(), sizeof(double) * m.size()) == 0);
  }

  auto bad = bytes;
  std::memcpy(bad.data(), "XXXX", 4);
  write_file(dir / "bad.ddl1", bad);
  CHECK_ERROR_CODE(load_matrix(dir / "bad.ddl1"), ErrorCode::BadMagic);

  auto cut = bytes;
  cut.resize(cut.size() - 3);
  write_file(dir / "cut.ddl1", cut);
  CHECK_ERROR_CODE(load_matrix(dir / "cut.ddl1"), ErrorCode::Truncated);

  save_matrix(Eigen::MatrixXd(0, 3), dir / "empty.ddl1");
  CHECK(load_matrix(dir / "empty.ddl1").cols() == 3);
}

TEST_CASE("datasets persist with their labels") {
  const auto dir = testutil::scratch("dataset");
  const auto ds = synthesize_dataset(5, 12, {6, 5, 3}, 4);
  save_dataset(ds, dir / "ds.ddl1");
  CHECK(load_dataset(dir / "ds.ddl1") == ds);

  LabeledDataset empty;
  empty.num_classes = 3;
  save_dataset(empty, dir / "empty.ddl1");
  CHECK(load_dataset(dir / "empty.ddl1").empty());
}

TEST_CASE("key=value files ignore comments and blank lines") {
  const auto dir = testutil::scratch("kv");
  {
    std::ofstream out(dir / "cfg");
    out << "# comment\n\n seed = 7 \nepochs=3 # trailing\n";
  }
  const auto kv = read_key_values(dir / "cfg");
  CHECK(kv.size() == 2);
  CHECK(kv.at("seed") == "7");
  CHECK(kv.at("epochs") == "3");
}

TEST_CASE("validate rejects out-of-range pixels and labels") {
  Image img(2, 2, 1, 0.5);
  img.pixels[3] = 1.5;
  CHECK_THROWS_AS(validate(img), Error);
  LabeledDataset ds;
  ds.images = {Image(2, 2, 1)};
  ds.labels = {4};
  ds.num_classes = 3;
  CHECK_THROWS_AS(validate(ds), Error);
}
