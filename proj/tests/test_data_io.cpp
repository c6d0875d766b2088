#include <doctest.h>

#include <cstdint>
#include <random>
#include <sstream>

#include "wavedef/checkpoint.hpp"
#include "wavedef/config.hpp"
#include "wavedef/data.hpp"
#include "wavedef/ops.hpp"

using namespace wavedef;

namespace {

void put_u32_be(std::string& s, uint32_t v) {
  s.push_back(static_cast<char>((v >> 24) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>(v & 0xff));
}

std::string idx_image_fixture(const std::vector<std::vector<uint8_t>>& images, uint32_t rows,
                              uint32_t cols) {
  std::string s;
  put_u32_be(s, 0x00000803);
  put_u32_be(s, static_cast<uint32_t>(images.size()));
  put_u32_be(s, rows);
  put_u32_be(s, cols);
  for (const auto& img : images) s.append(img.begin(), img.end());
  return s;
}

std::string idx_label_fixture(const std::vector<uint8_t>& labels) {
  std::string s;
  put_u32_be(s, 0x00000801);
  put_u32_be(s, static_cast<uint32_t>(labels.size()));
  s.append(labels.begin(), labels.end());
  return s;
}

}  // namespace

TEST_CASE("IDX image fixture round-trips to exact pixel values") {
  std::vector<std::vector<uint8_t>> imgs(2, std::vector<uint8_t>(28 * 28));
  for (int i = 0; i < 28 * 28; ++i) {
    imgs[0][i] = static_cast<uint8_t>(i % 251);
    imgs[1][i] = static_cast<uint8_t>((255 - i) % 256);
  }
  std::istringstream in(idx_image_fixture(imgs, 28, 28));
  IdxContent content = load_idx(in);
  REQUIRE(content.is_images);
  CHECK(content.images.shape() == Shape{2, 1, 28, 28});
  for (int n = 0; n < 2; ++n) {
    for (int i = 0; i < 28 * 28; ++i) {
      CHECK(content.images.data()[n * 28 * 28 + i] == imgs[n][i] / 255.0);
    }
  }
}

TEST_CASE("IDX label fixture") {
  std::istringstream in(idx_label_fixture({3, 7}));
  IdxContent content = load_idx(in);
  CHECK_FALSE(content.is_images);
  CHECK(content.labels == std::vector<int>{3, 7});
}

TEST_CASE("IDX error contracts") {
  {
    std::istringstream in("\x12\x34\x56\x78garbage");
    CHECK_THROWS_AS(load_idx(in), FormatError);
  }
  {
    // declares 3 images but carries only one
    std::vector<std::vector<uint8_t>> imgs(1, std::vector<uint8_t>(4, 9));
    std::string s = idx_image_fixture(imgs, 2, 2);
    s[7] = 3;  // image count LSB
    std::istringstream in(s);
    CHECK_THROWS_AS(load_idx(in), FormatError);
  }
  {
    std::string s = idx_label_fixture({1});
    s[7] = 9;  // declare more labels than present
    std::istringstream in(s);
    CHECK_THROWS_AS(load_idx(in), FormatError);
  }
  {
    std::istringstream in(std::string("\x00\x00\x08\x03", 4));  // truncated header
    CHECK_THROWS_AS(load_idx(in), FormatError);
  }
}

TEST_CASE("CIFAR-10 single synthetic record") {
  std::string s(3073, '\0');
  s[0] = 5;
  for (int i = 0; i < 3072; ++i) s[1 + i] = static_cast<char>(i % 256);
  std::istringstream in(s);
  Cifar10Data data = load_cifar10_binary(in);
  CHECK(data.labels == std::vector<int>{5});
  CHECK(data.images.shape() == Shape{1, 3, 32, 32});
  // channel-planar layout: red plane first
  CHECK(data.images.at({0, 0, 0, 0}) == 0.0 / 255.0);
  CHECK(data.images.at({0, 0, 0, 1}) == 1.0 / 255.0);
  CHECK(data.images.at({0, 1, 0, 0}) == (1024 % 256) / 255.0);
  CHECK(data.images.at({0, 2, 31, 31}) == ((3071) % 256) / 255.0);
}

TEST_CASE("CIFAR-10 length contracts") {
  {
    std::istringstream in("");
    Cifar10Data data = load_cifar10_binary(in);
    CHECK(data.labels.empty());
    CHECK_FALSE(data.images.defined());
  }
  {
    std::istringstream in(std::string(3072, 'x'));
    CHECK_THROWS_AS(load_cifar10_binary(in), FormatError);
  }
}

TEST_CASE("parsers survive random byte fuzzing") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t len = rng() % 512;
    std::string bytes(len, '\0');
    for (auto& c : bytes) c = static_cast<char>(rng() & 0xff);
    {
      std::istringstream in(bytes);
      try {
        load_idx(in);
      } catch (const FormatError&) {
      }
    }
    {
      std::istringstream in(bytes);
      try {
        load_cifar10_binary(in);
      } catch (const FormatError&) {
      }
    }
    try {
      parse_checkpoint(reinterpret_cast<const uint8_t*>(bytes.data()), bytes.size());
    } catch (const FormatError&) {
    }
  }
}

TEST_CASE("bilinear resize matches a hand-computed case and is deterministic") {
  // 2x2 -> 4x4 with half-pixel centers: corners keep their values, the
  // interior blends with weights 0.75/0.25
  Tensor x = Tensor::from_data({1, 1, 2, 2}, {0.0, 1.0, 2.0, 3.0});
  Tensor y = resize_bilinear(x, 4, 4);
  CHECK(y.at({0, 0, 0, 0}) == doctest::Approx(0.0));
  CHECK(y.at({0, 0, 0, 3}) == doctest::Approx(1.0));
  CHECK(y.at({0, 0, 3, 0}) == doctest::Approx(2.0));
  CHECK(y.at({0, 0, 0, 1}) == doctest::Approx(0.25));
  CHECK(y.at({0, 0, 1, 0}) == doctest::Approx(0.5));
  Tensor z = resize_bilinear(x, 4, 4);
  CHECK(max_abs_diff(y, z) == 0.0);

  std::mt19937_64 rng(1);
  Tensor big = Tensor::uniform({2, 1, 28, 28}, 0.0, 1.0, rng);
  Tensor up = resize_bilinear(big, 32, 32);
  CHECK(up.shape() == Shape{2, 1, 32, 32});
}

TEST_CASE("synthetic dataset determinism, balance and range") {
  DatasetHandle a = synthetic_dataset(7, 100, 10, "train");
  DatasetHandle b = synthetic_dataset(7, 100, 10, "train");
  CHECK(max_abs_diff(a.images, b.images) == 0.0);
  CHECK(a.labels == b.labels);

  DatasetHandle t = synthetic_dataset(7, 100, 10, "test");
  CHECK(max_abs_diff(a.images, t.images) > 0.0);  // different split stream

  std::vector<int> hist(10, 0);
  for (int label : a.labels) ++hist[static_cast<std::size_t>(label)];
  const auto [lo, hi] = std::minmax_element(hist.begin(), hist.end());
  CHECK(*hi - *lo <= 1);

  for (int64_t i = 0; i < a.images.size(); ++i) {
    CHECK(a.images.data()[i] >= 0.0);
    CHECK(a.images.data()[i] <= 1.0);
  }
}

TEST_CASE("checkpoint round-trip is byte-identical") {
  std::mt19937_64 rng(5);
  NamedTensors tensors;
  tensors.emplace_back("a.w", Tensor::randn({3, 4}, rng));
  tensors.emplace_back("a.b", Tensor::randn({4}, rng));
  tensors.emplace_back("scalar", Tensor::scalar(-0.0));  // sign bit must survive
  const auto bytes = serialize_checkpoint(tensors);
  NamedTensors parsed = parse_checkpoint(bytes.data(), bytes.size());
  const auto bytes2 = serialize_checkpoint(parsed);
  CHECK(bytes == bytes2);
  CHECK(parsed[0].first == "a.w");
  CHECK(max_abs_diff(parsed[0].second, tensors[0].second) == 0.0);
}

TEST_CASE("checkpoint error contracts") {
  NamedTensors tensors;
  tensors.emplace_back("x", Tensor::zeros({2}));
  auto bytes = serialize_checkpoint(tensors);

  {
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(parse_checkpoint(bad.data(), bad.size()), FormatError);
  }
  {
    auto bad = bytes;
    bad[4] = 9;  // unsupported version
    CHECK_THROWS_AS(parse_checkpoint(bad.data(), bad.size()), FormatError);
  }
  {
    CHECK_THROWS_AS(parse_checkpoint(bytes.data(), bytes.size() - 3), FormatError);
  }
  {
    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(parse_checkpoint(trailing.data(), trailing.size()), FormatError);
  }
  {
    NamedTensors dup;
    dup.emplace_back("same", Tensor::zeros({1}));
    dup.emplace_back("same", Tensor::zeros({1}));
    CHECK_THROWS_AS(serialize_checkpoint(dup), FormatError);
  }
  {
    // empty checkpoint is valid with count 0
    const auto empty = serialize_checkpoint({});
    CHECK(parse_checkpoint(empty.data(), empty.size()).empty());
  }
}

TEST_CASE("config defaults round-trip through dump and parse") {
  const RunConfig defaults = RunConfig::defaults();
  const std::string dumped = defaults.dump();
  const RunConfig parsed = RunConfig::parse_string(dumped);
  CHECK(parsed.dump() == dumped);
}

TEST_CASE("config error contracts") {
  CHECK_THROWS_AS(RunConfig::parse_string("no_such_key = 3\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse_string("seed = abc\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse_string("seed = 1\nseed = 2\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse_string("seed 1\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse_string("dataset = imagenet\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse_string("lr_start = 0.1\nlr_end = 0.2\n"), ConfigError);
  // comments and blank lines are fine
  CHECK_NOTHROW(RunConfig::parse_string("# comment\n\nseed = 3\n"));
}

TEST_CASE("per-dataset epsilon defaults") {
  RunConfig c;
  c.dataset = "mnist";
  CHECK(c.resolved_train_epsilon() == 0.3);
  CHECK(c.resolved_test_epsilon() == 0.2);
  c.dataset = "fmnist";
  CHECK(c.resolved_test_epsilon() == 0.1);
  c.dataset = "cifar10";
  CHECK(c.resolved_train_epsilon() == 0.15);
  CHECK(c.resolved_test_epsilon() == 0.05);
  c.dataset = "synthetic";
  CHECK(c.resolved_test_epsilon() == 0.3);
  c.test_epsilon = 0.07;
  CHECK(c.resolved_test_epsilon() == 0.07);
}

TEST_CASE("dataset subset caps and batch gathering") {
  DatasetHandle data = synthetic_dataset(3, 50, 10, "train");
  DatasetHandle capped = data.subset(20);
  CHECK(capped.count() == 20);
  CHECK(max_abs_diff(capped.image(7), data.image(7)) == 0.0);

  Tensor batch = data.batch({5, 0, 49});
  CHECK(batch.shape() == Shape{3, 1, 32, 32});
  CHECK(max_abs_diff(slice(batch, 0, 2, 1), data.image(49)) == 0.0);
  CHECK_THROWS_AS(data.batch({50}), ValueError);
}
