#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "satlab/data.hpp"
#include "satlab/errors.hpp"
#include "satlab/rng.hpp"

using namespace satlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "satlab-test-data";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

ImageBatch<double> flat_images(std::size_t n, double raw, Shape image = {1, 3, 8, 8}) {
  ImageBatch<double> b{Tensor<double>(image.with_batch(n), normalize_pixel(raw)), {}};
  b.labels.assign(n, 0);
  return b;
}

ImageBatch<double> random_images(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  ImageBatch<double> b{Tensor<double>(Shape{n, 3, 8, 8}), std::vector<int>(n, 0)};
  for (auto& v : b.pixels.storage()) v = normalize_pixel(double(uniform_index(rng, 256)));
  return b;
}

}  // namespace

TEST_CASE("cifar binary records") {
  // Two hand-built records: label 3 with pixels j % 256, label 9 with 255 - j % 256.
  std::vector<unsigned char> bytes;
  for (int r = 0; r < 2; ++r) {
    bytes.push_back(r == 0 ? 3 : 9);
    for (int j = 0; j < 3072; ++j) bytes.push_back(static_cast<unsigned char>(r == 0 ? j % 256 : 255 - j % 256));
  }
  const auto path = scratch("two.bin");
  write_bytes(path, bytes);
  const Dataset d = load_cifar10_binary(path);
  REQUIRE(d.size() == 2);
  CHECK(d.labels == std::vector<int>{3, 9});
  CHECK(d.images.shape() == Shape{2, 3, 32, 32});
  CHECK(d.state == PixelState::raw);
  CHECK(d.images.at(0, 0, 0, 5) == 5.0);
  CHECK(d.images.at(0, 2, 31, 31) == double(3071 % 256));
  CHECK(d.images.at(1, 1, 0, 0) == double(255 - 1024 % 256));

  Dataset n = d;
  n.normalize();
  CHECK(n.images.at(0, 0, 0, 0) == -1.0);
  CHECK(n.images.at(1, 0, 0, 0) == 1.0);

  // Round trip through the writer.
  const auto copy = scratch("copy.bin");
  write_cifar10_binary(d, copy);
  CHECK(fs::file_size(copy) == 2 * kCifarRecordBytes);
  const Dataset again = load_cifar10_binary(copy);
  CHECK(again.images == d.images);
  CHECK(again.labels == d.labels);
  CHECK_THROWS_AS(write_cifar10_binary(n, copy), PreconditionError);

  SUBCASE("truncated record") {
    write_bytes(path, std::vector<unsigned char>(3072, 0));
    CHECK_THROWS_AS(load_cifar10_binary(path), FormatError);
    write_bytes(path, {});
    CHECK_THROWS_AS(load_cifar10_binary(path), FormatError);
  }
  SUBCASE("label out of range") {
    bytes[kCifarRecordBytes] = 10;
    write_bytes(path, bytes);
    CHECK_THROWS_AS(load_cifar10_binary(path), DataError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_cifar10_binary(scratch("absent.bin")), DataError);
  }
}

TEST_CASE("cifar split directory") {
  const fs::path dir = scratch("split");
  fs::remove_all(dir);
  fs::create_directories(dir);
  CHECK_THROWS_AS(load_cifar10_split(dir, "train"), DataError);
  std::vector<unsigned char> bytes;
  for (int r = 0; r < 3; ++r) {
    bytes.push_back(static_cast<unsigned char>(r));
    bytes.insert(bytes.end(), 3072, static_cast<unsigned char>(10 * r));
  }
  write_bytes(dir / "data_batch_1.bin", bytes);
  write_bytes(dir / "data_batch_2.bin", bytes);
  write_bytes(dir / "test_batch.bin", bytes);
  const Dataset train = load_cifar10_split(dir, "train");
  CHECK(train.size() == 6);
  CHECK(train.split == "train");
  CHECK(load_cifar10_split(dir, "train", 1).size() == 3);
  CHECK(load_cifar10_split(dir, "test").split == "test");
  CHECK_THROWS_AS(load_cifar10_split(dir, "validation"), ConfigError);
}

TEST_CASE("dataset helpers") {
  Dataset d = make_toy_dataset(ToyKind::blobs, 4, 3, 1);
  CHECK(d.size() == 12);
  CHECK(d.class_counts() == std::vector<std::size_t>{4, 4, 4});
  CHECK_THROWS_AS(d.batch({0}), PreconditionError);
  const Dataset raw = d;
  d.normalize();
  CHECK_THROWS_AS(d.normalize(), PreconditionError);
  d.denormalize();
  double worst = 0.0;
  for (std::size_t i = 0; i < d.images.size(); ++i) worst = std::max(worst, std::abs(d.images[i] - raw.images[i]));
  CHECK(worst < 1e-6);
  CHECK_THROWS_AS(d.denormalize(), PreconditionError);

  const Dataset two = d.select_classes({2, 0}, 3, true);
  CHECK(two.size() == 6);
  CHECK(two.num_classes == 2);
  CHECK(two.class_counts() == std::vector<std::size_t>{3, 3});
  CHECK_THROWS_AS(d.select_classes({2}, 10, false), DataError);
  const Dataset keep = d.select_classes({2}, 4, false);
  CHECK(keep.size() == 4);
  CHECK(keep.labels == std::vector<int>(4, 2));
  CHECK_THROWS_AS(d.select_classes({5}, 1, true), DataError);

  d.normalize();
  const auto b = d.batch({11, 0});
  CHECK(b.labels == std::vector<int>{d.labels[11], d.labels[0]});
  CHECK(b.pixels.shape() == Shape{2, 3, 8, 8});
  CHECK_THROWS_AS(d.batch({12}), DataError);
}

TEST_CASE("toy datasets") {
  const Dataset a = make_toy_dataset(ToyKind::blobs, 50, 4, 7);
  const Dataset b = make_toy_dataset(ToyKind::blobs, 50, 4, 7);
  const Dataset c = make_toy_dataset(ToyKind::blobs, 50, 4, 8);
  CHECK(a.images == b.images);
  CHECK(a.labels == b.labels);
  CHECK_FALSE(a.images == c.images);
  for (double v : a.images.storage()) {
    REQUIRE(v == std::round(v));
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 255.0);
  }

  // Nearest empirical mean separates every blob sample.
  const auto pred = nearest_mean_predict(a, a);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == a.labels[i];
  CHECK(correct == a.size());

  const Dataset rings = make_toy_dataset(ToyKind::rings, 30, 3, 2);
  CHECK(rings.size() == 90);
  CHECK(rings.class_counts() == std::vector<std::size_t>{30, 30, 30});
  CHECK(make_toy_dataset(ToyKind::rings, 30, 3, 2).images == rings.images);

  CHECK_THROWS_AS(make_toy_dataset(ToyKind::blobs, 10, 1, 0), ConfigError);
  CHECK_THROWS_AS(make_toy_dataset(ToyKind::rings, 0, 2, 0), ConfigError);
  CHECK(parse_toy_kind("rings") == ToyKind::rings);
  CHECK_THROWS_AS(parse_toy_kind("moons"), ConfigError);
}

TEST_CASE("corruption table") {
  const CorruptionTable t = CorruptionTable::defaults();
  CHECK_NOTHROW(t.validate());
  CHECK(t.names() == corruption_names());
  CHECK(t.spec("gaussian-noise", 3).params.at(0) == 18.0);
  CHECK_THROWS_AS(t.spec("fog", 1), ConfigError);
  CHECK_THROWS_AS(t.spec("contrast", 0), ConfigError);
  CHECK_THROWS_AS(t.spec("contrast", 6), ConfigError);

  CorruptionTable bad = t;
  bad.levels["brightness"] = {13, 26, 26, 51, 77};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = t;
  bad.levels["contrast"] = {0.15, 0.3, 0.4, 0.5, 0.75};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = t;
  bad.levels["fog"] = {1, 2, 3, 4, 5};
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  const auto path = scratch("table.json");
  {
    std::ofstream out(path);
    out << R"({"version": 2, "corruptions": {"brightness": {"values": [1, 2, 3, 4, 5]}}})";
  }
  const CorruptionTable loaded = CorruptionTable::load(path);
  CHECK(loaded.version == 2);
  CHECK(loaded.names() == std::vector<std::string>{"brightness"});
  {
    std::ofstream out(path);
    out << R"({"version": 2, "corruptions": {"brightness": {"values": [5, 4, 3, 2, 1]}}})";
  }
  CHECK_THROWS_AS(CorruptionTable::load(path), ConfigError);
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(CorruptionTable::load(path), ConfigError);
}

TEST_CASE("shipped corruption table matches the built-in defaults") {
  const fs::path shipped = fs::path(SATLAB_SOURCE_DIR) / "configs" / "corruptions-v1.json";
  const CorruptionTable t = CorruptionTable::load(shipped);
  CHECK(t.levels == CorruptionTable::defaults().levels);
  CHECK(t.version == 1);
}

TEST_CASE("corruption closed forms") {
  const CorruptionTable t = CorruptionTable::defaults();
  const auto x = random_images(4, 3);

  SUBCASE("contrast factor 1 is the identity") {
    const auto y = corrupt(x, CorruptionSpec{"contrast", 1, {1.0}}, 0);
    for (std::size_t i = 0; i < x.pixels.size(); ++i) REQUIRE(y.pixels[i] == doctest::Approx(x.pixels[i]).epsilon(1e-12));
    const auto xf = x.cast<float>();
    CHECK(corrupt(xf, CorruptionSpec{"contrast", 1, {1.0}}, 0).pixels == xf.pixels);
  }
  SUBCASE("brightness shifts by 2 delta / 255 before clipping") {
    const auto mid = flat_images(2, 100.0);
    for (int s = 1; s <= 5; ++s) {
      const auto spec = t.spec("brightness", s);
      const auto y = corrupt(mid, spec, 0);
      for (std::size_t i = 0; i < y.pixels.size(); ++i) {
        REQUIRE(y.pixels[i] - mid.pixels[i] == doctest::Approx(2.0 * spec.params[0] / 255.0).epsilon(1e-12));
      }
    }
    const auto bright = flat_images(1, 250.0);
    const auto clipped = corrupt(bright, t.spec("brightness", 5), 0);
    for (double v : clipped.pixels.storage()) CHECK(v == 1.0);
  }
  SUBCASE("gaussian noise severity 3 has std 18 raw") {
    const auto grey = flat_images(64, 127.5, {1, 3, 16, 16});
    const auto y = corrupt(grey, t.spec("gaussian-noise", 3), 11);
    double s1 = 0.0, s2 = 0.0;
    for (double v : y.pixels.storage()) {
      const double d = denormalize_pixel(v) - 127.5;
      s1 += d;
      s2 += d * d;
    }
    const double n = double(y.pixels.size());
    const double sd = std::sqrt(s2 / n - (s1 / n) * (s1 / n));
    CHECK(std::abs(sd - 18.0) < 0.05 * 18.0);
  }
  SUBCASE("pixelate and blur preserve flat images") {
    const auto flat = flat_images(2, 77.0);
    for (const char* name : {"pixelate", "gaussian-blur", "defocus-blur", "contrast", "saturate"}) {
      const auto y = corrupt(flat, t.spec(name, 5), 0);
      for (std::size_t i = 0; i < y.pixels.size(); ++i) {
        REQUIRE(y.pixels[i] == doctest::Approx(flat.pixels[i]).epsilon(1e-12));
      }
    }
  }
  SUBCASE("pixelate averages blocks") {
    auto img = flat_images(1, 0.0, {1, 1, 2, 2});
    img.pixels.storage() = {normalize_pixel(0), normalize_pixel(100), normalize_pixel(20), normalize_pixel(40)};
    const auto y = corrupt(img, CorruptionSpec{"pixelate", 1, {2.0}}, 0);
    for (double v : y.pixels.storage()) CHECK(denormalize_pixel(v) == doctest::Approx(40.0));
  }
}

TEST_CASE("every corruption keeps shape, range and determinism") {
  const CorruptionTable t = CorruptionTable::defaults();
  const auto x = random_images(3, 5);
  for (const auto& name : corruption_names()) {
    for (int s = 1; s <= 5; ++s) {
      CAPTURE(name);
      CAPTURE(s);
      const auto y = corrupt(x, t.spec(name, s), 42);
      REQUIRE(y.pixels.shape() == x.pixels.shape());
      REQUIRE(y.labels == x.labels);
      for (double v : y.pixels.storage()) {
        REQUIRE(v >= -1.0);
        REQUIRE(v <= 1.0);
      }
      REQUIRE(corrupt(x, t.spec(name, s), 42).pixels == y.pixels);
    }
  }
  CHECK_THROWS_AS(corrupt(x, CorruptionSpec{"fog", 1, {1.0}}, 0), ConfigError);
}
