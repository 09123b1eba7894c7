#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "satlab/tensor.hpp"

namespace satlab {

enum class PixelState { raw, normalized };

/// raw [0, 255] -> normalized [-1, +1].
constexpr double normalize_pixel(double raw) { return raw / 127.5 - 1.0; }
constexpr double denormalize_pixel(double v) { return (v + 1.0) * 127.5; }

/// An in-memory image set. Pixels are kept in double so the raw/normalized conversion
/// round-trips cleanly; batches handed to models are float.
struct Dataset {
  Tensor<double> images;  // N x C x H x W
  std::vector<int> labels;
  int num_classes = 10;
  std::string split = "train";
  std::string id = "dataset";
  PixelState state = PixelState::raw;

  std::size_t size() const { return labels.size(); }
  Shape image_shape() const { return images.shape().with_batch(1); }

  /// Throws PreconditionError when already normalized.
  void normalize();
  /// Throws PreconditionError when already raw.
  void denormalize();

  /// Samples `indices` as a normalized float batch.
  ImageBatch<float> batch(const std::vector<std::size_t>& indices) const;
  ImageBatch<float> all() const;

  Dataset subset(const std::vector<std::size_t>& indices) const;

  /// First `per_class` samples of each listed class, interleaved in file order. When
  /// `relabel` is set the classes are renumbered 0..k-1 in the order given.
  Dataset select_classes(const std::vector<int>& classes, std::size_t per_class, bool relabel) const;

  std::vector<std::size_t> class_counts() const;
};

inline constexpr std::size_t kCifarRecordBytes = 3073;

/// CIFAR-10 binary: concatenated records of 1 label byte + C*H*W channel-major pixel bytes.
Dataset load_cifar10_binary(const std::filesystem::path& path, Shape image = {1, 3, 32, 32},
                            int num_classes = 10);

/// Loads data_batch_{1..5}.bin (whichever exist, at least one) or test_batch.bin from a
/// cifar-10-batches-bin directory.
Dataset load_cifar10_split(const std::filesystem::path& dir, const std::string& split,
                           std::size_t max_files = 5);

/// Writes a raw-state dataset in the record format; pixel values are rounded to bytes.
void write_cifar10_binary(const Dataset& data, const std::filesystem::path& path);

enum class ToyKind { blobs, rings };

ToyKind parse_toy_kind(const std::string& name);

/// Deterministic synthetic images in raw state with integer pixel values.
///   blobs  one mean image per class, means at least 6 sigma apart; each sample is accepted only
///          when its projection onto every normalized mean difference stays within 2 sigma, so the
///          nearest-mean rule (a linear discriminant) classifies every sample correctly.
///   rings  a 2-d point on a class-specific radius, embedded through two fixed pixel patterns;
///          not linearly separable.
Dataset make_toy_dataset(ToyKind kind, std::size_t per_class, int classes, std::uint64_t seed,
                         Shape image = {1, 3, 8, 8}, double sigma = 12.0);

/// Nearest class mean in raw pixel space (the closed-form discriminant for blobs).
std::vector<int> nearest_mean_predict(const Dataset& reference, const Dataset& data);

// ---------------------------------------------------------------------------------------------
// Corruptions

/// Closed-form corruption with resolved parameters. `params[0]` is the severity parameter.
struct CorruptionSpec {
  std::string name;
  int severity = 1;
  std::vector<double> params;
};

/// Severity tables: name -> parameter per severity 1..5.
struct CorruptionTable {
  int version = 1;
  std::map<std::string, std::vector<double>> levels;

  /// Built-in table; same contents as configs/corruptions-v1.json.
  static CorruptionTable defaults();
  static CorruptionTable load(const std::filesystem::path& path);

  /// Throws ConfigError for unknown names, bad severities or non-monotone tables.
  CorruptionSpec spec(const std::string& name, int severity) const;
  std::vector<std::string> names() const;
  void validate() const;
};

const std::vector<std::string>& corruption_names();

/// Applies the corruption in raw space (denormalize, corrupt, renormalize, clip). Noise draws come
/// from `seed`.
template <typename T>
ImageBatch<T> corrupt(const ImageBatch<T>& batch, const CorruptionSpec& spec, std::uint64_t seed);

}  // namespace satlab
