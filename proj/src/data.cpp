#include "satlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "satlab/errors.hpp"
#include "satlab/rng.hpp"

namespace satlab {

void Dataset::normalize() {
  if (state == PixelState::normalized) throw PreconditionError("dataset '" + id + "' is already normalized");
  for (auto& v : images.storage()) v = normalize_pixel(v);
  state = PixelState::normalized;
}

void Dataset::denormalize() {
  if (state == PixelState::raw) throw PreconditionError("dataset '" + id + "' is already raw");
  for (auto& v : images.storage()) v = denormalize_pixel(v);
  state = PixelState::raw;
}

ImageBatch<float> Dataset::batch(const std::vector<std::size_t>& indices) const {
  if (state != PixelState::normalized) {
    throw PreconditionError("dataset '" + id + "' must be normalized before batching");
  }
  const std::size_t per = images.shape().per_sample();
  ImageBatch<float> b{Tensor<float>(images.shape().with_batch(indices.size())), {}};
  b.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t src = indices[i];
    if (src >= size()) throw DataError("sample index " + std::to_string(src) + " out of range");
    for (std::size_t j = 0; j < per; ++j) {
      b.pixels[i * per + j] = std::clamp(float(images[src * per + j]), -1.0f, 1.0f);
    }
    b.labels.push_back(labels[src]);
  }
  return b;
}

ImageBatch<float> Dataset::all() const {
  std::vector<std::size_t> idx(size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return batch(idx);
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out = *this;
  const std::size_t per = images.shape().per_sample();
  out.images = Tensor<double>(images.shape().with_batch(indices.size()));
  out.labels.clear();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw DataError("subset index out of range");
    std::copy_n(images.data() + indices[i] * per, per, out.images.data() + i * per);
    out.labels.push_back(labels[indices[i]]);
  }
  return out;
}

Dataset Dataset::select_classes(const std::vector<int>& classes, std::size_t per_class,
                                bool relabel) const {
  std::vector<std::size_t> taken(classes.size(), 0);
  std::vector<std::size_t> idx;
  std::vector<int> new_labels;
  for (std::size_t i = 0; i < size(); ++i) {
    const auto it = std::find(classes.begin(), classes.end(), labels[i]);
    if (it == classes.end()) continue;
    const std::size_t k = std::size_t(it - classes.begin());
    if (taken[k] >= per_class) continue;
    ++taken[k];
    idx.push_back(i);
    new_labels.push_back(relabel ? int(k) : labels[i]);
  }
  for (std::size_t k = 0; k < classes.size(); ++k) {
    if (taken[k] < per_class) {
      throw DataError("class " + std::to_string(classes[k]) + " has only " +
                      std::to_string(taken[k]) + " samples, " + std::to_string(per_class) +
                      " requested");
    }
  }
  Dataset out = subset(idx);
  out.labels = std::move(new_labels);
  if (relabel) out.num_classes = int(classes.size());
  return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> c(std::size_t(std::max(num_classes, 0)), 0);
  for (int y : labels) {
    if (y >= 0 && y < num_classes) ++c[std::size_t(y)];
  }
  return c;
}

Dataset load_cifar10_binary(const std::filesystem::path& path, Shape image, int num_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t per = image.per_sample();
  const std::size_t record = per + 1;
  if (per == 0 || bytes.empty() || bytes.size() % record != 0) {
    throw FormatError(path.string() + ": size " + std::to_string(bytes.size()) +
                      " is not a multiple of the " + std::to_string(record) + "-byte record");
  }
  const std::size_t n = bytes.size() / record;
  Dataset d;
  d.images = Tensor<double>(image.with_batch(n));
  d.labels.resize(n);
  d.num_classes = num_classes;
  d.id = path.filename().string();
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char label = bytes[i * record];
    if (label >= num_classes) {
      throw DataError(path.string() + ": record " + std::to_string(i) + " has label " +
                      std::to_string(int(label)));
    }
    d.labels[i] = label;
    for (std::size_t j = 0; j < per; ++j) d.images[i * per + j] = bytes[i * record + 1 + j];
  }
  return d;
}

Dataset load_cifar10_split(const std::filesystem::path& dir, const std::string& split,
                           std::size_t max_files) {
  std::vector<std::filesystem::path> files;
  if (split == "test") {
    files.push_back(dir / "test_batch.bin");
  } else if (split == "train") {
    for (std::size_t i = 1; i <= std::min<std::size_t>(max_files, 5); ++i) {
      const auto p = dir / ("data_batch_" + std::to_string(i) + ".bin");
      if (std::filesystem::exists(p)) files.push_back(p);
    }
    if (files.empty()) throw DataError("no data_batch_*.bin files under " + dir.string());
  } else {
    throw ConfigError("unknown split '" + split + "' (expected train or test)");
  }
  Dataset out;
  std::vector<double> pixels;
  for (const auto& f : files) {
    Dataset part = load_cifar10_binary(f);
    pixels.insert(pixels.end(), part.images.storage().begin(), part.images.storage().end());
    out.labels.insert(out.labels.end(), part.labels.begin(), part.labels.end());
  }
  out.images = Tensor<double>(Shape{out.labels.size(), 3, 32, 32}, std::move(pixels));
  out.split = split;
  out.id = "cifar10-" + split;
  return out;
}

void write_cifar10_binary(const Dataset& data, const std::filesystem::path& path) {
  if (data.state != PixelState::raw) throw PreconditionError("only raw datasets can be exported");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write dataset file: " + path.string());
  const std::size_t per = data.images.shape().per_sample();
  std::vector<char> record(per + 1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] < 0 || data.labels[i] > 255) throw DataError("label does not fit a byte");
    record[0] = char(data.labels[i]);
    for (std::size_t j = 0; j < per; ++j) {
      record[j + 1] = char(std::lround(std::clamp(data.images[i * per + j], 0.0, 255.0)));
    }
    out.write(record.data(), std::streamsize(record.size()));
  }
  if (!out) throw Error("failed writing dataset file: " + path.string());
}

ToyKind parse_toy_kind(const std::string& name) {
  if (name == "blobs") return ToyKind::blobs;
  if (name == "rings") return ToyKind::rings;
  throw ConfigError("unknown toy dataset kind '" + name + "' (expected blobs or rings)");
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> class_means(const Dataset& d) {
  const std::size_t per = d.images.shape().per_sample();
  std::vector<double> mean(std::size_t(d.num_classes) * per, 0.0);
  const auto counts = d.class_counts();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const std::size_t k = std::size_t(d.labels[i]);
    for (std::size_t j = 0; j < per; ++j) mean[k * per + j] += d.images[i * per + j] / double(counts[k]);
  }
  return mean;
}

}  // namespace

Dataset make_toy_dataset(ToyKind kind, std::size_t per_class, int classes, std::uint64_t seed,
                         Shape image, double sigma) {
  if (classes < 2) throw ConfigError("toy datasets need at least 2 classes");
  if (per_class < 1) throw ConfigError("toy datasets need at least one sample per class");
  if (!(sigma > 0.0)) throw ConfigError("toy sigma must be positive");
  const std::size_t per = image.per_sample();
  const std::size_t k = std::size_t(classes);
  Rng rng = make_rng(seed, kind == ToyKind::blobs ? 0xb10b : 0x7199);
  Dataset d;
  d.images = Tensor<double>(image.with_batch(per_class * k));
  d.labels.resize(per_class * k);
  d.num_classes = classes;
  d.id = kind == ToyKind::blobs ? "toy-blobs" : "toy-rings";

  if (kind == ToyKind::blobs) {
    std::vector<std::vector<double>> mu(k, std::vector<double>(per));
    for (auto& m : mu) {
      for (auto& v : m) v = 127.5 + (uniform(rng, 0.0, 1.0) < 0.5 ? -48.0 : 48.0);
    }
    // Unit directions between every pair of means, plus the separation guarantee.
    std::vector<std::vector<std::vector<double>>> dir(k, std::vector<std::vector<double>>(k));
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) {
        if (a == b) continue;
        std::vector<double> e(per);
        for (std::size_t j = 0; j < per; ++j) e[j] = mu[b][j] - mu[a][j];
        const double len = std::sqrt(dot(e, e));
        if (len < 6.0 * sigma) {
          throw DataError("toy blob means too close; use a larger image or fewer classes");
        }
        for (auto& v : e) v /= len;
        dir[a][b] = std::move(e);
      }
    }
    std::vector<double> x(per);
    for (std::size_t i = 0; i < per_class * k; ++i) {
      const std::size_t c = i % k;
      for (int attempt = 0;; ++attempt) {
        if (attempt > 10000) throw DataError("toy blob rejection sampling did not terminate");
        for (std::size_t j = 0; j < per; ++j) {
          x[j] = std::round(std::clamp(mu[c][j] + normal(rng, 0.0, sigma), 0.0, 255.0));
        }
        bool ok = true;
        for (std::size_t b = 0; b < k && ok; ++b) {
          if (b == c) continue;
          double proj = 0.0;
          for (std::size_t j = 0; j < per; ++j) proj += (x[j] - mu[c][j]) * dir[c][b][j];
          ok = proj <= 2.0 * sigma;
        }
        if (ok) break;
      }
      std::copy(x.begin(), x.end(), d.images.data() + i * per);
      d.labels[i] = int(c);
    }
  } else {
    std::vector<double> p1(per), p2(per);
    for (auto& v : p1) v = uniform(rng, -1.0, 1.0);
    for (auto& v : p2) v = uniform(rng, -1.0, 1.0);
    const double amp = 100.0 / double(k);
    for (std::size_t i = 0; i < per_class * k; ++i) {
      const std::size_t c = i % k;
      const double r = double(c + 1) + normal(rng, 0.0, 0.1);
      const double theta = uniform(rng, 0.0, 2.0 * 3.14159265358979323846);
      const double a = r * std::cos(theta), b = r * std::sin(theta);
      for (std::size_t j = 0; j < per; ++j) {
        d.images[i * per + j] = std::round(std::clamp(127.5 + amp * (a * p1[j] + b * p2[j]) * 0.5, 0.0, 255.0));
      }
      d.labels[i] = int(c);
    }
  }
  return d;
}

std::vector<int> nearest_mean_predict(const Dataset& reference, const Dataset& data) {
  if (reference.state != data.state) throw PreconditionError("datasets in different pixel states");
  const std::size_t per = data.images.shape().per_sample();
  const auto mean = class_means(reference);
  std::vector<int> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    double best = INFINITY;
    for (int c = 0; c < reference.num_classes; ++c) {
      double dist = 0.0;
      for (std::size_t j = 0; j < per; ++j) {
        const double e = data.images[i * per + j] - mean[std::size_t(c) * per + j];
        dist += e * e;
      }
      if (dist < best) {
        best = dist;
        out[i] = c;
      }
    }
  }
  return out;
}

}  // namespace satlab
