#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "satlab/data.hpp"
#include "satlab/errors.hpp"
#include "satlab/rng.hpp"

namespace satlab {

const std::vector<std::string>& corruption_names() {
  static const std::vector<std::string> names{
      "gaussian-noise", "shot-noise", "impulse-noise", "speckle-noise", "gaussian-blur",
      "defocus-blur",   "contrast",   "brightness",    "saturate",      "pixelate"};
  return names;
}

CorruptionTable CorruptionTable::defaults() {
  CorruptionTable t;
  t.levels = {
      {"gaussian-noise", {8, 13, 18, 26, 38}},         // sigma, raw units
      {"shot-noise", {60, 25, 12, 5, 3}},              // photons at full scale
      {"impulse-noise", {0.03, 0.06, 0.09, 0.17, 0.27}},  // replaced fraction
      {"speckle-noise", {0.06, 0.1, 0.12, 0.16, 0.2}},    // multiplicative sigma
      {"gaussian-blur", {0.4, 0.6, 0.7, 0.8, 1.0}},       // sigma, pixels
      {"defocus-blur", {1, 1.5, 2, 2.5, 3}},              // disk radius, pixels
      {"contrast", {0.75, 0.5, 0.4, 0.3, 0.15}},          // factor about the image mean
      {"brightness", {13, 26, 38, 51, 77}},               // additive shift, raw units
      {"saturate", {1.5, 2, 3, 5, 10}},                   // chroma gain about luminance
      {"pixelate", {2, 3, 4, 5, 6}},                      // block size, pixels
  };
  return t;
}

CorruptionTable CorruptionTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corruption table: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    CorruptionTable t;
    t.version = j.at("version").get<int>();
    for (const auto& [name, entry] : j.at("corruptions").items()) {
      t.levels[name] = entry.at("values").get<std::vector<double>>();
    }
    t.validate();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed corruption table " + path.string() + ": " + e.what());
  }
}

void CorruptionTable::validate() const {
  for (const auto& [name, values] : levels) {
    if (std::find(corruption_names().begin(), corruption_names().end(), name) == corruption_names().end()) {
      throw ConfigError("unknown corruption '" + name + "'");
    }
    if (values.size() != 5) throw ConfigError("corruption '" + name + "' needs 5 severity levels");
    // Severity grows with the parameter except where a smaller parameter is harsher.
    const bool decreasing = name == "shot-noise" || name == "contrast";
    for (std::size_t i = 1; i < values.size(); ++i) {
      const bool ok = decreasing ? values[i] < values[i - 1] : values[i] > values[i - 1];
      if (!ok) throw ConfigError("corruption '" + name + "' parameters are not strictly monotone");
    }
  }
}

std::vector<std::string> CorruptionTable::names() const {
  std::vector<std::string> out;
  for (const auto& n : corruption_names()) {
    if (levels.count(n)) out.push_back(n);
  }
  return out;
}

CorruptionSpec CorruptionTable::spec(const std::string& name, int severity) const {
  const auto it = levels.find(name);
  if (it == levels.end()) throw ConfigError("unknown corruption '" + name + "'");
  if (severity < 1 || severity > int(it->second.size())) {
    throw ConfigError("corruption severity must be 1..5, got " + std::to_string(severity));
  }
  return {name, severity, {it->second[std::size_t(severity - 1)]}};
}

namespace {

/// Symmetric reflection of an index into [0, n).
long reflect(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

/// 2-D correlation of every channel plane with a (2r+1)^2 kernel, reflected edges.
void filter_planes(std::vector<double>& img, std::size_t c, std::size_t h, std::size_t w,
                   const std::vector<double>& kernel, long r) {
  const long side = 2 * r + 1;
  std::vector<double> out(img.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = img.data() + ch * h * w;
    for (long y = 0; y < long(h); ++y) {
      for (long x = 0; x < long(w); ++x) {
        double s = 0.0;
        for (long dy = -r; dy <= r; ++dy) {
          for (long dx = -r; dx <= r; ++dx) {
            const double k = kernel[std::size_t((dy + r) * side + dx + r)];
            if (k != 0.0) s += k * src[reflect(y + dy, long(h)) * long(w) + reflect(x + dx, long(w))];
          }
        }
        out[ch * h * w + std::size_t(y) * w + std::size_t(x)] = s;
      }
    }
  }
  img = std::move(out);
}

std::vector<double> gaussian_kernel(double sigma, long& r) {
  r = std::max<long>(1, long(std::ceil(3.0 * sigma)));
  const long side = 2 * r + 1;
  std::vector<double> k(std::size_t(side * side));
  double sum = 0.0;
  for (long dy = -r; dy <= r; ++dy) {
    for (long dx = -r; dx <= r; ++dx) {
      const double v = std::exp(-double(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      k[std::size_t((dy + r) * side + dx + r)] = v;
      sum += v;
    }
  }
  for (auto& v : k) v /= sum;
  return k;
}

std::vector<double> disk_kernel(double radius, long& r) {
  r = long(std::floor(radius));
  const long side = 2 * r + 1;
  std::vector<double> k(std::size_t(side * side), 0.0);
  double sum = 0.0;
  for (long dy = -r; dy <= r; ++dy) {
    for (long dx = -r; dx <= r; ++dx) {
      if (double(dx * dx + dy * dy) <= radius * radius) {
        k[std::size_t((dy + r) * side + dx + r)] = 1.0;
        sum += 1.0;
      }
    }
  }
  for (auto& v : k) v /= sum;
  return k;
}

std::uint64_t name_stream(const std::string& name) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

/// One image, raw units, in place.
void apply(std::vector<double>& x, std::size_t c, std::size_t h, std::size_t w,
           const CorruptionSpec& spec, Rng& rng) {
  const std::string& name = spec.name;
  const double p = spec.params.at(0);
  if (name == "gaussian-noise") {
    for (auto& v : x) v += normal(rng, 0.0, p);
  } else if (name == "shot-noise") {
    for (auto& v : x) {
      std::poisson_distribution<long> pois(std::max(v, 0.0) / 255.0 * p);
      v = double(pois(rng)) / p * 255.0;
    }
  } else if (name == "impulse-noise") {
    for (auto& v : x) {
      if (uniform(rng, 0.0, 1.0) < p) v = uniform(rng, 0.0, 1.0) < 0.5 ? 0.0 : 255.0;
    }
  } else if (name == "speckle-noise") {
    for (auto& v : x) v += v * normal(rng, 0.0, p);
  } else if (name == "gaussian-blur") {
    long r = 0;
    const auto k = gaussian_kernel(p, r);
    filter_planes(x, c, h, w, k, r);
  } else if (name == "defocus-blur") {
    long r = 0;
    const auto k = disk_kernel(p, r);
    filter_planes(x, c, h, w, k, r);
  } else if (name == "contrast") {
    double mean = 0.0;
    for (double v : x) mean += v / double(x.size());
    for (auto& v : x) v = (v - mean) * p + mean;
  } else if (name == "brightness") {
    for (auto& v : x) v += p;
  } else if (name == "saturate") {
    if (c != 3) {
      return;  // luminance blend is defined for RGB only; grey images are left as is
    }
    const std::size_t hw = h * w;
    for (std::size_t i = 0; i < hw; ++i) {
      const double grey = 0.299 * x[i] + 0.587 * x[hw + i] + 0.114 * x[2 * hw + i];
      for (std::size_t ch = 0; ch < 3; ++ch) x[ch * hw + i] = grey + p * (x[ch * hw + i] - grey);
    }
  } else if (name == "pixelate") {
    const std::size_t b = std::size_t(std::max(1.0, std::round(p)));
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t y0 = 0; y0 < h; y0 += b) {
        for (std::size_t x0 = 0; x0 < w; x0 += b) {
          const std::size_t y1 = std::min(h, y0 + b), x1 = std::min(w, x0 + b);
          double s = 0.0;
          for (std::size_t y = y0; y < y1; ++y) {
            for (std::size_t xx = x0; xx < x1; ++xx) s += x[(ch * h + y) * w + xx];
          }
          s /= double((y1 - y0) * (x1 - x0));
          for (std::size_t y = y0; y < y1; ++y) {
            for (std::size_t xx = x0; xx < x1; ++xx) x[(ch * h + y) * w + xx] = s;
          }
        }
      }
    }
  } else {
    throw ConfigError("unknown corruption '" + name + "'");
  }
}

}  // namespace

template <typename T>
ImageBatch<T> corrupt(const ImageBatch<T>& batch, const CorruptionSpec& spec, std::uint64_t seed) {
  if (std::find(corruption_names().begin(), corruption_names().end(), spec.name) == corruption_names().end()) {
    throw ConfigError("unknown corruption '" + spec.name + "'");
  }
  if (spec.params.empty()) throw ConfigError("corruption '" + spec.name + "' has no parameter");
  const Shape s = batch.pixels.shape();
  const std::size_t per = s.per_sample();
  Rng rng = make_rng(seed, name_stream(spec.name));
  ImageBatch<T> out = batch;
  std::vector<double> x(per);
  for (std::size_t i = 0; i < s.n; ++i) {
    for (std::size_t j = 0; j < per; ++j) x[j] = denormalize_pixel(double(batch.pixels[i * per + j]));
    apply(x, s.c, s.h, s.w, spec, rng);
    for (std::size_t j = 0; j < per; ++j) {
      out.pixels[i * per + j] = T(std::clamp(normalize_pixel(x[j]), -1.0, 1.0));
    }
  }
  return out;
}

template ImageBatch<float> corrupt(const ImageBatch<float>&, const CorruptionSpec&, std::uint64_t);
template ImageBatch<double> corrupt(const ImageBatch<double>&, const CorruptionSpec&, std::uint64_t);

}  // namespace satlab
