#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "satlab/errors.hpp"
#include "satlab/layers.hpp"
#include "satlab/tensor.hpp"

namespace satlab {

/// Architecture name plus the sizes needed to rebuild it.
struct ArchSpec {
  std::string name = "tiny-cnn";
  int channels = 3;
  int height = 32;
  int width = 32;
  int num_classes = 10;
  std::vector<int> widths;

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

/// A named feature tap: the output of layer `after_layer`.
struct TapPoint {
  std::string id;
  std::size_t after_layer = 0;

  friend bool operator==(const TapPoint&, const TapPoint&) = default;
};

enum class Mode { train, eval };

/// Activations at every declared tap, in tap_spec order, plus logits {n, classes, 1, 1}.
/// The same layout doubles as a gradient container; an empty tensor means "zero".
template <typename T>
struct FeatureTaps {
  std::vector<std::string> ids;
  std::vector<Tensor<T>> taps;
  Tensor<T> logits;

  std::size_t batch() const { return logits.shape().n; }

  std::size_t index_of(std::string_view id) const {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] == id) return i;
    }
    throw ConfigError("unknown feature tap '" + std::string(id) + "'");
  }

  const Tensor<T>& tap(std::string_view id) const { return taps[index_of(id)]; }

  /// Gradient container with the same ids and all-empty (zero) slots.
  FeatureTaps empty_grads() const {
    FeatureTaps g;
    g.ids = ids;
    g.taps.resize(taps.size());
    return g;
  }
};

template <typename T>
using TapGrads = FeatureTaps<T>;

template <typename T>
struct ForwardPass {
  FeatureTaps<T> taps;
  std::vector<LayerCache<T>> caches;
};

/// A differentiable classifier: a layer chain with declared feature taps.
///
/// Invariants: tap_spec is non-empty and strictly ordered along the chain; logits are
/// the output of the final layer and are not a declared tap.
template <typename T>
class Model {
 public:
  Model(ArchSpec spec, std::vector<std::unique_ptr<Layer<T>>> layers, std::vector<TapPoint> taps,
        std::uint64_t seed = 0)
      : spec_(std::move(spec)), layers_(std::move(layers)), taps_(std::move(taps)), seed_(seed) {
    if (layers_.empty()) throw ConfigError("model has no layers");
    if (taps_.empty()) throw ConfigError("model tap_spec is empty");
    for (std::size_t i = 0; i < taps_.size(); ++i) {
      if (taps_[i].after_layer + 1 >= layers_.size()) {
        throw ConfigError("tap '" + taps_[i].id + "' must precede the logits layer");
      }
      if (i > 0 && taps_[i].after_layer <= taps_[i - 1].after_layer) {
        throw ConfigError("tap_spec must be strictly ordered along the layer chain");
      }
    }
    if (spec_.num_classes < 1) throw ConfigError("num_classes must be positive");
    const Shape out = output_shape(Shape{1, std::size_t(spec_.channels), std::size_t(spec_.height),
                                         std::size_t(spec_.width)});
    if (out.per_sample() != std::size_t(spec_.num_classes)) {
      throw ConfigError("final layer emits " + std::to_string(out.per_sample()) +
                        " values, expected num_classes = " + std::to_string(spec_.num_classes));
    }
  }

  Model(const Model& other)
      : spec_(other.spec_), taps_(other.taps_), seed_(other.seed_), mode_(other.mode_) {
    layers_.reserve(other.layers_.size());
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
  }

  Model& operator=(const Model& other) {
    if (this != &other) *this = Model(other);
    return *this;
  }

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ArchSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  int num_classes() const { return spec_.num_classes; }
  Mode mode() const { return mode_; }
  void set_mode(Mode m) { mode_ = m; }

  Shape input_shape(std::size_t batch = 1) const {
    return {batch, std::size_t(spec_.channels), std::size_t(spec_.height),
            std::size_t(spec_.width)};
  }

  std::vector<std::string> tap_spec() const {
    std::vector<std::string> ids;
    for (const auto& t : taps_) ids.push_back(t.id);
    return ids;
  }
  const std::vector<TapPoint>& tap_points() const { return taps_; }
  const std::string& penultimate_tap() const { return taps_.back().id; }

  std::vector<LayerDescriptor> layer_descriptors() const {
    std::vector<LayerDescriptor> d;
    for (const auto& l : layers_) d.push_back(l->descriptor());
    return d;
  }

  FeatureTaps<T> forward(const ImageBatch<T>& batch) const {
    check_input(batch.pixels.shape());
    batch.validate(spec_.num_classes);
    return run(batch.pixels, nullptr);
  }

  FeatureTaps<T> forward(const Tensor<T>& pixels) const {
    check_input(pixels.shape());
    return run(pixels, nullptr);
  }

  /// Forward pass that keeps the per-layer state needed by backward().
  ForwardPass<T> forward_pass(const Tensor<T>& pixels) const {
    check_input(pixels.shape());
    ForwardPass<T> pass;
    pass.caches.resize(layers_.size());
    pass.taps = run(pixels, &pass.caches);
    return pass;
  }

  /// Backpropagates gradients injected at taps and logits. Returns d/d(pixels); when
  /// `param_grads` is given (see zero_grads()) parameter gradients are accumulated into it.
  Tensor<T> backward(const ForwardPass<T>& pass, const TapGrads<T>& grads,
                     std::vector<Tensor<T>>* param_grads = nullptr) const {
    if (grads.taps.size() != taps_.size() && !grads.taps.empty()) {
      throw ShapeError("tap gradient count does not match tap_spec");
    }
    Tensor<T> g = grads.logits.empty() ? Tensor<T>(pass.taps.logits.shape()) : grads.logits;
    std::vector<std::size_t> offsets = param_offsets();
    std::size_t next_tap = taps_.size();
    for (std::size_t i = layers_.size(); i-- > 0;) {
      while (next_tap > 0 && taps_[next_tap - 1].after_layer == i) {
        --next_tap;
        if (!grads.taps.empty() && !grads.taps[next_tap].empty()) g += grads.taps[next_tap];
      }
      Tensor<T>* slot = param_grads ? param_grads->data() + offsets[i] : nullptr;
      if (slot && layers_[i]->num_params() == 0) slot = nullptr;
      g = layers_[i]->backward(g, pass.caches[i], slot);
    }
    return g;
  }

  std::vector<std::string> param_names() const {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto kind = layers_[i]->descriptor().kind;
      for (const auto& n : layers_[i]->param_names()) {
        names.push_back(std::to_string(i) + "." + kind + "." + n);
      }
    }
    return names;
  }

  std::vector<Tensor<T>*> params() {
    std::vector<Tensor<T>*> p;
    for (auto& l : layers_) {
      for (auto* t : l->params()) p.push_back(t);
    }
    return p;
  }

  std::vector<const Tensor<T>*> params() const {
    std::vector<const Tensor<T>*> p;
    for (auto* t : const_cast<Model*>(this)->params()) p.push_back(t);
    return p;
  }

  std::vector<Tensor<T>> zero_grads() const {
    std::vector<Tensor<T>> g;
    for (const auto* t : params()) g.emplace_back(t->shape());
    return g;
  }

  bool parameters_finite() const {
    for (const auto* t : params()) {
      if (!t->all_finite()) return false;
    }
    return true;
  }

  /// Re-initializes every parameter from `seed` (He fan-in normal, zero biases).
  void initialize(std::uint64_t seed) {
    seed_ = seed;
    Rng rng = make_rng(seed, 0x1417);
    for (auto& l : layers_) l->initialize(rng);
  }

  /// Same architecture and taps in another scalar type.
  template <typename U>
  Model<U> cast() const {
    std::vector<std::unique_ptr<Layer<U>>> layers;
    for (const auto& l : layers_) layers.push_back(make_layer<U>(l->descriptor()));
    Model<U> out(spec_, std::move(layers), taps_, seed_);
    out.set_mode(mode_);
    auto dst = out.params();
    auto src = params();
    for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] = src[i]->template cast<U>();
    return out;
  }

  /// Argmax class per sample; ties resolve to the lowest index.
  std::vector<int> predict(const Tensor<T>& pixels) const {
    return argmax_rows(forward(pixels).logits);
  }

  static std::vector<int> argmax_rows(const Tensor<T>& logits) {
    const std::size_t n = logits.shape().n;
    const std::size_t k = logits.shape().per_sample();
    std::vector<int> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < k; ++j) {
        if (logits[i * k + j] > logits[i * k + best]) best = j;
      }
      out[i] = int(best);
    }
    return out;
  }

 private:
  Shape output_shape(Shape s) const {
    for (const auto& l : layers_) s = l->output_shape(s);
    return s;
  }

  void check_input(const Shape& s) const {
    if (s.c != std::size_t(spec_.channels) || s.h != std::size_t(spec_.height) ||
        s.w != std::size_t(spec_.width) || s.n == 0) {
      throw ShapeError("input-shape error: model expects (Nx" + std::to_string(spec_.channels) +
                       "x" + std::to_string(spec_.height) + "x" + std::to_string(spec_.width) +
                       "), got " + to_string(s));
    }
  }

  std::vector<std::size_t> param_offsets() const {
    std::vector<std::size_t> off(layers_.size());
    std::size_t acc = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      off[i] = acc;
      acc += layers_[i]->num_params();
    }
    return off;
  }

  FeatureTaps<T> run(const Tensor<T>& pixels, std::vector<LayerCache<T>>* caches) const {
    FeatureTaps<T> out;
    out.ids = tap_spec();
    out.taps.reserve(taps_.size());
    Tensor<T> x = pixels;
    std::size_t next_tap = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      x = layers_[i]->forward(x, caches ? &(*caches)[i] : nullptr);
      if (next_tap < taps_.size() && taps_[next_tap].after_layer == i) {
        out.taps.push_back(x);
        ++next_tap;
      }
    }
    out.logits = x.reshaped(Shape{x.shape().n, x.shape().per_sample(), 1, 1});
    return out;
  }

  ArchSpec spec_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<TapPoint> taps_;
  std::uint64_t seed_ = 0;
  Mode mode_ = Mode::eval;
};

/// Value and tap/logit gradients of a scalar loss evaluated on FeatureTaps.
template <typename T>
struct LossEval {
  T value = T(0);
  std::vector<T> per_sample;
  TapGrads<T> grads;
};

template <typename T>
using LossFn = std::function<LossEval<T>(const FeatureTaps<T>&)>;

template <typename T>
struct InputGradient {
  Tensor<T> gradient;
  T loss = T(0);
};

/// d loss / d pixels. Throws NumericError naming the first offending sample when the loss
/// is non-finite.
template <typename T>
InputGradient<T> grad_input(const Model<T>& model, const LossFn<T>& loss, const Tensor<T>& pixels) {
  ForwardPass<T> pass = model.forward_pass(pixels);
  LossEval<T> ev = loss(pass.taps);
  if (!std::isfinite(double(ev.value))) {
    long bad = 0;
    for (std::size_t i = 0; i < ev.per_sample.size(); ++i) {
      if (!std::isfinite(double(ev.per_sample[i]))) {
        bad = long(i);
        break;
      }
    }
    if (ev.per_sample.empty()) {
      const std::size_t k = pass.taps.logits.shape().per_sample();
      for (std::size_t i = 0; i < pass.taps.batch(); ++i) {
        bool ok = true;
        for (std::size_t j = 0; j < k; ++j) ok = ok && std::isfinite(double(pass.taps.logits[i * k + j]));
        if (!ok) {
          bad = long(i);
          break;
        }
      }
    }
    throw NumericError("non-finite loss in grad_input", bad);
  }
  return {model.backward(pass, ev.grads), ev.value};
}

}  // namespace satlab
