#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "satlab/errors.hpp"
#include "satlab/rng.hpp"
#include "satlab/tensor.hpp"

namespace satlab {

/// Serializable description of a layer: kind plus integer hyperparameters.
struct LayerDescriptor {
  std::string kind;
  std::vector<int> args;

  friend bool operator==(const LayerDescriptor&, const LayerDescriptor&) = default;
};

/// Per-call state a layer needs to run its backward pass.
template <typename T>
struct LayerCache {
  Shape input_shape;
  Tensor<T> input;
  Tensor<T> output;
  std::vector<std::uint32_t> index;
  std::vector<LayerCache<T>> children;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerDescriptor descriptor() const = 0;
  virtual Shape output_shape(const Shape& in) const = 0;

  /// `cache` may be null when no backward pass will follow.
  virtual Tensor<T> forward(const Tensor<T>& in, LayerCache<T>* cache) const = 0;

  /// Returns the input gradient. When `param_grads` is non-null it points at this layer's
  /// gradient slots (same order as params()) and they are accumulated into.
  virtual Tensor<T> backward(const Tensor<T>& grad_out, const LayerCache<T>& cache,
                             Tensor<T>* param_grads) const = 0;

  virtual std::vector<std::string> param_names() const { return {}; }
  virtual std::vector<Tensor<T>*> params() { return {}; }
  virtual void initialize(Rng&) {}
  virtual std::unique_ptr<Layer> clone() const = 0;

  std::size_t num_params() const { return param_names().size(); }
};

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MutMap = Eigen::Map<RowMat<T>>;

inline void he_normal(std::vector<double>& out, std::size_t fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / double(fan_in));
  for (auto& v : out) v = normal(rng, 0.0, stddev);
}

template <typename T>
void assign(Tensor<T>& dst, const std::vector<double>& src) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<T>(src[i]);
}

}  // namespace detail

/// 2-D convolution, square kernel, zero padding.
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride = 1, int pad = -1)
      : in_(in_channels), out_(out_channels), k_(kernel), stride_(stride),
        pad_(pad < 0 ? kernel / 2 : pad),
        weight_(Shape{std::size_t(out_channels), std::size_t(in_channels), std::size_t(kernel),
                      std::size_t(kernel)}),
        bias_(Shape{std::size_t(out_channels), 1, 1, 1}) {
    if (in_ < 1 || out_ < 1 || k_ < 1 || stride_ < 1) throw ConfigError("invalid conv2d geometry");
  }

  LayerDescriptor descriptor() const override { return {"conv2d", {in_, out_, k_, stride_, pad_}}; }

  Shape output_shape(const Shape& in) const override {
    if (in.c != std::size_t(in_)) {
      throw ShapeError("conv2d expects " + std::to_string(in_) + " channels, got " + to_string(in));
    }
    const long oh = (long(in.h) + 2 * pad_ - k_) / stride_ + 1;
    const long ow = (long(in.w) + 2 * pad_ - k_) / stride_ + 1;
    if (oh < 1 || ow < 1) throw ShapeError("conv2d input too small: " + to_string(in));
    return {in.n, std::size_t(out_), std::size_t(oh), std::size_t(ow)};
  }

  Tensor<T> forward(const Tensor<T>& in, LayerCache<T>* cache) const override {
    const Shape os = output_shape(in.shape());
    Tensor<T> out(os);
    const std::size_t rows = std::size_t(in_) * k_ * k_;
    const std::size_t cols = os.spatial();
    std::vector<T> buffer(rows * cols);
    detail::ConstMap<T> w(weight_.data(), out_, rows);
    for (std::size_t n = 0; n < os.n; ++n) {
      im2col(in, n, os, buffer.data());
      detail::ConstMap<T> col(buffer.data(), rows, cols);
      detail::MutMap<T> y(out.data() + n * os.per_sample(), out_, cols);
      y.noalias() = w * col;
      for (int o = 0; o < out_; ++o) y.row(o).array() += bias_[o];
    }
    if (cache) {
      cache->input_shape = in.shape();
      cache->input = in;
    }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out, const LayerCache<T>& cache,
                     Tensor<T>* param_grads) const override {
    const Shape is = cache.input_shape;
    const Shape os = grad_out.shape();
    const std::size_t rows = std::size_t(in_) * k_ * k_;
    const std::size_t cols = os.spatial();
    Tensor<T> grad_in(is);
    std::vector<T> buffer(rows * cols);
    std::vector<T> dcol(rows * cols);
    detail::ConstMap<T> w(weight_.data(), out_, rows);
    for (std::size_t n = 0; n < os.n; ++n) {
      detail::ConstMap<T> g(grad_out.data() + n * os.per_sample(), out_, cols);
      if (param_grads) {
        im2col(cache.input, n, os, buffer.data());
        detail::ConstMap<T> col(buffer.data(), rows, cols);
        detail::MutMap<T> dw(param_grads[0].data(), out_, rows);
        dw.noalias() += g * col.transpose();
        for (int o = 0; o < out_; ++o) param_grads[1][o] += g.row(o).sum();
      }
      detail::MutMap<T> dc(dcol.data(), rows, cols);
      dc.noalias() = w.transpose() * g;
      col2im(dcol.data(), n, os, grad_in);
    }
    return grad_in;
  }

  std::vector<std::string> param_names() const override { return {"weight", "bias"}; }
  std::vector<Tensor<T>*> params() override { return {&weight_, &bias_}; }

  void initialize(Rng& rng) override {
    std::vector<double> w(weight_.size());
    detail::he_normal(w, std::size_t(in_) * k_ * k_, rng);
    detail::assign(weight_, w);
    bias_.fill(T(0));
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }

 private:
  void im2col(const Tensor<T>& in, std::size_t n, const Shape& os, T* dst) const {
    const Shape& is = in.shape();
    const T* src = in.data() + n * is.per_sample();
    std::size_t r = 0;
    for (int c = 0; c < in_; ++c) {
      for (int ki = 0; ki < k_; ++ki) {
        for (int kj = 0; kj < k_; ++kj, ++r) {
          T* row = dst + r * os.spatial();
          for (std::size_t oy = 0; oy < os.h; ++oy) {
            const long iy = long(oy) * stride_ - pad_ + ki;
            for (std::size_t ox = 0; ox < os.w; ++ox) {
              const long ix = long(ox) * stride_ - pad_ + kj;
              row[oy * os.w + ox] = (iy < 0 || ix < 0 || iy >= long(is.h) || ix >= long(is.w))
                                        ? T(0)
                                        : src[(std::size_t(c) * is.h + iy) * is.w + ix];
            }
          }
        }
      }
    }
  }

  void col2im(const T* col, std::size_t n, const Shape& os, Tensor<T>& grad_in) const {
    const Shape& is = grad_in.shape();
    T* dst = grad_in.data() + n * is.per_sample();
    std::size_t r = 0;
    for (int c = 0; c < in_; ++c) {
      for (int ki = 0; ki < k_; ++ki) {
        for (int kj = 0; kj < k_; ++kj, ++r) {
          const T* row = col + r * os.spatial();
          for (std::size_t oy = 0; oy < os.h; ++oy) {
            const long iy = long(oy) * stride_ - pad_ + ki;
            if (iy < 0 || iy >= long(is.h)) continue;
            for (std::size_t ox = 0; ox < os.w; ++ox) {
              const long ix = long(ox) * stride_ - pad_ + kj;
              if (ix < 0 || ix >= long(is.w)) continue;
              dst[(std::size_t(c) * is.h + iy) * is.w + ix] += row[oy * os.w + ox];
            }
          }
        }
      }
    }
  }

  int in_, out_, k_, stride_, pad_;
  Tensor<T> weight_;
  Tensor<T> bias_;
};

template <typename T>
class Relu final : public Layer<T> {
 public:
  LayerDescriptor descriptor() const override { return {"relu", {}}; }
  Shape output_shape(const Shape& in) const override { return in; }

  Tensor<T> forward(const Tensor<T>& in, LayerCache<T>* cache) const override {
    Tensor<T> out = in;
    for (auto& v : out.storage()) v = v > T(0) ? v : T(0);
    if (cache) {
      cache->input_shape = in.shape();
      cache->output = out;
    }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out, const LayerCache<T>& cache,
                     Tensor<T>*) const override {
    Tensor<T> g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!(cache.output[i] > T(0))) g[i] = T(0);
    }
    return g;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Relu>(*this); }
};

/// Non-overlapping max pooling (window = stride = k); trailing rows/cols are dropped.
template <typename T>
class MaxPool2d final : public Layer<T> {
 public:
  explicit MaxPool2d(int k = 2) : k_(k) {
    if (k_ < 1) throw ConfigError("invalid maxpool size");
  }

  LayerDescriptor descriptor() const override { return {"maxpool", {k_}}; }

  Shape output_shape(const Shape& in) const override {
    if (in.h < std::size_t(k_) || in.w < std::size_t(k_)) {
      throw ShapeError("maxpool input too small: " + to_string(in));
    }
    return {in.n, in.c, in.h / k_, in.w / k_};
  }

  Tensor<T> forward(const Tensor<T>& in, LayerCache<T>* cache) const override {
    const Shape is = in.shape();
    const Shape os = output_shape(is);
    Tensor<T> out(os);
    std::vector<std::uint32_t> index(os.size());
    std::size_t o = 0;
    for (std::size_t n = 0; n < os.n; ++n) {
      for (std::size_t c = 0; c < os.c; ++c) {
        const std::size_t plane = (n * is.c + c) * is.h * is.w;
        for (std::size_t y = 0; y < os.h; ++y) {
          for (std::size_t x = 0; x < os.w; ++x, ++o) {
            std::size_t best = plane + (y * k_) * is.w + x * k_;
            for (int dy = 0; dy < k_; ++dy) {
              for (int dx = 0; dx < k_; ++dx) {
                const std::size_t idx = plane + (y * k_ + dy) * is.w + x * k_ + dx;
                if (in[idx] > in[best]) best = idx;
              }
            }
            out[o] = in[best];
            index[o] = static_cast<std::uint32_t>(best);
          }
        }
      }
    }
    if (cache) {
      cache->input_shape = is;
      cache->index = std::move(index);
    }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out, const LayerCache<T>& cache,
                     Tensor<T>*) const override {
    Tensor<T> g(cache.input_shape);
    for (std::size_t i = 0; i < grad_out.size(); ++i) g[cache.index[i]] += grad_out[i];
    return g;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool2d>(*this); }

 private:
  int k_;
};

template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  LayerDescriptor descriptor() const override { return {"global_avgpool", {}}; }
  Shape output_shape(const Shape& in) const override { return {in.n, in.c, 1, 1}; }

  Tensor<T> forward(const Tensor<T>& in, LayerCache<T>* cache) const override {
    const Shape is = in.shape();
    Tensor<T> out(output_shape(is));
    const std::size_t hw = is.spatial();
    for (std::size_t p = 0; p < is.n * is.c; ++p) {
      T s = T(0);
      for (std::size_t i = 0; i < hw; ++i) s += in[p * hw + i];
      out[p] = s / T(hw);
    }
    if (cache) cache->input_shape = is;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out, const LayerCache<T>& cache,
                     Tensor<T>*) const override {
    const Shape is = cache.input_shape;
    Tensor<T> g(is);
    const std::size_t hw = is.spatial();
    for (std::size_t p = 0; p < is.n * is.c; ++p) {
      const T v = grad_out[p] / T(hw);
      for (std::size_t i = 0; i < hw; ++i) g[p * hw + i] = v;
    }
    return g;
  }

  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<GlobalAvgPool>(*this);
  }
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  LayerDescriptor descriptor() const override { return {"flatten", {}}; }
  Shape output_shape(const Shape& in) const override { return {in.n, in.per_sample(), 1, 1}; }

  Tensor<T> forward(const Tensor<T>& in, LayerCache<T>* cache) const override {
    if (cache) cache->input_shape = in.shape();
    return in.reshaped(output_shape(in.shape()));
  }

  Tensor<T> backward(const Tensor<T>& grad_out, const LayerCache<T>& cache,
                     Tensor<T>*) const override {
    return grad_out.reshaped(cache.input_shape);
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten>(*this); }
};

/// Fully connected layer on flattened samples; output is {n, out, 1, 1}.
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(int in_features, int out_features)
      : in_(in_features), out_(out_features),
        weight_(Shape{std::size_t(out_features), std::size_t(in_features), 1, 1}),
        bias_(Shape{std::size_t(out_features), 1, 1, 1}) {
    if (in_ < 1 || out_ < 1) throw ConfigError("invalid dense geometry");
  }

  LayerDescriptor descriptor() const override { return {"dense", {in_, out_}}; }

  Shape output_shape(const Shape& in) const override {
    if (in.per_sample() != std::size_t(in_)) {
      throw ShapeError("dense expects " + std::to_string(in_) + " features per sample, got " +
                       to_string(in));
    }
    return {in.n, std::size_t(out_), 1, 1};
  }

  Tensor<T> forward(const Tensor<T>& in, LayerCache<T>* cache) const override {
    const Shape os = output_shape(in.shape());
    Tensor<T> out(os);
    detail::ConstMap<T> x(in.data(), in.shape().n, in_);
    detail::ConstMap<T> w(weight_.data(), out_, in_);
    detail::MutMap<T> y(out.data(), os.n, out_);
    y.noalias() = x * w.transpose();
    for (std::size_t n = 0; n < os.n; ++n) {
      for (int o = 0; o < out_; ++o) y(n, o) += bias_[o];
    }
    if (cache) {
      cache->input_shape = in.shape();
      cache->input = in;
    }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out, const LayerCache<T>& cache,
                     Tensor<T>* param_grads) const override {
    const std::size_t n = grad_out.shape().n;
    Tensor<T> grad_in(cache.input_shape);
    detail::ConstMap<T> g(grad_out.data(), n, out_);
    detail::ConstMap<T> w(weight_.data(), out_, in_);
    detail::MutMap<T> dx(grad_in.data(), n, in_);
    dx.noalias() = g * w;
    if (param_grads) {
      detail::ConstMap<T> x(cache.input.data(), n, in_);
      detail::MutMap<T> dw(param_grads[0].data(), out_, in_);
      dw.noalias() += g.transpose() * x;
      for (int o = 0; o < out_; ++o) param_grads[1][o] += g.col(o).sum();
    }
    return grad_in;
  }

  std::vector<std::string> param_names() const override { return {"weight", "bias"}; }
  std::vector<Tensor<T>*> params() override { return {&weight_, &bias_}; }

  void initialize(Rng& rng) override {
    std::vector<double> w(weight_.size());
    detail::he_normal(w, std::size_t(in_), rng);
    detail::assign(weight_, w);
    bias_.fill(T(0));
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }

 private:
  int in_, out_;
  Tensor<T> weight_;
  Tensor<T> bias_;
};

/// Basic residual block: relu(conv3x3(relu(conv3x3(x))) + shortcut(x)).
/// The shortcut is a strided 1x1 projection whenever the shape changes.
template <typename T>
class Residual final : public Layer<T> {
 public:
  Residual(int in_channels, int out_channels, int stride)
      : in_(in_channels), out_(out_channels), stride_(stride),
        conv1_(in_channels, out_channels, 3, stride, 1),
        conv2_(out_channels, out_channels, 3, 1, 1) {
    if (stride != 1 || in_channels != out_channels) {
      proj_ = std::make_unique<Conv2d<T>>(in_channels, out_channels, 1, stride, 0);
    }
  }

  Residual(const Residual& other)
      : in_(other.in_), out_(other.out_), stride_(other.stride_), conv1_(other.conv1_),
        conv2_(other.conv2_),
        proj_(other.proj_ ? std::make_unique<Conv2d<T>>(*other.proj_) : nullptr) {}

  LayerDescriptor descriptor() const override { return {"residual", {in_, out_, stride_}}; }

  Shape output_shape(const Shape& in) const override { return conv1_.output_shape(in); }

  Tensor<T> forward(const Tensor<T>& in, LayerCache<T>* cache) const override {
    std::vector<LayerCache<T>> kids(cache ? 4 : 0);
    LayerCache<T>* c = cache ? kids.data() : nullptr;
    Tensor<T> a = conv1_.forward(in, c ? &c[0] : nullptr);
    Tensor<T> b = relu_.forward(a, c ? &c[1] : nullptr);
    Tensor<T> out = conv2_.forward(b, c ? &c[2] : nullptr);
    if (proj_) {
      out += proj_->forward(in, c ? &c[3] : nullptr);
    } else {
      out += in;
    }
    for (auto& v : out.storage()) v = v > T(0) ? v : T(0);
    if (cache) {
      cache->input_shape = in.shape();
      cache->output = out;
      cache->children = std::move(kids);
    }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out, const LayerCache<T>& cache,
                     Tensor<T>* param_grads) const override {
    Tensor<T> g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!(cache.output[i] > T(0))) g[i] = T(0);
    }
    Tensor<T> db = conv2_.backward(g, cache.children[2], param_grads ? param_grads + 2 : nullptr);
    Tensor<T> da = relu_.backward(db, cache.children[1], nullptr);
    Tensor<T> dx = conv1_.backward(da, cache.children[0], param_grads);
    if (proj_) {
      dx += proj_->backward(g, cache.children[3], param_grads ? param_grads + 4 : nullptr);
    } else {
      dx += g;
    }
    return dx;
  }

  std::vector<std::string> param_names() const override {
    std::vector<std::string> names{"conv1.weight", "conv1.bias", "conv2.weight", "conv2.bias"};
    if (proj_) {
      names.push_back("proj.weight");
      names.push_back("proj.bias");
    }
    return names;
  }

  std::vector<Tensor<T>*> params() override {
    std::vector<Tensor<T>*> p;
    for (auto* t : conv1_.params()) p.push_back(t);
    for (auto* t : conv2_.params()) p.push_back(t);
    if (proj_) {
      for (auto* t : proj_->params()) p.push_back(t);
    }
    return p;
  }

  void initialize(Rng& rng) override {
    conv1_.initialize(rng);
    conv2_.initialize(rng);
    if (proj_) proj_->initialize(rng);
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Residual>(*this); }

 private:
  int in_, out_, stride_;
  Conv2d<T> conv1_;
  Relu<T> relu_;
  Conv2d<T> conv2_;
  std::unique_ptr<Conv2d<T>> proj_;
};

/// Rebuilds a layer from its descriptor (parameters left zero).
template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerDescriptor& d) {
  auto need = [&](std::size_t n) {
    if (d.args.size() != n) {
      throw ConfigError("layer '" + d.kind + "' expects " + std::to_string(n) + " arguments");
    }
  };
  if (d.kind == "conv2d") {
    need(5);
    return std::make_unique<Conv2d<T>>(d.args[0], d.args[1], d.args[2], d.args[3], d.args[4]);
  }
  if (d.kind == "relu") return std::make_unique<Relu<T>>();
  if (d.kind == "maxpool") {
    need(1);
    return std::make_unique<MaxPool2d<T>>(d.args[0]);
  }
  if (d.kind == "global_avgpool") return std::make_unique<GlobalAvgPool<T>>();
  if (d.kind == "flatten") return std::make_unique<Flatten<T>>();
  if (d.kind == "dense") {
    need(2);
    return std::make_unique<Dense<T>>(d.args[0], d.args[1]);
  }
  if (d.kind == "residual") {
    need(3);
    return std::make_unique<Residual<T>>(d.args[0], d.args[1], d.args[2]);
  }
  throw ConfigError("unknown layer kind '" + d.kind + "'");
}

}  // namespace satlab
