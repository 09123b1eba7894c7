#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "satlab/errors.hpp"
#include "satlab/losses.hpp"
#include "satlab/model.hpp"
#include "satlab/rng.hpp"

namespace satlab {

enum class StyleInit { content, noise };

inline StyleInit parse_style_init(const std::string& s) {
  if (s == "content") return StyleInit::content;
  if (s == "noise") return StyleInit::noise;
  throw ConfigError("unknown style init '" + s + "' (expected content or noise)");
}

/// Images are single normalized samples (1 x C x H x W) of equal shape.
struct StyleJob {
  Tensor<double> content;
  Tensor<double> style;
  StyleInit init = StyleInit::content;
  int iterations = 100;
  double style_weight = 1e3;
  double content_weight = 1.0;
  TapSelection style_taps = TapSelection::all_taps();
  TapSelection content_taps = TapSelection::penultimate();
  double step = 0.05;  // normalized units per unit gradient
  std::uint64_t seed = 0;

  void validate() const {
    if (content.shape().n != 1 || style.shape().n != 1) throw ShapeError("style job images must be single samples");
    if (!(content.shape() == style.shape())) {
      throw ShapeError("content " + to_string(content.shape()) + " and style " + to_string(style.shape()) +
                       " images differ in size");
    }
    if (iterations < 0) throw ConfigError("style iterations must be >= 0");
    if (!(style_weight >= 0.0) || !(content_weight >= 0.0)) throw ConfigError("style weights must be >= 0");
    if (!(step > 0.0)) throw ConfigError("style step must be > 0");
  }
};

template <typename T>
struct StyleResult {
  Tensor<T> image;
  std::vector<double> loss_trace;  // total loss at iterates 0..iterations
  std::vector<double> style_trace;
  std::vector<double> content_trace;
};

/// Pixel-space gradient descent on style_weight * style + content_weight * content, clipping every
/// iterate to [-1, 1].
template <typename T>
StyleResult<T> style_transfer(const Model<T>& model, const StyleJob& job) {
  job.validate();
  if (model.mode() != Mode::eval) throw PreconditionError("style transfer requires a model in eval mode");
  const Tensor<T> content = job.content.cast<T>();
  const Tensor<T> style = job.style.cast<T>();
  const FeatureTaps<T> content_taps = model.forward(content);
  const FeatureTaps<T> style_taps = model.forward(style);
  Tensor<T> x = content;
  if (job.init == StyleInit::noise) {
    Rng rng = make_rng(job.seed, 0x57e1e);
    for (auto& v : x.storage()) v = T(uniform(rng, -1.0, 1.0));
  }
  StyleResult<T> out;
  for (int k = 0;; ++k) {
    const ForwardPass<T> pass = model.forward_pass(x);
    TapGrads<T> g = pass.taps.empty_grads();
    const double s = double(style_loss(pass.taps, style_taps, job.style_taps, &g, T(job.style_weight)));
    const double c = double(content_loss(pass.taps, content_taps, job.content_taps, &g, T(job.content_weight)));
    const double total = job.style_weight * s + job.content_weight * c;
    if (!std::isfinite(total)) throw NumericError("non-finite style loss at iteration " + std::to_string(k), 0);
    out.style_trace.push_back(s);
    out.content_trace.push_back(c);
    out.loss_trace.push_back(total);
    if (k == job.iterations) break;
    const Tensor<T> grad = model.backward(pass, g);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = std::clamp(T(x[i] - T(job.step) * grad[i]), T(-1), T(1));
    }
  }
  out.image = std::move(x);
  return out;
}

}  // namespace satlab
