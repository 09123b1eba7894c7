#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "satlab/model.hpp"

namespace satlab {

/// Reference architectures.
///
///   linear      flatten -> dense(d, classes). Taps: "features" (the flattened input, d x 1 x 1).
///
///   tiny-cnn    widths = {c1, c2, hidden}, default {8, 16, 32}. For a C x H x W input:
///                 conv3x3(C->c1) relu           tap "stage1"       c1 x H x W
///                 maxpool2 conv3x3(c1->c2) relu  tap "stage2"       c2 x H/2 x W/2
///                 maxpool2 flatten dense relu    tap "penultimate"  hidden x 1 x 1
///                 dense(hidden -> classes)
///               H and W must be divisible by 4.
///
///   resnet-mini widths = {w}, default {8}:
///                 conv3x3(C->w) relu
///                 residual(w, w, 1)              tap "stage1"       w  x H   x W
///                 residual(w, 2w, 2)             tap "stage2"       2w x H/2 x W/2
///                 residual(2w, 4w, 2)            tap "stage3"       4w x H/4 x W/4
///                 global avgpool                 tap "penultimate"  4w x 1 x 1
///                 dense(4w -> classes)
///
/// Parameters use He fan-in normal initialization with zero biases, drawn from `seed`.
template <typename T>
Model<T> build_model(ArchSpec spec, std::uint64_t seed) {
  if (spec.channels < 1 || spec.height < 1 || spec.width < 1) {
    throw ConfigError("architecture input dimensions must be positive");
  }
  if (spec.num_classes < 2) throw ConfigError("architectures need at least 2 classes");
  std::vector<std::unique_ptr<Layer<T>>> layers;
  std::vector<TapPoint> taps;
  const int d = spec.channels * spec.height * spec.width;

  if (spec.name == "linear") {
    spec.widths.clear();
    layers.push_back(std::make_unique<Flatten<T>>());
    layers.push_back(std::make_unique<Dense<T>>(d, spec.num_classes));
    taps = {{"features", 0}};
  } else if (spec.name == "tiny-cnn") {
    if (spec.widths.empty()) spec.widths = {8, 16, 32};
    if (spec.widths.size() != 3) throw ConfigError("tiny-cnn expects widths {c1, c2, hidden}");
    if (spec.height % 4 != 0 || spec.width % 4 != 0) {
      throw ConfigError("tiny-cnn needs height and width divisible by 4");
    }
    const int c1 = spec.widths[0], c2 = spec.widths[1], hidden = spec.widths[2];
    layers.push_back(std::make_unique<Conv2d<T>>(spec.channels, c1, 3, 1, 1));
    layers.push_back(std::make_unique<Relu<T>>());
    layers.push_back(std::make_unique<MaxPool2d<T>>(2));
    layers.push_back(std::make_unique<Conv2d<T>>(c1, c2, 3, 1, 1));
    layers.push_back(std::make_unique<Relu<T>>());
    layers.push_back(std::make_unique<MaxPool2d<T>>(2));
    layers.push_back(std::make_unique<Flatten<T>>());
    layers.push_back(std::make_unique<Dense<T>>(c2 * (spec.height / 4) * (spec.width / 4), hidden));
    layers.push_back(std::make_unique<Relu<T>>());
    layers.push_back(std::make_unique<Dense<T>>(hidden, spec.num_classes));
    taps = {{"stage1", 1}, {"stage2", 4}, {"penultimate", 8}};
  } else if (spec.name == "resnet-mini") {
    if (spec.widths.empty()) spec.widths = {8};
    if (spec.widths.size() != 1) throw ConfigError("resnet-mini expects widths {w}");
    const int w = spec.widths[0];
    layers.push_back(std::make_unique<Conv2d<T>>(spec.channels, w, 3, 1, 1));
    layers.push_back(std::make_unique<Relu<T>>());
    layers.push_back(std::make_unique<Residual<T>>(w, w, 1));
    layers.push_back(std::make_unique<Residual<T>>(w, 2 * w, 2));
    layers.push_back(std::make_unique<Residual<T>>(2 * w, 4 * w, 2));
    layers.push_back(std::make_unique<GlobalAvgPool<T>>());
    layers.push_back(std::make_unique<Dense<T>>(4 * w, spec.num_classes));
    taps = {{"stage1", 2}, {"stage2", 3}, {"stage3", 4}, {"penultimate", 5}};
  } else {
    throw ConfigError("unknown architecture '" + spec.name + "'");
  }

  Model<T> model(spec, std::move(layers), std::move(taps), seed);
  model.initialize(seed);
  return model;
}

}  // namespace satlab
