#pragma once

#include <cmath>

#include "satlab/architectures.hpp"
#include "satlab/style_transfer.hpp"

namespace fixture {

/// 8x8 RGB content (smooth ramps) and style (diagonal stripes) images, normalized.
inline satlab::Tensor<double> style_content_image() {
  satlab::Tensor<double> t(satlab::Shape{1, 3, 8, 8});
  for (std::size_t y = 0; y < 8; ++y) {
    for (std::size_t x = 0; x < 8; ++x) {
      t.at(0, 0, y, x) = -0.8 + 0.2 * double(x);
      t.at(0, 1, y, x) = 0.6 - 0.15 * double(y);
      t.at(0, 2, y, x) = 0.1 * std::sin(double(x + y));
    }
  }
  return t;
}

inline satlab::Tensor<double> style_style_image() {
  satlab::Tensor<double> t(satlab::Shape{1, 3, 8, 8});
  for (std::size_t y = 0; y < 8; ++y) {
    for (std::size_t x = 0; x < 8; ++x) {
      const double v = (x + y) % 4 < 2 ? 0.9 : -0.9;
      t.at(0, 0, y, x) = v;
      t.at(0, 1, y, x) = -v * 0.5;
      t.at(0, 2, y, x) = (x % 2 == 0) ? 0.7 : -0.2;
    }
  }
  return t;
}

template <typename T>
satlab::Model<T> style_model() {
  return satlab::build_model<T>({"tiny-cnn", 3, 8, 8, 4, {8, 8, 16}}, 21);
}

inline satlab::StyleJob style_job() {
  satlab::StyleJob job;
  job.content = style_content_image();
  job.style = style_style_image();
  return job;
}

}  // namespace fixture
