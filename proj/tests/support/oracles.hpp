#pragma once

// Independent reference implementations used as test oracles. Everything here is written
// as plain loops in double precision and shares no code with the library's math.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "satlab/architectures.hpp"
#include "satlab/model.hpp"
#include "satlab/rng.hpp"
#include "satlab/tensor.hpp"

namespace oracle {

using satlab::Shape;
using satlab::Tensor;

/// Central finite differences of f at x, one coordinate at a time.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor).
inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b,
                            double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double den = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / den);
  }
  return worst;
}

inline std::vector<double> to_vec(const Tensor<double>& t) { return t.storage(); }

inline Tensor<double> random_tensor(Shape s, satlab::Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(s);
  for (auto& v : t.storage()) v = satlab::uniform(rng, lo, hi);
  return t;
}

// ---- straight-line layer references (single sample, CHW) ----

inline std::vector<double> conv(const std::vector<double>& x, int c, int h, int w,
                                const Tensor<double>& weight, const Tensor<double>& bias,
                                int stride, int pad, int& oh, int& ow) {
  const int o = int(weight.shape().n), k = int(weight.shape().h);
  oh = (h + 2 * pad - k) / stride + 1;
  ow = (w + 2 * pad - k) / stride + 1;
  std::vector<double> y(std::size_t(o) * oh * ow);
  for (int oc = 0; oc < o; ++oc) {
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        double s = bias[oc];
        for (int ic = 0; ic < c; ++ic) {
          for (int a = 0; a < k; ++a) {
            for (int b = 0; b < k; ++b) {
              const int yy = i * stride - pad + a, xx = j * stride - pad + b;
              if (yy < 0 || xx < 0 || yy >= h || xx >= w) continue;
              s += weight.at(oc, ic, a, b) * x[(std::size_t(ic) * h + yy) * w + xx];
            }
          }
        }
        y[(std::size_t(oc) * oh + i) * ow + j] = s;
      }
    }
  }
  return y;
}

inline void relu(std::vector<double>& x) {
  for (auto& v : x) v = std::max(v, 0.0);
}

inline std::vector<double> maxpool(const std::vector<double>& x, int c, int h, int w, int k) {
  const int oh = h / k, ow = w / k;
  std::vector<double> y(std::size_t(c) * oh * ow, -INFINITY);
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < oh * k; ++i) {
      for (int j = 0; j < ow * k; ++j) {
        double& dst = y[(std::size_t(ch) * oh + i / k) * ow + j / k];
        dst = std::max(dst, x[(std::size_t(ch) * h + i) * w + j]);
      }
    }
  }
  return y;
}

inline std::vector<double> dense(const std::vector<double>& x, const Tensor<double>& weight,
                                 const Tensor<double>& bias) {
  const std::size_t o = weight.shape().n, in = weight.shape().c;
  std::vector<double> y(o);
  for (std::size_t r = 0; r < o; ++r) {
    double s = bias[r];
    for (std::size_t q = 0; q < in; ++q) s += weight[r * in + q] * x[q];
    y[r] = s;
  }
  return y;
}

/// Logits of the tiny-cnn architecture for one sample, recomputed layer by layer.
inline std::vector<double> tiny_cnn_logits(const satlab::Model<double>& m, const Tensor<double>& x,
                                           std::size_t sample) {
  const auto p = m.params();
  const auto& s = m.spec();
  std::vector<double> v(x.sample(sample).begin(), x.sample(sample).end());
  int h = s.height, w = s.width, oh = 0, ow = 0;
  const int c1 = int(p[0]->shape().n), c2 = int(p[2]->shape().n);
  v = conv(v, s.channels, h, w, *p[0], *p[1], 1, 1, oh, ow);
  relu(v);
  v = maxpool(v, c1, oh, ow, 2);
  h = oh / 2;
  w = ow / 2;
  v = conv(v, c1, h, w, *p[2], *p[3], 1, 1, oh, ow);
  relu(v);
  v = maxpool(v, c2, oh, ow, 2);
  v = dense(v, *p[4], *p[5]);
  relu(v);
  return dense(v, *p[6], *p[7]);
}

/// ln sum exp, then CE against one label, in double.
inline double cross_entropy(const std::vector<double>& z, int y) {
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  return -(z[std::size_t(y)] - mx - std::log(s));
}

/// Explicit Gram: G_ij = sum_k f_ik f_jk / (c h w).
inline std::vector<double> gram(const std::vector<double>& f, std::size_t c, std::size_t hw) {
  std::vector<double> g(c * c, 0.0);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      for (std::size_t k = 0; k < hw; ++k) g[i * c + j] += f[i * hw + k] * f[j * hw + k];
      g[i * c + j] /= double(c * hw);
    }
  }
  return g;
}

/// p-norm of a - b.
inline double pnorm(const std::vector<double>& a, const std::vector<double>& b, double p) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::pow(std::abs(a[i] - b[i]), p);
  return std::pow(s, 1.0 / p);
}

/// Unbiased covariance of rows (samples) of an n x d matrix, mean-centered.
inline std::vector<double> covariance(const std::vector<double>& x, std::size_t n, std::size_t d) {
  std::vector<double> mean(d, 0.0), cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += x[i * d + j] / double(n);
  }
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (x[i * d + a] - mean[a]) * (x[i * d + b] - mean[b]);
      cov[a * d + b] = s / double(n - 1);
    }
  }
  return cov;
}

/// A linear model over `d` inputs (d x 1 x 1 images) with explicit weights, row-major k x d.
inline satlab::Model<double> linear_model(std::size_t d, std::size_t k, const std::vector<double>& w,
                                          const std::vector<double>& b) {
  auto m = satlab::build_model<double>({"linear", int(d), 1, 1, int(k), {}}, 0);
  m.params()[0]->storage() = w;
  m.params()[1]->storage() = b;
  return m;
}

/// Corners of the l-inf ball around x intersected with [-1, 1]^d, in sign-pattern order.
inline std::vector<std::vector<double>> clipped_corners(const std::vector<double>& x, double eps) {
  const std::size_t d = x.size();
  std::vector<std::vector<double>> out;
  for (std::size_t mask = 0; mask < (std::size_t(1) << d); ++mask) {
    std::vector<double> c(d);
    for (std::size_t i = 0; i < d; ++i) {
      c[i] = std::clamp(x[i] + ((mask >> i) & 1 ? eps : -eps), -1.0, 1.0);
    }
    out.push_back(c);
  }
  return out;
}

inline std::vector<double> affine(const std::vector<double>& w, const std::vector<double>& b,
                                  const std::vector<double>& x) {
  const std::size_t d = x.size(), k = b.size();
  std::vector<double> z(k);
  for (std::size_t r = 0; r < k; ++r) {
    z[r] = b[r];
    for (std::size_t q = 0; q < d; ++q) z[r] += w[r * d + q] * x[q];
  }
  return z;
}

}  // namespace oracle
