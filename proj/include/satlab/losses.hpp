#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "satlab/errors.hpp"
#include "satlab/model.hpp"
#include "satlab/tensor.hpp"

namespace satlab {

/// Which feature taps a loss reads.
struct TapSelection {
  enum class Kind { all, penultimate, named };
  Kind kind = Kind::all;
  std::vector<std::string> ids;

  static TapSelection all_taps() { return {Kind::all, {}}; }
  static TapSelection penultimate() { return {Kind::penultimate, {}}; }
  static TapSelection named(std::vector<std::string> ids) { return {Kind::named, std::move(ids)}; }

  template <typename T>
  std::vector<std::size_t> resolve(const FeatureTaps<T>& taps) const {
    std::vector<std::size_t> idx;
    switch (kind) {
      case Kind::all:
        for (std::size_t i = 0; i < taps.ids.size(); ++i) idx.push_back(i);
        break;
      case Kind::penultimate:
        if (taps.ids.empty()) throw ConfigError("no feature taps available");
        idx.push_back(taps.ids.size() - 1);
        break;
      case Kind::named:
        for (const auto& id : ids) idx.push_back(taps.index_of(id));
        break;
    }
    return idx;
  }

  friend bool operator==(const TapSelection&, const TapSelection&) = default;
};

/// Loss re-weighting hyperparameters.
struct LossWeights {
  double alpha = 1.0;      // style
  double gamma = 1.0;      // content
  double beta = 1.0;       // boundary (targeted cross-entropy)
  double w1 = 1.0;         // margin term of the training loss
  double w2 = 1.0;         // cross-entropy term of the training loss
  double margin = 1.0;     // m
  double p = 2.0;          // norm order of the margin distances
  double smoothing = 0.1;  // label smoothing s

  void validate() const {
    auto check = [](double v, const char* name) {
      if (!std::isfinite(v) || v < 0.0) {
        throw ConfigError(std::string("loss weight ") + name + " must be finite and non-negative");
      }
    };
    check(alpha, "alpha");
    check(gamma, "gamma");
    check(beta, "beta");
    check(w1, "w1");
    check(w2, "w2");
    check(margin, "margin");
    if (!std::isfinite(p) || p < 1.0) throw ConfigError("norm order p must be >= 1");
    if (!(smoothing >= 0.0 && smoothing < 1.0)) throw ConfigError("smoothing must lie in [0, 1)");
  }

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Channel second-moment matrix of one c x h x w feature map, normalized by c*h*w.
template <typename T>
struct GramMatrix {
  std::size_t channels = 0;
  T normalization = T(1);
  std::vector<T> values;  // row-major c x c

  T at(std::size_t i, std::size_t j) const { return values[i * channels + j]; }
};

template <typename T>
GramMatrix<T> gram(std::span<const T> features, std::size_t c, std::size_t h, std::size_t w) {
  if (c == 0 || h == 0 || w == 0) throw ShapeError("gram of an empty feature map");
  if (features.size() != c * h * w) throw ShapeError("gram: feature size does not match c*h*w");
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Mat> f(features.data(), c, h * w);
  GramMatrix<T> g;
  g.channels = c;
  g.normalization = T(c * h * w);
  g.values.resize(c * c);
  Eigen::Map<Mat> out(g.values.data(), c, c);
  out.noalias() = f * f.transpose();
  out /= g.normalization;
  // Mirror the lower triangle so the result is exactly symmetric.
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = i + 1; j < c; ++j) out(i, j) = out(j, i);
  }
  return g;
}

/// Gram of sample `i` of a tap tensor.
template <typename T>
GramMatrix<T> gram(const Tensor<T>& tap, std::size_t i) {
  const Shape s = tap.shape();
  return gram<T>(tap.sample(i), s.c, s.h, s.w);
}

namespace detail {

template <typename T>
void require_same_tap(const Tensor<T>& a, const Tensor<T>& b, const std::string& id) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError("tap '" + id + "' shape mismatch: " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

template <typename T>
Tensor<T>& grad_slot(TapGrads<T>& g, std::size_t tap, const Shape& shape) {
  if (g.taps.size() <= tap) g.taps.resize(tap + 1);
  if (g.taps[tap].empty()) g.taps[tap] = Tensor<T>(shape);
  return g.taps[tap];
}

template <typename T>
Tensor<T>& logit_slot(TapGrads<T>& g, const Shape& shape) {
  if (g.logits.empty()) g.logits = Tensor<T>(shape);
  return g.logits;
}

}  // namespace detail

/// Sum over selected taps of the mean squared Gram-entry difference, averaged over the batch.
/// When `grad_o` is given, scale * d/d(taps_o) is accumulated into it.
template <typename T>
T style_loss(const FeatureTaps<T>& taps_o, const FeatureTaps<T>& taps_t, const TapSelection& sel,
             TapGrads<T>* grad_o = nullptr, T scale = T(1)) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const std::size_t n = taps_o.batch();
  double total = 0.0;
  for (std::size_t ti : sel.resolve(taps_o)) {
    const auto& id = taps_o.ids[ti];
    const Tensor<T>& fo = taps_o.taps[ti];
    const Tensor<T>& ft = taps_t.tap(id);
    detail::require_same_tap(fo, ft, id);
    const Shape s = fo.shape();
    const T c2 = T(s.c * s.c);
    for (std::size_t i = 0; i < n; ++i) {
      GramMatrix<T> go = gram(fo, i);
      GramMatrix<T> gt = gram(ft, i);
      Mat diff(s.c, s.c);
      for (std::size_t k = 0; k < go.values.size(); ++k) diff.data()[k] = go.values[k] - gt.values[k];
      total += double(diff.squaredNorm() / c2);
      if (grad_o) {
        // dL/dG = 2 D / c^2 (per sample, / n); dL/df = 2 * dL/dG * f / (c h w) as D is symmetric.
        Tensor<T>& g = detail::grad_slot(*grad_o, ti, s);
        Eigen::Map<const Mat> f(fo.data() + i * s.per_sample(), s.c, s.spatial());
        Eigen::Map<Mat> df(g.data() + i * s.per_sample(), s.c, s.spatial());
        const T k = scale * T(4) / (c2 * go.normalization * T(n));
        df.noalias() += k * diff * f;
      }
    }
  }
  return T(total / double(n));
}

/// Sum over selected taps of the element-mean squared feature difference, batch-averaged.
template <typename T>
T content_loss(const FeatureTaps<T>& taps_o, const FeatureTaps<T>& taps_t, const TapSelection& sel,
               TapGrads<T>* grad_o = nullptr, T scale = T(1)) {
  const std::size_t n = taps_o.batch();
  double total = 0.0;
  for (std::size_t ti : sel.resolve(taps_o)) {
    const auto& id = taps_o.ids[ti];
    const Tensor<T>& fo = taps_o.taps[ti];
    const Tensor<T>& ft = taps_t.tap(id);
    detail::require_same_tap(fo, ft, id);
    const std::size_t e = fo.shape().per_sample();
    Tensor<T>* g = grad_o ? &detail::grad_slot(*grad_o, ti, fo.shape()) : nullptr;
    const T k = scale * T(2) / (T(e) * T(n));
    for (std::size_t j = 0; j < fo.size(); ++j) {
      const T d = fo[j] - ft[j];
      total += double(d) * double(d) / double(e);
      if (g) (*g)[j] += k * d;
    }
  }
  return T(total / double(n));
}

/// Rows (1 - s) * onehot(y) + s / n.
template <typename T>
Tensor<T> smooth_labels(const std::vector<int>& labels, int num_classes, double s) {
  if (!(s >= 0.0 && s < 1.0)) throw ConfigError("smoothing must lie in [0, 1)");
  if (num_classes < 1) throw ConfigError("num_classes must be positive");
  Tensor<T> q(Shape{labels.size(), std::size_t(num_classes), 1, 1}, T(s / num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw DataError("label " + std::to_string(labels[i]) + " outside [0, " +
                      std::to_string(num_classes) + ")");
    }
    q[i * num_classes + labels[i]] = T((1.0 - s) + s / num_classes);
  }
  return q;
}

/// Numerically stable log-softmax of each row of {n, k} logits.
template <typename T>
std::vector<double> log_softmax_rows(const Tensor<T>& logits) {
  const std::size_t n = logits.shape().n, k = logits.shape().per_sample();
  std::vector<double> out(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, double(logits[i * k + j]));
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(double(logits[i * k + j]) - mx);
    const double lz = mx + std::log(z);
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = double(logits[i * k + j]) - lz;
  }
  return out;
}

/// Batch-mean cross-entropy of softmax(logits) against smoothed one-hot targets.
template <typename T>
T boundary_loss(const Tensor<T>& logits, const std::vector<int>& targets, double smoothing,
                Tensor<T>* grad_logits = nullptr, T scale = T(1),
                std::vector<T>* per_sample = nullptr) {
  const std::size_t n = logits.shape().n, k = logits.shape().per_sample();
  if (targets.size() != n) throw ShapeError("boundary_loss: label count does not match logits");
  const Tensor<T> q = smooth_labels<T>(targets, int(k), smoothing);
  const std::vector<double> lp = log_softmax_rows(logits);
  if (grad_logits && grad_logits->empty()) *grad_logits = Tensor<T>(logits.shape());
  if (per_sample) per_sample->resize(n, T(0));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double li = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double qj = double(q[i * k + j]);
      if (qj != 0.0) li -= qj * lp[i * k + j];
      if (grad_logits) {
        (*grad_logits)[i * k + j] += scale * T((std::exp(lp[i * k + j]) - qj) / double(n));
      }
    }
    if (per_sample) (*per_sample)[i] += scale * T(li);
    total += li;
  }
  return T(total / double(n));
}

/// Components of the stylized adversary objective.
struct AdversarialLossParts {
  double total = 0.0;
  double style = 0.0;
  double content = 0.0;
  double boundary = 0.0;
};

/// alpha * style + gamma * content + beta * boundary, with the boundary term being the targeted
/// cross-entropy of taps_o's logits against `targets` (no smoothing).
template <typename T>
AdversarialLossParts adversarial_loss(const FeatureTaps<T>& taps_o, const FeatureTaps<T>& taps_t,
                                      const std::vector<int>& targets, const LossWeights& w,
                                      const TapSelection& style_taps, const TapSelection& content_taps,
                                      TapGrads<T>* grad_o = nullptr) {
  w.validate();
  AdversarialLossParts parts;
  parts.style = double(style_loss(taps_o, taps_t, style_taps, grad_o, T(w.alpha)));
  parts.content = double(content_loss(taps_o, taps_t, content_taps, grad_o, T(w.gamma)));
  Tensor<T>* gl = nullptr;
  if (grad_o) gl = &detail::logit_slot(*grad_o, taps_o.logits.shape());
  parts.boundary = double(boundary_loss(taps_o.logits, targets, 0.0, gl, T(w.beta)));
  parts.total = w.alpha * parts.style + w.gamma * parts.content + w.beta * parts.boundary;
  return parts;
}

namespace detail {

/// ||v||_p of a - b and, optionally, d||v||_p / dv written to `grad`.
template <typename T>
double pnorm_diff(std::span<const T> a, std::span<const T> b, double p, std::vector<double>* grad) {
  const std::size_t e = a.size();
  double acc = 0.0;
  if (p == 2.0) {
    for (std::size_t k = 0; k < e; ++k) {
      const double d = double(a[k]) - double(b[k]);
      acc += d * d;
    }
    acc = std::sqrt(acc);
  } else if (p == 1.0) {
    for (std::size_t k = 0; k < e; ++k) acc += std::abs(double(a[k]) - double(b[k]));
  } else {
    for (std::size_t k = 0; k < e; ++k) acc += std::pow(std::abs(double(a[k]) - double(b[k])), p);
    acc = std::pow(acc, 1.0 / p);
  }
  if (grad) {
    grad->assign(e, 0.0);
    if (acc > 0.0) {
      for (std::size_t k = 0; k < e; ++k) {
        const double d = double(a[k]) - double(b[k]);
        if (p == 2.0) {
          (*grad)[k] = d / acc;
        } else if (p == 1.0) {
          (*grad)[k] = sign(d);
        } else {
          (*grad)[k] = sign(d) * std::pow(std::abs(d) / acc, p - 1.0);
        }
      }
    }
  }
  return acc;
}

}  // namespace detail

/// Contrastive hinge: batch mean of sum over taps of
///   max(||a - pos||_p - ||a - neg||_p + m, 0)
/// with norms over each sample's flattened tap. Gradients (scaled) accumulate into the three
/// optional containers.
template <typename T>
T margin_loss(const FeatureTaps<T>& anchor, const FeatureTaps<T>& positive,
              const FeatureTaps<T>& negative, double m, double p, const TapSelection& sel,
              TapGrads<T>* grad_anchor = nullptr, TapGrads<T>* grad_positive = nullptr,
              TapGrads<T>* grad_negative = nullptr, T scale = T(1)) {
  if (!(m >= 0.0) || !(p >= 1.0)) throw ConfigError("margin_loss requires m >= 0 and p >= 1");
  const std::size_t n = anchor.batch();
  if (positive.batch() != n || negative.batch() != n) {
    throw ShapeError("margin_loss: batch sizes differ");
  }
  const bool want_grad = grad_anchor || grad_positive || grad_negative;
  double total = 0.0;
  std::vector<double> gp, gn;
  for (std::size_t ti : sel.resolve(anchor)) {
    const auto& id = anchor.ids[ti];
    const Tensor<T>& a = anchor.taps[ti];
    const Tensor<T>& pos = positive.tap(id);
    const Tensor<T>& neg = negative.tap(id);
    detail::require_same_tap(a, pos, id);
    detail::require_same_tap(a, neg, id);
    for (std::size_t i = 0; i < n; ++i) {
      const double dp = detail::pnorm_diff(a.sample(i), pos.sample(i), p, want_grad ? &gp : nullptr);
      const double dn = detail::pnorm_diff(a.sample(i), neg.sample(i), p, want_grad ? &gn : nullptr);
      const double hinge = dp - dn + m;
      if (hinge <= 0.0) continue;
      total += hinge;
      if (!want_grad) continue;
      const double k = double(scale) / double(n);
      const std::size_t e = a.shape().per_sample();
      const std::size_t off = i * e;
      if (grad_anchor) {
        Tensor<T>& g = detail::grad_slot(*grad_anchor, ti, a.shape());
        for (std::size_t j = 0; j < e; ++j) g[off + j] += T(k * (gp[j] - gn[j]));
      }
      if (grad_positive) {
        Tensor<T>& g = detail::grad_slot(*grad_positive, ti, a.shape());
        for (std::size_t j = 0; j < e; ++j) g[off + j] -= T(k * gp[j]);
      }
      if (grad_negative) {
        Tensor<T>& g = detail::grad_slot(*grad_negative, ti, a.shape());
        for (std::size_t j = 0; j < e; ++j) g[off + j] += T(k * gn[j]);
      }
    }
  }
  return T(total / double(n));
}

}  // namespace satlab
