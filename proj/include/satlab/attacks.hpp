#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "satlab/errors.hpp"
#include "satlab/losses.hpp"
#include "satlab/model.hpp"
#include "satlab/rng.hpp"
#include "satlab/tensor.hpp"

namespace satlab {

/// Converts a budget in raw 0..255 pixel units to the normalized [-1, +1] space.
constexpr double to_normalized(double raw) { return raw * 2.0 / 255.0; }

/// Hyperparameters shared by every attack. Budgets and step sizes are in raw 0..255 units.
struct AttackConfig {
  double epsilon = 8.0;
  double step_size = 2.0;
  int iterations = 20;
  bool random_start = true;
  double momentum_decay = 1.0;  // MIFGSM
  double kappa = 0.0;           // CW confidence
  int window_h = 5;             // ROA
  int window_w = 5;
  int stride = 2;
  int candidates = 10;
  int roa_steps = 30;
  double roa_step_size = 16.0;
  int deepfool_max_iter = 50;
  double overshoot = 0.02;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("attack epsilon must be >= 0");
    if (iterations < 1) throw ConfigError("attack iterations must be >= 1");
    if (iterations > 1 && !(step_size > 0.0)) throw ConfigError("attack step_size must be > 0");
    if (!(momentum_decay >= 0.0)) throw ConfigError("momentum_decay must be >= 0");
    if (!(kappa >= 0.0)) throw ConfigError("kappa must be >= 0");
    if (window_h < 1 || window_w < 1) throw ConfigError("ROA window must be at least 1x1");
    if (stride < 1) throw ConfigError("ROA stride must be >= 1");
    if (candidates < 1) throw ConfigError("ROA candidates must be >= 1");
    if (roa_steps < 0 || !(roa_step_size > 0.0)) throw ConfigError("invalid ROA inner schedule");
    if (deepfool_max_iter < 1 || !(overshoot >= 0.0)) throw ConfigError("invalid DeepFool settings");
  }

  friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

enum class AttackKind { fgsm, pgd, mifgsm, cw, deepfool, roa_gradient, roa_exhaustive };

inline std::string attack_name(AttackKind k) {
  switch (k) {
    case AttackKind::fgsm: return "fgsm";
    case AttackKind::pgd: return "pgd";
    case AttackKind::mifgsm: return "mifgsm";
    case AttackKind::cw: return "cw";
    case AttackKind::deepfool: return "deepfool";
    case AttackKind::roa_gradient: return "roa-gradient";
    case AttackKind::roa_exhaustive: return "roa-exhaustive";
  }
  return "unknown";
}

inline AttackKind parse_attack(const std::string& name) {
  for (auto k : {AttackKind::fgsm, AttackKind::pgd, AttackKind::mifgsm, AttackKind::cw,
                 AttackKind::deepfool, AttackKind::roa_gradient, AttackKind::roa_exhaustive}) {
    if (attack_name(k) == name) return k;
  }
  throw ConfigError("unknown attack '" + name + "'");
}

/// Top-left corner of an ROA window.
struct WindowPos {
  int row = 0;
  int col = 0;
  friend bool operator==(const WindowPos&, const WindowPos&) = default;
};

template <typename T>
struct AdversarialBatch {
  Tensor<T> pixels;
  Tensor<T> source;
  std::vector<int> labels;
  std::vector<std::uint8_t> success;  // prediction differs from the source label
  std::vector<double> linf;           // normalized units
  std::vector<WindowPos> windows;     // ROA only
  std::vector<double> search_loss;    // ROA only: loss of the grey-filled selected window
  std::vector<double> final_loss;     // attack objective at the returned pixels, when tracked

  std::size_t size() const { return labels.size(); }
};

namespace detail {

template <typename T>
AdversarialBatch<T> finish(const Model<T>& model, const ImageBatch<T>& batch, Tensor<T> adv) {
  AdversarialBatch<T> out;
  out.labels = batch.labels;
  out.source = batch.pixels;
  const auto pred = model.predict(adv);
  out.success.resize(batch.size());
  out.linf.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.success[i] = pred[i] != batch.labels[i];
    out.linf[i] = linf_distance<T>(adv.sample(i), batch.pixels.sample(i));
  }
  out.pixels = std::move(adv);
  return out;
}

/// adv <- clip(clamp(adv + step * sign(dir), src - eps, src + eps), -1, 1).
template <typename T>
void signed_step(Tensor<T>& adv, const Tensor<T>& src, const Tensor<T>& dir, T step, T eps) {
  for (std::size_t i = 0; i < adv.size(); ++i) {
    T v = adv[i] + step * sign(dir[i]);
    v = std::clamp(v, src[i] - eps, src[i] + eps);
    adv[i] = std::clamp(v, T(-1), T(1));
  }
}

template <typename T>
void random_start(Tensor<T>& adv, const Tensor<T>& src, T eps, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x5eed5);
  for (std::size_t i = 0; i < adv.size(); ++i) {
    T v = src[i] + T(uniform(rng, -double(eps), double(eps)));
    adv[i] = std::clamp(v, T(-1), T(1));
  }
}

}  // namespace detail

/// Gradient of the batch-mean cross-entropy w.r.t. pixels, plus per-sample losses.
template <typename T>
InputGradient<T> ce_gradient(const Model<T>& model, const Tensor<T>& pixels,
                             const std::vector<int>& labels, std::vector<T>* per_sample = nullptr) {
  LossFn<T> fn = [&](const FeatureTaps<T>& taps) {
    LossEval<T> ev;
    ev.grads = taps.empty_grads();
    ev.value = boundary_loss(taps.logits, labels, 0.0, &ev.grads.logits, T(1), &ev.per_sample);
    return ev;
  };
  if (!per_sample) return grad_input(model, fn, pixels);
  ForwardPass<T> pass = model.forward_pass(pixels);
  LossEval<T> ev = fn(pass.taps);
  *per_sample = ev.per_sample;
  return {model.backward(pass, ev.grads), ev.value};
}

/// Cross-entropy of each sample against its label.
template <typename T>
std::vector<double> per_sample_ce(const Model<T>& model, const Tensor<T>& pixels,
                                  const std::vector<int>& labels) {
  const auto logits = model.forward(pixels).logits;
  const auto lp = log_softmax_rows(logits);
  const std::size_t k = logits.shape().per_sample();
  std::vector<double> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = -lp[i * k + labels[i]];
  return out;
}

struct StylizedOptions {
  double epsilon = 8.0;  // raw units
  LossWeights weights;
  TapSelection style_taps = TapSelection::all_taps();
  TapSelection content_taps = TapSelection::all_taps();
};

template <typename T>
struct StylizedResult {
  AdversarialBatch<T> adversarial;
  AdversarialLossParts loss;
};

/// One stylized step from precomputed passes: x_bar = clip(x_o - eps * sign(grad L_adv), -1, 1),
/// where L_adv pulls x_o toward the style, content and class of the target samples.
template <typename T>
StylizedResult<T> stylized_step_from(const Model<T>& model, const ImageBatch<T>& x_o,
                                     const ForwardPass<T>& pass_o, const FeatureTaps<T>& taps_t,
                                     const std::vector<int>& y_t, const StylizedOptions& opt) {
  if (y_t.size() != x_o.size()) throw ShapeError("stylized_step: target label count mismatch");
  if (taps_t.batch() != x_o.size()) throw ShapeError("stylized_step: target batch size mismatch");
  for (std::size_t i = 0; i < y_t.size(); ++i) {
    if (y_t[i] == x_o.labels[i]) {
      throw PreconditionError("stylized_step: target sample " + std::to_string(i) +
                              " shares the source class " + std::to_string(y_t[i]));
    }
  }
  if (!(opt.epsilon >= 0.0)) throw ConfigError("stylized_step: epsilon must be >= 0");
  StylizedResult<T> out;
  TapGrads<T> g = pass_o.taps.empty_grads();
  out.loss = adversarial_loss(pass_o.taps, taps_t, y_t, opt.weights, opt.style_taps,
                              opt.content_taps, &g);
  if (!std::isfinite(out.loss.total)) throw NumericError("non-finite adversarial loss", 0);
  Tensor<T> grad = model.backward(pass_o, g);
  const T eps = T(to_normalized(opt.epsilon));
  Tensor<T> adv = x_o.pixels;
  detail::signed_step(adv, x_o.pixels, grad, -eps, eps);
  out.adversarial = detail::finish(model, x_o, std::move(adv));
  return out;
}

template <typename T>
StylizedResult<T> stylized_step(const Model<T>& model, const ImageBatch<T>& x_o,
                                const Tensor<T>& x_t, const std::vector<int>& y_t,
                                const StylizedOptions& opt) {
  for (std::size_t i = 0; i < y_t.size() && i < x_o.size(); ++i) {
    if (y_t[i] == x_o.labels[i]) {
      throw PreconditionError("stylized_step: target sample " + std::to_string(i) +
                              " shares the source class " + std::to_string(y_t[i]));
    }
  }
  const FeatureTaps<T> taps_t = model.forward(x_t);
  const ForwardPass<T> pass_o = model.forward_pass(x_o.pixels);
  return stylized_step_from(model, x_o, pass_o, taps_t, y_t, opt);
}

/// Untargeted single step: x + eps * sign(grad CE(x, y)), clipped.
template <typename T>
AdversarialBatch<T> fgsm(const Model<T>& model, const ImageBatch<T>& batch, const AttackConfig& cfg) {
  cfg.validate();
  const T eps = T(to_normalized(cfg.epsilon));
  Tensor<T> adv = batch.pixels;
  const auto g = ce_gradient(model, adv, batch.labels);
  detail::signed_step(adv, batch.pixels, g.gradient, eps, eps);
  return detail::finish(model, batch, std::move(adv));
}

/// Projected signed-gradient ascent on cross-entropy inside the l-inf ball.
template <typename T>
AdversarialBatch<T> pgd(const Model<T>& model, const ImageBatch<T>& batch, const AttackConfig& cfg) {
  cfg.validate();
  const T eps = T(to_normalized(cfg.epsilon));
  const T step = T(to_normalized(cfg.step_size));
  Tensor<T> adv = batch.pixels;
  if (cfg.random_start) detail::random_start(adv, batch.pixels, eps, cfg.seed);
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto g = ce_gradient(model, adv, batch.labels);
    detail::signed_step(adv, batch.pixels, g.gradient, step, eps);
  }
  return detail::finish(model, batch, std::move(adv));
}

/// Momentum iterative FGSM: g <- mu * g + grad / ||grad||_1 per sample; step eps / iterations.
template <typename T>
AdversarialBatch<T> mifgsm(const Model<T>& model, const ImageBatch<T>& batch,
                           const AttackConfig& cfg) {
  cfg.validate();
  const T eps = T(to_normalized(cfg.epsilon));
  const T step = T(to_normalized(cfg.epsilon) / double(cfg.iterations));
  const T mu = T(cfg.momentum_decay);
  Tensor<T> adv = batch.pixels;
  Tensor<T> momentum(adv.shape());
  const std::size_t per = adv.shape().per_sample();
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto g = ce_gradient(model, adv, batch.labels);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      double l1 = 0.0;
      for (std::size_t j = 0; j < per; ++j) l1 += std::abs(double(g.gradient[i * per + j]));
      for (std::size_t j = 0; j < per; ++j) {
        const std::size_t k = i * per + j;
        momentum[k] = mu * momentum[k] + (l1 > 0.0 ? T(double(g.gradient[k]) / l1) : T(0));
      }
    }
    detail::signed_step(adv, batch.pixels, momentum, step, eps);
  }
  return detail::finish(model, batch, std::move(adv));
}

/// CW margin max(Z_y - max_{i != y} Z_i, -kappa) per sample and its logit gradient.
template <typename T>
std::vector<double> cw_margin(const Tensor<T>& logits, const std::vector<int>& labels, double kappa,
                              Tensor<T>* grad_logits = nullptr) {
  const std::size_t n = logits.shape().n, k = logits.shape().per_sample();
  std::vector<double> out(n);
  if (grad_logits) *grad_logits = Tensor<T>(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    std::size_t other = (y == 0) ? 1 : 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (int(j) != y && logits[i * k + j] > logits[i * k + other]) other = j;
    }
    const double m = double(logits[i * k + y]) - double(logits[i * k + other]);
    out[i] = std::max(m, -kappa);
    if (grad_logits && m > -kappa) {
      (*grad_logits)[i * k + y] = T(1);
      (*grad_logits)[i * k + other] = T(-1);
    }
  }
  return out;
}

/// PGD descending the CW margin loss inside the l-inf ball.
template <typename T>
AdversarialBatch<T> cw_linf(const Model<T>& model, const ImageBatch<T>& batch,
                            const AttackConfig& cfg) {
  cfg.validate();
  const T eps = T(to_normalized(cfg.epsilon));
  const T step = T(to_normalized(cfg.step_size));
  Tensor<T> adv = batch.pixels;
  if (cfg.random_start) detail::random_start(adv, batch.pixels, eps, cfg.seed);
  for (int it = 0; it < cfg.iterations; ++it) {
    ForwardPass<T> pass = model.forward_pass(adv);
    TapGrads<T> g = pass.taps.empty_grads();
    cw_margin(pass.taps.logits, batch.labels, cfg.kappa, &g.logits);
    const Tensor<T> grad = model.backward(pass, g);
    detail::signed_step(adv, batch.pixels, grad, -step, eps);
  }
  auto out = detail::finish(model, batch, adv);
  out.final_loss = cw_margin(model.forward(out.pixels).logits, batch.labels, cfg.kappa);
  return out;
}

template <typename T>
struct DeepFoolResult {
  Tensor<T> perturbation;  // (1 + overshoot) * accumulated l2 steps, before any projection
  std::vector<int> iterations;
  std::vector<std::uint8_t> converged;
};

/// Multi-class l2 DeepFool. Each step moves to the nearest linearized boundary:
///   r = (|f_l| / ||w_l|| + 1e-4) * w_l / ||w_l||,  f_k = Z_k - Z_y, w_k = grad f_k.
template <typename T>
DeepFoolResult<T> deepfool_l2(const Model<T>& model, const ImageBatch<T>& batch, int max_iter,
                              double overshoot) {
  const std::size_t n = batch.size();
  const std::size_t per = batch.pixels.shape().per_sample();
  const int k = model.num_classes();
  DeepFoolResult<T> res;
  res.perturbation = Tensor<T>(batch.pixels.shape());
  res.iterations.assign(n, 0);
  res.converged.assign(n, 0);
  std::vector<double> r_tot(n * per, 0.0);
  Tensor<T> x = batch.pixels;
  for (int it = 0;; ++it) {
    ForwardPass<T> pass = model.forward_pass(x);
    const auto pred = Model<T>::argmax_rows(pass.taps.logits);
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < n; ++i) {
      if (!res.converged[i] && pred[i] != batch.labels[i]) res.converged[i] = 1;
      if (!res.converged[i]) active.push_back(i);
    }
    if (active.empty() || it >= max_iter) break;
    // Gradients of every logit, batched across samples.
    std::vector<Tensor<T>> grads(k);
    for (int j = 0; j < k; ++j) {
      TapGrads<T> g = pass.taps.empty_grads();
      g.logits = Tensor<T>(pass.taps.logits.shape());
      for (std::size_t i = 0; i < n; ++i) g.logits[i * k + j] = T(1);
      grads[j] = model.backward(pass, g);
    }
    for (std::size_t i : active) {
      const int y = batch.labels[i];
      double best = INFINITY, best_f = 0.0, best_norm = 0.0;
      int best_k = -1;
      for (int j = 0; j < k; ++j) {
        if (j == y) continue;
        const double f = double(pass.taps.logits[i * k + j]) - double(pass.taps.logits[i * k + y]);
        double nrm = 0.0;
        for (std::size_t d = 0; d < per; ++d) {
          const double w = double(grads[j][i * per + d]) - double(grads[y][i * per + d]);
          nrm += w * w;
        }
        nrm = std::sqrt(nrm);
        if (nrm == 0.0) continue;
        const double dist = std::abs(f) / nrm;
        if (dist < best) {
          best = dist;
          best_k = j;
          best_f = f;
          best_norm = nrm;
        }
      }
      if (best_k < 0) continue;  // flat logits: no direction to move
      const double scale = (std::abs(best_f) / best_norm + 1e-4) / best_norm;
      for (std::size_t d = 0; d < per; ++d) {
        const double w = double(grads[best_k][i * per + d]) - double(grads[y][i * per + d]);
        r_tot[i * per + d] += scale * w;
      }
      res.iterations[i] = it + 1;
      for (std::size_t d = 0; d < per; ++d) {
        const std::size_t q = i * per + d;
        x[q] = std::clamp(T(double(batch.pixels[q]) + (1.0 + overshoot) * r_tot[q]), T(-1), T(1));
      }
    }
  }
  for (std::size_t q = 0; q < r_tot.size(); ++q) res.perturbation[q] = T((1.0 + overshoot) * r_tot[q]);
  return res;
}

/// DeepFool noise projected onto the eps ball, then clipped to the pixel range.
template <typename T>
AdversarialBatch<T> deepfool_linf(const Model<T>& model, const ImageBatch<T>& batch,
                                  const AttackConfig& cfg) {
  cfg.validate();
  const T eps = T(to_normalized(cfg.epsilon));
  const auto df = deepfool_l2(model, batch, cfg.deepfool_max_iter, cfg.overshoot);
  Tensor<T> adv = batch.pixels;
  for (std::size_t q = 0; q < adv.size(); ++q) {
    const T r = std::clamp(df.perturbation[q], -eps, eps);
    adv[q] = std::clamp(batch.pixels[q] + r, T(-1), T(1));
  }
  auto out = detail::finish(model, batch, std::move(adv));
  for (std::size_t i = 0; i < out.size(); ++i) out.success[i] = out.success[i] && df.converged[i];
  return out;
}

enum class RoaSearch { gradient, exhaustive };

/// Every top-left window corner visited with the configured stride, row-major.
inline std::vector<WindowPos> roa_positions(std::size_t h, std::size_t w, const AttackConfig& cfg) {
  if (std::size_t(cfg.window_h) > h || std::size_t(cfg.window_w) > w) {
    throw ConfigError("ROA window " + std::to_string(cfg.window_h) + "x" +
                      std::to_string(cfg.window_w) + " larger than image " + std::to_string(h) +
                      "x" + std::to_string(w));
  }
  std::vector<WindowPos> pos;
  for (int r = 0; r + cfg.window_h <= int(h); r += cfg.stride) {
    for (int c = 0; c + cfg.window_w <= int(w); c += cfg.stride) pos.push_back({r, c});
  }
  return pos;
}

namespace detail {

template <typename T>
void fill_window(std::span<T> sample, const Shape& s, WindowPos p, int wh, int ww, T value) {
  for (std::size_t c = 0; c < s.c; ++c) {
    for (int y = p.row; y < p.row + wh; ++y) {
      for (int x = p.col; x < p.col + ww; ++x) sample[(c * s.h + y) * s.w + x] = value;
    }
  }
}

}  // namespace detail

/// Per-sample cross-entropy with the window at `p` filled with mid-grey (0).
template <typename T>
std::vector<double> roa_window_loss(const Model<T>& model, const ImageBatch<T>& batch, WindowPos p,
                                    const AttackConfig& cfg) {
  Tensor<T> x = batch.pixels;
  const Shape s = x.shape();
  for (std::size_t i = 0; i < s.n; ++i) {
    detail::fill_window(x.sample(i), s, p, cfg.window_h, cfg.window_w, T(0));
  }
  return per_sample_ce(model, x, batch.labels);
}

/// Rectangular occlusion attack. The window position maximizes the grey-window loss over all
/// positions (exhaustive) or over the `candidates` positions with the largest summed input-gradient
/// magnitude (gradient). Ties go to the smallest (row, col). Pixels inside the chosen window are
/// then optimized by signed ascent on cross-entropy, free within [-1, 1]; all others are untouched.
template <typename T>
AdversarialBatch<T> roa(const Model<T>& model, const ImageBatch<T>& batch, const AttackConfig& cfg,
                        RoaSearch mode) {
  cfg.validate();
  const Shape s = batch.pixels.shape();
  const auto positions = roa_positions(s.h, s.w, cfg);
  const std::size_t n = batch.size();

  std::vector<std::vector<std::size_t>> candidates(n);
  if (mode == RoaSearch::exhaustive) {
    std::vector<std::size_t> all(positions.size());
    std::iota(all.begin(), all.end(), 0);
    for (auto& c : candidates) c = all;
  } else {
    const auto g = ce_gradient(model, batch.pixels, batch.labels);
    for (std::size_t i = 0; i < n; ++i) {
      const auto gs = g.gradient.sample(i);
      std::vector<double> score(positions.size(), 0.0);
      for (std::size_t p = 0; p < positions.size(); ++p) {
        for (std::size_t c = 0; c < s.c; ++c) {
          for (int y = positions[p].row; y < positions[p].row + cfg.window_h; ++y) {
            for (int x = positions[p].col; x < positions[p].col + cfg.window_w; ++x) {
              score[p] += std::abs(double(gs[(c * s.h + y) * s.w + x]));
            }
          }
        }
      }
      std::vector<std::size_t> order(positions.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
      order.resize(std::min<std::size_t>(order.size(), std::size_t(cfg.candidates)));
      std::sort(order.begin(), order.end());
      candidates[i] = std::move(order);
    }
  }

  // Score every position needed by any sample, one batched forward per position.
  std::vector<std::uint8_t> needed(positions.size(), 0);
  for (const auto& c : candidates) {
    for (auto p : c) needed[p] = 1;
  }
  std::vector<std::vector<double>> loss_at(positions.size());
  for (std::size_t p = 0; p < positions.size(); ++p) {
    if (needed[p]) loss_at[p] = roa_window_loss(model, batch, positions[p], cfg);
  }

  std::vector<WindowPos> chosen(n);
  std::vector<double> search(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -INFINITY;
    std::size_t best_p = candidates[i].front();
    for (auto p : candidates[i]) {  // ascending index == ascending (row, col)
      if (loss_at[p][i] > best) {
        best = loss_at[p][i];
        best_p = p;
      }
    }
    chosen[i] = positions[best_p];
    search[i] = best;
  }

  Tensor<T> mask(s);
  for (std::size_t i = 0; i < n; ++i) {
    detail::fill_window(mask.sample(i), s, chosen[i], cfg.window_h, cfg.window_w, T(1));
  }
  const T step = T(to_normalized(cfg.roa_step_size));
  Tensor<T> adv = batch.pixels;
  for (int it = 0; it < cfg.roa_steps; ++it) {
    const auto g = ce_gradient(model, adv, batch.labels);
    for (std::size_t q = 0; q < adv.size(); ++q) {
      if (mask[q] == T(0)) continue;
      adv[q] = std::clamp(adv[q] + step * sign(g.gradient[q]), T(-1), T(1));
    }
  }
  auto out = detail::finish(model, batch, adv);
  out.windows = std::move(chosen);
  out.search_loss = std::move(search);
  out.final_loss = per_sample_ce(model, out.pixels, batch.labels);
  return out;
}

template <typename T>
AdversarialBatch<T> run_attack(AttackKind kind, const Model<T>& model, const ImageBatch<T>& batch,
                               const AttackConfig& cfg) {
  switch (kind) {
    case AttackKind::fgsm: return fgsm(model, batch, cfg);
    case AttackKind::pgd: return pgd(model, batch, cfg);
    case AttackKind::mifgsm: return mifgsm(model, batch, cfg);
    case AttackKind::cw: return cw_linf(model, batch, cfg);
    case AttackKind::deepfool: return deepfool_linf(model, batch, cfg);
    case AttackKind::roa_gradient: return roa(model, batch, cfg, RoaSearch::gradient);
    case AttackKind::roa_exhaustive: return roa(model, batch, cfg, RoaSearch::exhaustive);
  }
  throw ConfigError("unhandled attack kind");
}

}  // namespace satlab
