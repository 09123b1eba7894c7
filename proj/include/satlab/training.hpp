#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "satlab/attacks.hpp"
#include "satlab/checkpoint.hpp"
#include "satlab/data.hpp"
#include "satlab/errors.hpp"
#include "satlab/losses.hpp"
#include "satlab/model.hpp"
#include "satlab/rng.hpp"

namespace satlab {

enum class TrainMode { sat, natural, pgd_at, gaussian };

inline std::string mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::sat: return "sat";
    case TrainMode::natural: return "natural";
    case TrainMode::pgd_at: return "pgd-at";
    case TrainMode::gaussian: return "gaussian";
  }
  return "unknown";
}

inline TrainMode parse_mode(const std::string& s) {
  for (auto m : {TrainMode::sat, TrainMode::natural, TrainMode::pgd_at, TrainMode::gaussian}) {
    if (mode_name(m) == s) return m;
  }
  throw ConfigError("unknown training mode '" + s + "' (expected sat, natural, pgd-at or gaussian)");
}

/// Step schedule over 0-based epochs: initial * factor^(number of decay epochs <= epoch).
struct LrSchedule {
  double initial = 0.1;
  std::vector<int> decay_epochs{50, 95};
  double factor = 0.1;

  double at(int epoch) const {
    double lr = initial;
    for (int d : decay_epochs) {
      if (epoch >= d) lr *= factor;
    }
    return lr;
  }

  void validate() const {
    if (!(initial > 0.0) || !std::isfinite(initial)) throw ConfigError("learning rate must be > 0");
    if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("lr decay factor must lie in (0, 1)");
    for (std::size_t i = 1; i < decay_epochs.size(); ++i) {
      if (decay_epochs[i] <= decay_epochs[i - 1]) throw ConfigError("decay epochs must increase");
    }
  }

  friend bool operator==(const LrSchedule&, const LrSchedule&) = default;
};

struct TrainConfig {
  LossWeights weights;
  int epochs = 200;
  int batch_size = 128;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  LrSchedule lr;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::sat;
  double gaussian_sigma = 0.1;  // normalized units
  double epsilon = 8.0;         // raw units
  TapSelection margin_taps = TapSelection::penultimate();
  TapSelection style_taps = TapSelection::all_taps();
  TapSelection content_taps = TapSelection::all_taps();
  int pgd_iterations = 7;       // pgd-at adversary
  double pgd_step = 2.0;        // raw units
  int log_pgd_iterations = 0;   // > 0: quick PGD robustness on the eval set each epoch
  std::size_t log_samples = 0;  // 0: whole set

  void validate() const {
    weights.validate();
    lr.validate();
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (!(gaussian_sigma >= 0.0)) throw ConfigError("gaussian_sigma must be >= 0");
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
    if (pgd_iterations < 1 || !(pgd_step > 0.0)) throw ConfigError("invalid pgd-at schedule");
  }
};

/// SGD with momentum and L2 weight decay folded into the gradient:
///   g <- g + wd * w;  v <- mu * v + g;  w <- w - lr * v.
template <typename T>
class Sgd {
 public:
  Sgd(double momentum, double weight_decay) : mu_(momentum), wd_(weight_decay) {}

  void step(std::vector<Tensor<T>*> params, const std::vector<Tensor<T>>& grads, double lr) {
    if (velocity_.empty()) {
      for (auto* p : params) velocity_.emplace_back(p->shape());
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor<T>& w = *params[i];
      Tensor<T>& v = velocity_[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        const T g = grads[i][j] + T(wd_) * w[j];
        v[j] = T(mu_) * v[j] + g;
        w[j] -= T(lr) * v[j];
      }
    }
  }

 private:
  double mu_, wd_;
  std::vector<Tensor<T>> velocity_;
};

struct TargetDraw {
  std::vector<std::size_t> indices;
  std::vector<int> labels;
};

inline void require_target_pool(const std::vector<int>& pool_labels) {
  for (std::size_t i = 1; i < pool_labels.size(); ++i) {
    if (pool_labels[i] != pool_labels[0]) return;
  }
  throw PreconditionError("target pool must contain at least 2 classes");
}

/// For each source label, a uniformly random pool sample of a different class (with replacement).
inline TargetDraw sample_targets(const std::vector<int>& source_labels, const std::vector<int>& pool_labels,
                                 Rng& rng) {
  require_target_pool(pool_labels);
  TargetDraw d;
  d.indices.reserve(source_labels.size());
  for (int y : source_labels) {
    std::size_t j;
    do {
      j = uniform_index(rng, pool_labels.size());
    } while (pool_labels[j] == y);
    d.indices.push_back(j);
    d.labels.push_back(pool_labels[j]);
  }
  return d;
}

inline TargetDraw sample_targets(const std::vector<int>& source_labels, const Dataset& pool, Rng& rng) {
  return sample_targets(source_labels, pool.labels, rng);
}

/// x + clip(N(0, sigma^2), -eps, eps), clipped to [-1, 1]. sigma in normalized units, eps raw.
template <typename T>
ImageBatch<T> gaussian_transform(const ImageBatch<T>& batch, double sigma, double epsilon, Rng& rng) {
  if (!(sigma >= 0.0)) throw ConfigError("gaussian sigma must be >= 0");
  const double eps = to_normalized(epsilon);
  ImageBatch<T> out = batch;
  if (sigma == 0.0) return out;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const double n = std::clamp(normal(rng, 0.0, sigma), -eps, eps);
    out.pixels[i] = T(std::clamp(double(batch.pixels[i]) + n, -1.0, 1.0));
  }
  return out;
}

/// Clean samples, their transformed counterparts, and targets of other classes.
template <typename T>
struct TripletBatch {
  ImageBatch<T> clean;
  Tensor<T> adversarial;
  Tensor<T> target;
  std::vector<int> target_labels;

  void validate(double epsilon) const {
    if (!(adversarial.shape() == clean.pixels.shape()) || !(target.shape() == clean.pixels.shape())) {
      throw ShapeError("triplet tensors must share the clean batch shape");
    }
    if (target_labels.size() != clean.size()) throw ShapeError("triplet target label count mismatch");
    const double eps = to_normalized(epsilon);
    for (std::size_t i = 0; i < clean.size(); ++i) {
      if (target_labels[i] == clean.labels[i]) {
        throw PreconditionError("triplet sample " + std::to_string(i) + " targets its own class");
      }
      if (linf_distance<T>(adversarial.sample(i), clean.pixels.sample(i)) > eps + 1e-6) {
        throw PreconditionError("triplet sample " + std::to_string(i) + " leaves the epsilon ball");
      }
    }
  }
};

struct StepLoss {
  double total = 0.0;
  double margin = 0.0;
  double ce = 0.0;
};

/// L = w1 * margin(taps(x), taps(x_bar), taps(x_t)) + w2 * CE_s(x_bar, y), with parameter
/// gradients accumulated into `grads` through all three passes. Precomputed clean/target passes
/// are reused when given.
template <typename T>
StepLoss sat_loss(const Model<T>& model, const TripletBatch<T>& t, const TrainConfig& cfg,
                  std::vector<Tensor<T>>* grads, const ForwardPass<T>* clean_pass = nullptr,
                  const ForwardPass<T>* target_pass = nullptr) {
  const LossWeights& w = cfg.weights;
  StepLoss out;
  ForwardPass<T> adv = model.forward_pass(t.adversarial);
  TapGrads<T> g_adv = adv.taps.empty_grads();
  out.ce = double(boundary_loss(adv.taps.logits, t.clean.labels, w.smoothing, &g_adv.logits, T(w.w2)));
  if (w.w1 != 0.0) {
    std::optional<ForwardPass<T>> own_clean, own_target;
    if (!clean_pass) clean_pass = &own_clean.emplace(model.forward_pass(t.clean.pixels));
    if (!target_pass) target_pass = &own_target.emplace(model.forward_pass(t.target));
    TapGrads<T> g_clean = clean_pass->taps.empty_grads();
    TapGrads<T> g_target = target_pass->taps.empty_grads();
    out.margin = double(margin_loss(clean_pass->taps, adv.taps, target_pass->taps, w.margin, w.p,
                                    cfg.margin_taps, grads ? &g_clean : nullptr,
                                    grads ? &g_adv : nullptr, grads ? &g_target : nullptr, T(w.w1)));
    if (grads) {
      model.backward(*clean_pass, g_clean, grads);
      model.backward(*target_pass, g_target, grads);
    }
  }
  if (grads) model.backward(adv, g_adv, grads);
  out.total = w.w1 * out.margin + w.w2 * out.ce;
  return out;
}

/// Per-batch quantities reported by a training step.
struct BatchStats {
  StepLoss loss;
  AdversarialLossParts adversary;
};

/// One optimizer update on a prepared triplet.
template <typename T>
StepLoss sat_step(Model<T>& model, Sgd<T>& opt, const TripletBatch<T>& t, const TrainConfig& cfg,
                  double lr, const ForwardPass<T>* clean_pass = nullptr,
                  const ForwardPass<T>* target_pass = nullptr) {
  t.validate(cfg.epsilon);
  auto grads = model.zero_grads();
  const StepLoss loss = sat_loss(model, t, cfg, &grads, clean_pass, target_pass);
  if (!std::isfinite(loss.total)) {
    throw NumericError("non-finite training loss (margin " + std::to_string(loss.margin) + ", ce " +
                       std::to_string(loss.ce) + ")", 0);
  }
  opt.step(model.params(), grads, lr);
  return loss;
}

struct EpochRecord {
  int epoch = 0;  // 1-based count of completed epochs
  double lr = 0.0;
  double loss = 0.0;
  double margin = 0.0;
  double ce = 0.0;
  double adv_style = 0.0;
  double adv_content = 0.0;
  double adv_boundary = 0.0;
  double train_accuracy = 0.0;
  double eval_accuracy = -1.0;  // < 0: not measured
  double eval_pgd_accuracy = -1.0;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  const Dataset* eval_set = nullptr;
};

namespace detail {

template <typename T>
double accuracy_of(const Model<T>& model, const ImageBatch<T>& data, std::size_t batch_size = 250) {
  std::size_t correct = 0;
  const std::size_t per = data.pixels.shape().per_sample();
  for (std::size_t s = 0; s < data.size(); s += batch_size) {
    const std::size_t e = std::min(data.size(), s + batch_size);
    Tensor<T> x(data.pixels.shape().with_batch(e - s));
    std::copy(data.pixels.data() + s * per, data.pixels.data() + e * per, x.data());
    const auto pred = model.predict(x);
    for (std::size_t i = s; i < e; ++i) correct += pred[i - s] == data.labels[i];
  }
  return 100.0 * double(correct) / double(data.size());
}

inline std::vector<std::size_t> first_n(std::size_t n, std::size_t total) {
  std::vector<std::size_t> idx(n == 0 ? total : std::min(n, total));
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace detail

/// Runs cfg.epochs of the selected mode on `data` (normalized). Checkpoints are written before
/// each learning-rate decay and at the end when hooks.checkpoint_dir is set.
template <typename T>
std::vector<EpochRecord> train(Model<T>& model, const Dataset& data, const TrainConfig& cfg,
                               const TrainHooks& hooks = {}) {
  cfg.validate();
  if (data.size() == 0) throw DataError("training set is empty");
  if (data.num_classes != model.num_classes()) {
    throw ConfigError("dataset has " + std::to_string(data.num_classes) + " classes, model has " +
                      std::to_string(model.num_classes()));
  }
  if (data.state != PixelState::normalized) throw PreconditionError("training data must be normalized");
  if (cfg.mode == TrainMode::sat || cfg.mode == TrainMode::gaussian) require_target_pool(data.labels);
  model.set_mode(Mode::train);
  Sgd<T> opt(cfg.momentum, cfg.weight_decay);
  Rng shuffle_rng = make_rng(cfg.seed, 0x5417);
  Rng target_rng = make_rng(cfg.seed, 0x7a37);
  Rng noise_rng = make_rng(cfg.seed, 0x9a55);
  std::vector<EpochRecord> log;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  StylizedOptions adv_opt;
  adv_opt.epsilon = cfg.epsilon;
  adv_opt.weights = cfg.weights;
  adv_opt.style_taps = cfg.style_taps;
  adv_opt.content_taps = cfg.content_taps;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr.at(epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    std::size_t seen = 0, batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size), ++batch_index) {
      const std::size_t end = std::min(order.size(), start + std::size_t(cfg.batch_size));
      const std::vector<std::size_t> idx(order.begin() + long(start), order.begin() + long(end));
      const auto clean_f = data.batch(idx);
      ImageBatch<T> clean = clean_f.template cast<T>();
      BatchStats stats;
      try {
        if (cfg.mode == TrainMode::natural || cfg.mode == TrainMode::pgd_at) {
          TripletBatch<T> t;
          t.clean = clean;
          if (cfg.mode == TrainMode::natural) {
            t.adversarial = clean.pixels;
          } else {
            AttackConfig ac;
            ac.epsilon = cfg.epsilon;
            ac.step_size = cfg.pgd_step;
            ac.iterations = cfg.pgd_iterations;
            ac.random_start = true;
            ac.seed = cfg.seed * 1000003ull + std::uint64_t(epoch) * 7919ull + batch_index;
            t.adversarial = pgd(model, clean, ac).pixels;
          }
          TrainConfig ce_only = cfg;
          ce_only.weights.w1 = 0.0;
          auto grads = model.zero_grads();
          stats.loss = sat_loss(model, t, ce_only, &grads);
          if (!std::isfinite(stats.loss.total)) throw NumericError("non-finite training loss", 0);
          opt.step(model.params(), grads, lr);
        } else {
          const TargetDraw draw = sample_targets(clean.labels, data.labels, target_rng);
          TripletBatch<T> t;
          t.clean = clean;
          t.target = data.batch(draw.indices).pixels.template cast<T>();
          t.target_labels = draw.labels;
          const ForwardPass<T> clean_pass = model.forward_pass(clean.pixels);
          const ForwardPass<T> target_pass = model.forward_pass(t.target);
          if (cfg.mode == TrainMode::sat) {
            auto adv = stylized_step_from(model, clean, clean_pass, target_pass.taps, draw.labels, adv_opt);
            stats.adversary = adv.loss;
            t.adversarial = std::move(adv.adversarial.pixels);
          } else {
            t.adversarial = gaussian_transform(clean, cfg.gaussian_sigma, cfg.epsilon, noise_rng).pixels;
          }
          stats.loss = sat_step(model, opt, t, cfg, lr, &clean_pass, &target_pass);
        }
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch + 1) + ": " + e.what(), long(batch_index));
      }
      const double n = double(end - start);
      rec.loss += stats.loss.total * n;
      rec.margin += stats.loss.margin * n;
      rec.ce += stats.loss.ce * n;
      rec.adv_style += stats.adversary.style * n;
      rec.adv_content += stats.adversary.content * n;
      rec.adv_boundary += stats.adversary.boundary * n;
      seen += end - start;
    }
    for (double* v : {&rec.loss, &rec.margin, &rec.ce, &rec.adv_style, &rec.adv_content, &rec.adv_boundary}) {
      *v /= double(seen);
    }
    if (!model.parameters_finite()) {
      throw NumericError("epoch " + std::to_string(epoch + 1) + ": parameters became non-finite", 0);
    }
    model.set_mode(Mode::eval);
    rec.train_accuracy = detail::accuracy_of(
        model, data.batch(detail::first_n(cfg.log_samples, data.size())).template cast<T>());
    if (hooks.eval_set) {
      const auto ev = hooks.eval_set->batch(detail::first_n(cfg.log_samples, hooks.eval_set->size()))
                          .template cast<T>();
      rec.eval_accuracy = detail::accuracy_of(model, ev);
      if (cfg.log_pgd_iterations > 0) {
        AttackConfig ac;
        ac.epsilon = cfg.epsilon;
        ac.iterations = cfg.log_pgd_iterations;
        ac.seed = cfg.seed;
        const auto adv = pgd(model, ev, ac);
        rec.eval_pgd_accuracy = detail::accuracy_of(model, ImageBatch<T>{adv.pixels, ev.labels});
      }
    }
    model.set_mode(Mode::train);
    log.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (!hooks.checkpoint_dir.empty()) {
      const int next = epoch + 1;
      const bool boundary = std::find(cfg.lr.decay_epochs.begin(), cfg.lr.decay_epochs.end(), next) !=
                            cfg.lr.decay_epochs.end();
      if (boundary && next < cfg.epochs) {
        save_checkpoint(model, hooks.checkpoint_dir / ("epoch-" + std::to_string(next) + ".ckpt"));
      }
      if (next == cfg.epochs) save_checkpoint(model, hooks.checkpoint_dir / "final.ckpt");
    }
  }
  model.set_mode(Mode::eval);
  return log;
}

}  // namespace satlab
