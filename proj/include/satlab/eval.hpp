#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "satlab/attacks.hpp"
#include "satlab/data.hpp"
#include "satlab/errors.hpp"
#include "satlab/model.hpp"

namespace satlab {

struct AttackRecord {
  std::string attack;
  AttackConfig config;
  std::size_t samples = 0;
  double clean_accuracy = 0.0;
  double robust_accuracy = 0.0;
  double mean_linf = 0.0;  // raw units
  std::string source_model;  // set for transfer attacks
  std::vector<std::uint8_t> success;  // optional per-sample detail
  std::vector<double> linf;           // raw units

  friend bool operator==(const AttackRecord&, const AttackRecord&) = default;
};

/// One curve of a sweep (accuracy against budget or iterations).
struct Sweep {
  std::string name;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<double> y;

  friend bool operator==(const Sweep&, const Sweep&) = default;
};

struct ObfuscationCheck {
  std::string name;
  bool passed = false;
  std::map<std::string, double> numbers;
  std::string detail;

  friend bool operator==(const ObfuscationCheck&, const ObfuscationCheck&) = default;
};

struct ObfuscationReport {
  std::vector<ObfuscationCheck> checks;
  std::vector<Sweep> sweeps;

  bool passed() const {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return !checks.empty();
  }
  friend bool operator==(const ObfuscationReport&, const ObfuscationReport&) = default;
};

struct CorruptionResult {
  int table_version = 1;
  std::vector<int> severities;
  std::map<std::string, std::vector<double>> accuracy;  // per severity, in `severities` order
  std::map<std::string, double> mean;
  double overall_mean = 0.0;
  double variance = 0.0;  // population variance of the per-corruption means
  double clean_accuracy = 0.0;
  std::size_t samples = 0;

  friend bool operator==(const CorruptionResult&, const CorruptionResult&) = default;
};

struct RobustnessReport {
  std::string model_id;
  std::string dataset_id;
  std::size_t samples = 0;
  double clean_accuracy = 0.0;
  std::vector<AttackRecord> attacks;
  std::optional<CorruptionResult> corruptions;
  std::optional<ObfuscationReport> obfuscation;
  std::optional<double> correlation_loss;
  std::vector<Sweep> sweeps;

  friend bool operator==(const RobustnessReport&, const RobustnessReport&) = default;
};

/// JSON document "satlab-report/1".
std::string report_to_json(const RobustnessReport& r);
RobustnessReport report_from_json(const std::string& text);
void save_report(const RobustnessReport& r, const std::filesystem::path& path);
RobustnessReport load_report(const std::filesystem::path& path);

namespace detail {

template <typename T>
void require_eval(const Model<T>& model, const ImageBatch<T>& data) {
  if (model.mode() != Mode::eval) throw PreconditionError("evaluation requires a model in eval mode");
  if (data.size() == 0) throw DataError("evaluation dataset is empty");
  data.validate(model.num_classes());
}

template <typename T>
ImageBatch<T> slice(const ImageBatch<T>& data, std::size_t start, std::size_t end) {
  const std::size_t per = data.pixels.shape().per_sample();
  ImageBatch<T> b{Tensor<T>(data.pixels.shape().with_batch(end - start)), {}};
  std::copy(data.pixels.data() + start * per, data.pixels.data() + end * per, b.pixels.data());
  b.labels.assign(data.labels.begin() + long(start), data.labels.begin() + long(end));
  return b;
}

/// Attack seeds differ per batch but depend only on the base seed and the batch index.
inline std::uint64_t batch_seed(std::uint64_t seed, std::size_t batch) {
  return seed ^ (0x9e3779b97f4a7c15ull * (std::uint64_t(batch) + 1));
}

template <typename T>
std::size_t count_correct(const Model<T>& model, const Tensor<T>& pixels, const std::vector<int>& labels) {
  const auto pred = model.predict(pixels);
  std::size_t c = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) c += pred[i] == labels[i];
  return c;
}

}  // namespace detail

/// Percentage of `data` classified correctly (argmax, lowest index on ties).
template <typename T>
double clean_accuracy(const Model<T>& model, const ImageBatch<T>& data, std::size_t batch_size = 250) {
  detail::require_eval(model, data);
  std::size_t correct = 0;
  for (std::size_t s = 0; s < data.size(); s += batch_size) {
    const auto b = detail::slice(data, s, std::min(data.size(), s + batch_size));
    correct += detail::count_correct(model, b.pixels, b.labels);
  }
  return 100.0 * double(correct) / double(data.size());
}

/// Adversaries crafted on `source`, accuracy measured on `target`.
template <typename T>
AttackRecord transfer_attack(const Model<T>& source, const Model<T>& target, const ImageBatch<T>& data,
                             AttackKind kind, const AttackConfig& cfg, std::size_t batch_size = 100,
                             bool keep_per_sample = false) {
  if (!(source.input_shape(1) == target.input_shape(1)) || source.num_classes() != target.num_classes()) {
    throw ConfigError("transfer source and target models differ in input shape or class count");
  }
  cfg.validate();
  detail::require_eval(source, data);
  detail::require_eval(target, data);
  if (batch_size == 0) throw ConfigError("evaluation batch size must be >= 1");
  AttackRecord rec;
  rec.attack = attack_name(kind);
  rec.config = cfg;
  rec.samples = data.size();
  std::size_t clean = 0, robust = 0, index = 0;
  double linf_sum = 0.0;
  for (std::size_t s = 0; s < data.size(); s += batch_size, ++index) {
    const auto b = detail::slice(data, s, std::min(data.size(), s + batch_size));
    AttackConfig c = cfg;
    c.seed = detail::batch_seed(cfg.seed, index);
    const auto adv = run_attack(kind, source, b, c);
    clean += detail::count_correct(target, b.pixels, b.labels);
    const auto pred = target.predict(adv.pixels);
    for (std::size_t i = 0; i < b.size(); ++i) {
      const bool ok = pred[i] == b.labels[i];
      robust += ok;
      const double d = adv.linf[i] * 127.5;
      linf_sum += d;
      if (keep_per_sample) {
        rec.success.push_back(!ok);
        rec.linf.push_back(d);
      }
    }
  }
  rec.clean_accuracy = 100.0 * double(clean) / double(data.size());
  rec.robust_accuracy = 100.0 * double(robust) / double(data.size());
  rec.mean_linf = linf_sum / double(data.size());
  return rec;
}

/// White-box robust accuracy.
template <typename T>
AttackRecord robust_accuracy(const Model<T>& model, const ImageBatch<T>& data, AttackKind kind,
                             const AttackConfig& cfg, std::size_t batch_size = 100,
                             bool keep_per_sample = false) {
  return transfer_attack(model, model, data, kind, cfg, batch_size, keep_per_sample);
}

/// Unbiased covariance (mean-centered, divided by n - 1) of the rows of `f` (n x d).
inline Eigen::MatrixXd feature_covariance(const Eigen::MatrixXd& f) {
  if (f.rows() < 2) throw PreconditionError("covariance needs at least 2 samples");
  const Eigen::MatrixXd centered = f.rowwise() - f.colwise().mean();
  return centered.transpose() * centered / double(f.rows() - 1);
}

/// Frobenius norm of Cov(F(adv)) - Cov(F(clean)) over the batch at `tap` (default penultimate).
template <typename T>
double correlation_loss(const Model<T>& model, const Tensor<T>& clean, const Tensor<T>& adv,
                        std::string tap = {}) {
  if (!(clean.shape() == adv.shape())) throw ShapeError("correlation_loss: batches are not aligned");
  if (clean.shape().n < 2) throw PreconditionError("correlation_loss needs at least 2 samples");
  if (tap.empty()) tap = model.penultimate_tap();
  auto features = [&](const Tensor<T>& x) {
    const auto taps = model.forward(x);
    const Tensor<T>& f = taps.tap(tap);
    const Eigen::Index n = Eigen::Index(f.shape().n), d = Eigen::Index(f.shape().per_sample());
    Eigen::MatrixXd m(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) m(i, j) = double(f[std::size_t(i * d + j)]);
    }
    return m;
  };
  return (feature_covariance(features(adv)) - feature_covariance(features(clean))).norm();
}

struct ObfuscationOptions {
  AttackConfig base;  // PGD-20 / FGSM budget for checks 1 and 2
  std::vector<double> epsilons{8, 16, 32, 64, 128};
  std::vector<int> iterations{1, 2, 5, 10, 20};
  double largest_budget_max_accuracy = 5.0;
  std::size_t batch_size = 100;
};

/// The three sanity checks against gradient masking, plus accuracy-vs-budget and
/// accuracy-vs-iterations curves. `source` crafts the black-box adversaries.
template <typename T>
ObfuscationReport obfuscation_report(const Model<T>& model, const Model<T>& source, const ImageBatch<T>& data,
                                     const ObfuscationOptions& opt = {}) {
  ObfuscationReport rep;
  AttackConfig pgd20 = opt.base;
  pgd20.iterations = 20;
  pgd20.random_start = true;
  const double white = robust_accuracy(model, data, AttackKind::pgd, pgd20, opt.batch_size).robust_accuracy;
  const double black =
      transfer_attack(source, model, data, AttackKind::pgd, pgd20, opt.batch_size).robust_accuracy;
  const double fgsm_acc = robust_accuracy(model, data, AttackKind::fgsm, opt.base, opt.batch_size).robust_accuracy;

  ObfuscationCheck c1{"black-box-weaker-than-white-box", black >= white, {{"black_box", black}, {"white_box", white}}, ""};
  c1.detail = "transfer PGD-20 accuracy " + std::to_string(black) + " vs white-box " + std::to_string(white);
  ObfuscationCheck c2{"iterative-stronger-than-single-step", white <= fgsm_acc, {{"pgd20", white}, {"fgsm", fgsm_acc}}, ""};
  c2.detail = "PGD-20 accuracy " + std::to_string(white) + " vs FGSM " + std::to_string(fgsm_acc);

  Sweep eps_sweep{"accuracy-vs-epsilon", "epsilon (raw)", "robust accuracy (%)", {}, {}};
  bool monotone = true;
  for (double e : opt.epsilons) {
    AttackConfig c = pgd20;
    c.epsilon = e;
    c.step_size = e / 4.0;
    const double acc = robust_accuracy(model, data, AttackKind::pgd, c, opt.batch_size).robust_accuracy;
    if (!eps_sweep.y.empty() && acc > eps_sweep.y.back()) monotone = false;
    eps_sweep.x.push_back(e);
    eps_sweep.y.push_back(acc);
  }
  const double last = eps_sweep.y.empty() ? 100.0 : eps_sweep.y.back();
  ObfuscationCheck c3{"accuracy-vanishes-with-budget", monotone && last <= opt.largest_budget_max_accuracy,
                      {{"largest_epsilon", opt.epsilons.empty() ? 0.0 : opt.epsilons.back()},
                       {"accuracy_at_largest", last},
                       {"monotone", monotone ? 1.0 : 0.0}},
                      ""};
  c3.detail = std::string(monotone ? "non-increasing" : "not monotone") + ", " + std::to_string(last) +
              "% at the largest budget";

  Sweep it_sweep{"accuracy-vs-iterations", "PGD iterations", "robust accuracy (%)", {}, {}};
  for (int k : opt.iterations) {
    AttackConfig c = pgd20;
    c.iterations = k;
    it_sweep.x.push_back(k);
    it_sweep.y.push_back(robust_accuracy(model, data, AttackKind::pgd, c, opt.batch_size).robust_accuracy);
  }
  rep.checks = {c1, c2, c3};
  rep.sweeps = {eps_sweep, it_sweep};
  return rep;
}

/// Accuracy for every (corruption, severity), per-corruption means, their mean and population variance.
template <typename T>
CorruptionResult corruption_sweep(const Model<T>& model, const ImageBatch<T>& data, const CorruptionTable& table,
                                  const std::vector<std::string>& names, const std::vector<int>& severities,
                                  std::uint64_t seed, std::size_t batch_size = 250) {
  detail::require_eval(model, data);
  if (names.empty() || severities.empty()) throw ConfigError("corruption sweep needs names and severities");
  for (const auto& n : names) {
    for (int s : severities) (void)table.spec(n, s);
  }
  CorruptionResult out;
  out.table_version = table.version;
  out.severities = severities;
  out.samples = data.size();
  out.clean_accuracy = clean_accuracy(model, data, batch_size);
  for (const auto& n : names) {
    auto& row = out.accuracy[n];
    for (int s : severities) {
      std::size_t correct = 0, index = 0;
      for (std::size_t b0 = 0; b0 < data.size(); b0 += batch_size, ++index) {
        const auto b = detail::slice(data, b0, std::min(data.size(), b0 + batch_size));
        const auto c = corrupt(b, table.spec(n, s), detail::batch_seed(seed + std::uint64_t(s), index));
        correct += detail::count_correct(model, c.pixels, c.labels);
      }
      row.push_back(100.0 * double(correct) / double(data.size()));
    }
    double m = 0.0;
    for (double a : row) m += a;
    out.mean[n] = m / double(row.size());
  }
  for (const auto& [n, m] : out.mean) out.overall_mean += m / double(out.mean.size());
  for (const auto& [n, m] : out.mean) out.variance += (m - out.overall_mean) * (m - out.overall_mean) / double(out.mean.size());
  return out;
}

}  // namespace satlab
