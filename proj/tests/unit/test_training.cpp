#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "satlab/architectures.hpp"
#include "satlab/training.hpp"
#include "support/oracles.hpp"

using namespace satlab;
namespace fs = std::filesystem;

namespace {

Dataset blobs(std::size_t per_class, int classes, std::uint64_t seed) {
  Dataset d = make_toy_dataset(ToyKind::blobs, per_class, classes, seed);
  d.normalize();
  return d;
}

TrainConfig quick_config(TrainMode mode, int epochs = 3) {
  TrainConfig c;
  c.mode = mode;
  c.epochs = epochs;
  c.batch_size = 16;
  c.lr.initial = 0.05;
  c.lr.decay_epochs = {2};
  c.seed = 5;
  c.pgd_iterations = 2;
  return c;
}

TripletBatch<double> random_triplet(const Model<double>& m, std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed, 3);
  TripletBatch<double> t;
  t.clean.pixels = Tensor<double>(m.input_shape(n));
  for (auto& v : t.clean.pixels.storage()) v = uniform(rng, -1, 1);
  t.adversarial = t.clean.pixels;
  for (auto& v : t.adversarial.storage()) v = std::clamp(v + uniform(rng, -0.05, 0.05), -1.0, 1.0);
  t.target = Tensor<double>(m.input_shape(n));
  for (auto& v : t.target.storage()) v = uniform(rng, -1, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = int(uniform_index(rng, m.num_classes()));
    t.clean.labels.push_back(y);
    t.target_labels.push_back((y + 1 + int(uniform_index(rng, m.num_classes() - 1))) % m.num_classes());
  }
  return t;
}

bool same_params(Model<float>& a, Model<float>& b) {
  const auto pa = a.params(), pb = b.params();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!(*pa[i] == *pb[i])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("learning-rate schedule counts decays at 0-based epochs") {
  LrSchedule s;
  s.initial = 0.1;
  s.decay_epochs = {50, 95};
  s.factor = 0.1;
  CHECK(s.at(0) == 0.1);
  CHECK(s.at(49) == 0.1);
  CHECK(s.at(50) == doctest::Approx(0.01));
  CHECK(s.at(94) == doctest::Approx(0.01));
  CHECK(s.at(95) == doctest::Approx(0.001));
  CHECK(s.at(199) == doctest::Approx(0.001));
  s.decay_epochs = {5, 5};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.factor = 1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  TrainConfig c;
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.weights.w1 = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_mode("pgd-at") == TrainMode::pgd_at);
  CHECK_THROWS_AS(parse_mode("trades"), ConfigError);
}

TEST_CASE("sgd matches the closed-form momentum update") {
  Tensor<double> w(Shape{1, 2, 1, 1}, std::vector<double>{1.0, -2.0});
  Sgd<double> opt(0.9, 0.01);
  const std::vector<Tensor<double>> g{Tensor<double>(Shape{1, 2, 1, 1}, std::vector<double>{0.5, 0.25})};
  opt.step({&w}, g, 0.1);
  // v1 = g + wd * w0
  const double v1a = 0.5 + 0.01 * 1.0, v1b = 0.25 + 0.01 * -2.0;
  CHECK(w[0] == doctest::Approx(1.0 - 0.1 * v1a));
  CHECK(w[1] == doctest::Approx(-2.0 - 0.1 * v1b));
  const double w1a = w[0];
  opt.step({&w}, g, 0.1);
  const double v2a = 0.9 * v1a + 0.5 + 0.01 * w1a;
  CHECK(w[0] == doctest::Approx(w1a - 0.1 * v2a));
}

TEST_CASE("target sampling") {
  std::vector<int> pool;
  for (int k = 0; k < 5; ++k) pool.insert(pool.end(), 40, k);
  Rng rng = make_rng(3);
  std::vector<int> sources(5000);
  for (std::size_t i = 0; i < sources.size(); ++i) sources[i] = int(i % 5);
  const auto draw = sample_targets(sources, pool, rng);
  std::vector<double> freq(5, 0.0);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    REQUIRE(draw.labels[i] != sources[i]);
    REQUIRE(pool[draw.indices[i]] == draw.labels[i]);
    freq[std::size_t(draw.labels[i])] += 1;
  }
  // Each class is a target for 4/5 of the sources, uniformly over the other 4 classes.
  const double n = double(sources.size()), p = 0.2;
  for (double f : freq) CHECK(std::abs(f - n * p) <= 3.0 * std::sqrt(n * p * (1 - p)));

  // A batch of a single class still draws from the whole pool.
  const auto same = sample_targets(std::vector<int>(64, 2), pool, rng);
  for (int y : same.labels) CHECK(y != 2);

  CHECK_THROWS_AS(sample_targets({0}, std::vector<int>(10, 0), rng), PreconditionError);
  CHECK_THROWS_AS(sample_targets({0}, std::vector<int>{}, rng), PreconditionError);
}

TEST_CASE("gaussian transform") {
  ImageBatch<double> grey{Tensor<double>(Shape{40, 1, 16, 16}, 0.0), std::vector<int>(40, 0)};
  Rng rng = make_rng(9);
  const auto wide = gaussian_transform(grey, 0.1, 255.0, rng);
  double s2 = 0.0;
  for (double v : wide.pixels.storage()) s2 += v * v;
  CHECK(std::abs(std::sqrt(s2 / double(wide.pixels.size())) - 0.1) < 0.003);

  const auto tight = gaussian_transform(grey, 0.1, 2.0, rng);
  for (double v : tight.pixels.storage()) REQUIRE(std::abs(v) <= to_normalized(2.0) + 1e-15);

  ImageBatch<double> edge{Tensor<double>(Shape{4, 1, 4, 4}, 1.0), std::vector<int>(4, 0)};
  const auto noisy_edge = gaussian_transform(edge, 0.5, 255.0, rng);
  for (double v : noisy_edge.pixels.storage()) REQUIRE(v <= 1.0);
  CHECK(gaussian_transform(edge, 0.0, 8.0, rng).pixels == edge.pixels);
  CHECK_THROWS_AS(gaussian_transform(edge, -1.0, 8.0, rng), ConfigError);
}

TEST_CASE("training loss gradients agree with finite differences") {
  auto m = build_model<double>({"tiny-cnn", 2, 4, 4, 3, {2, 3, 4}}, 4);
  const auto t = random_triplet(m, 3, 11);
  TrainConfig cfg;
  cfg.weights.w1 = 0.7;
  cfg.weights.w2 = 1.3;
  cfg.weights.margin = 10.0;
  cfg.weights.smoothing = 0.1;
  for (double p : {2.0, 1.5}) {
    CAPTURE(p);
    cfg.weights.p = p;
    for (const auto& sel : {TapSelection::penultimate(), TapSelection::all_taps()}) {
      cfg.margin_taps = sel;
      auto grads = m.zero_grads();
      const StepLoss loss = sat_loss(m, t, cfg, &grads);
      CHECK(loss.total == doctest::Approx(0.7 * loss.margin + 1.3 * loss.ce));
      CHECK(loss.margin > 0.0);
      auto params = m.params();
      for (std::size_t k = 0; k < params.size(); ++k) {
        CAPTURE(m.param_names()[k]);
        auto f = [&](const std::vector<double>& v) {
          const auto keep = *params[k];
          *params[k] = Tensor<double>(keep.shape(), v);
          const double l = sat_loss<double>(m, t, cfg, nullptr).total;
          *params[k] = keep;
          return l;
        };
        CHECK(oracle::max_rel_error(grads[k].storage(), oracle::fd_gradient(f, params[k]->storage())) < 1e-4);
      }
    }
  }
}

TEST_CASE("margin term off reduces the step to cross-entropy on the transformed batch") {
  auto a = build_model<double>({"tiny-cnn", 2, 4, 4, 3, {2, 3, 4}}, 2);
  auto b = a;
  const auto t = random_triplet(a, 4, 5);
  TrainConfig cfg;
  cfg.weights.w1 = 0.0;
  cfg.weights.smoothing = 0.2;
  cfg.epsilon = 255.0;
  Sgd<double> oa(cfg.momentum, cfg.weight_decay), ob(cfg.momentum, cfg.weight_decay);
  for (int step = 0; step < 3; ++step) {
    sat_step(a, oa, t, cfg, 0.05);
    const auto pass = b.forward_pass(t.adversarial);
    TapGrads<double> g = pass.taps.empty_grads();
    boundary_loss(pass.taps.logits, t.clean.labels, 0.2, &g.logits, cfg.weights.w2);
    auto grads = b.zero_grads();
    b.backward(pass, g, &grads);
    ob.step(b.params(), grads, 0.05);
  }
  for (std::size_t k = 0; k < a.params().size(); ++k) CHECK(*a.params()[k] == *b.params()[k]);
}

TEST_CASE("triplet preconditions") {
  auto m = build_model<double>({"linear", 1, 2, 2, 2, {}}, 0);
  auto t = random_triplet(m, 2, 1);
  t.target_labels[1] = t.clean.labels[1];
  CHECK_THROWS_AS(t.validate(8.0), PreconditionError);
  t = random_triplet(m, 2, 1);
  CHECK_THROWS_AS(t.validate(1.0), PreconditionError);
  CHECK_NOTHROW(t.validate(8.0));
  t.target_labels.pop_back();
  CHECK_THROWS_AS(t.validate(8.0), ShapeError);
}

TEST_CASE("natural training separates toy blobs") {
  const Dataset d = blobs(40, 2, 3);
  auto m = build_model<float>({"tiny-cnn", 3, 8, 8, 2, {4, 8, 8}}, 1);
  TrainConfig cfg = quick_config(TrainMode::natural, 5);
  const auto log = train(m, d, cfg);
  REQUIRE(log.size() == 5);
  CHECK(log.back().train_accuracy == 100.0);
  CHECK(log.front().lr == doctest::Approx(0.05));
  CHECK(log.back().lr == doctest::Approx(0.005));
  CHECK(log.back().ce < log.front().ce);
}

TEST_CASE("every mode is deterministic under a fixed seed") {
  const Dataset d = blobs(12, 3, 4);
  for (auto mode : {TrainMode::sat, TrainMode::natural, TrainMode::pgd_at, TrainMode::gaussian}) {
    CAPTURE(mode_name(mode));
    auto a = build_model<float>({"tiny-cnn", 3, 8, 8, 3, {4, 4, 8}}, 2);
    auto b = a;
    const auto cfg = quick_config(mode, 2);
    const auto la = train(a, d, cfg);
    const auto lb = train(b, d, cfg);
    CHECK(same_params(a, b));
    CHECK(la.back().loss == lb.back().loss);
    CHECK(std::isfinite(la.back().loss));
    CHECK(a.parameters_finite());
    if (mode == TrainMode::sat) {
      CHECK(la.back().adv_boundary > 0.0);
      CHECK(la.back().adv_style > 0.0);
    }
  }
}

TEST_CASE("checkpoints, hooks and evaluation logging") {
  const Dataset d = blobs(10, 2, 6);
  const Dataset ev = blobs(5, 2, 6);
  auto m = build_model<float>({"tiny-cnn", 3, 8, 8, 2, {4, 4, 8}}, 3);
  const fs::path dir = fs::temp_directory_path() / "satlab-test-train";
  fs::remove_all(dir);
  fs::create_directories(dir);
  TrainConfig cfg = quick_config(TrainMode::sat, 3);
  cfg.log_pgd_iterations = 2;
  std::vector<int> seen;
  TrainHooks hooks;
  hooks.checkpoint_dir = dir;
  hooks.eval_set = &ev;
  hooks.on_epoch = [&](const EpochRecord& r) { seen.push_back(r.epoch); };
  const auto log = train(m, d, cfg, hooks);
  CHECK(seen == std::vector<int>{1, 2, 3});
  CHECK(fs::exists(dir / "epoch-2.ckpt"));
  CHECK(fs::exists(dir / "final.ckpt"));
  CHECK(log.back().eval_accuracy >= 0.0);
  CHECK(log.back().eval_pgd_accuracy >= 0.0);
  auto loaded = load_checkpoint<float>(dir / "final.ckpt");
  CHECK(same_params(loaded, m));
}

TEST_CASE("training input errors") {
  auto m = build_model<float>({"tiny-cnn", 3, 8, 8, 2, {4, 4, 8}}, 3);
  Dataset one = make_toy_dataset(ToyKind::blobs, 8, 2, 1).select_classes({0}, 8, false);
  one.normalize();
  one.num_classes = 2;
  CHECK_THROWS_AS(train(m, one, quick_config(TrainMode::sat, 1)), PreconditionError);
  CHECK_NOTHROW(train(m, one, quick_config(TrainMode::natural, 1)));

  Dataset raw = make_toy_dataset(ToyKind::blobs, 8, 2, 1);
  CHECK_THROWS_AS(train(m, raw, quick_config(TrainMode::natural, 1)), PreconditionError);
  Dataset three = blobs(4, 3, 1);
  CHECK_THROWS_AS(train(m, three, quick_config(TrainMode::natural, 1)), ConfigError);

  const Dataset d = blobs(8, 2, 1);
  m.params()[0]->storage()[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    train(m, d, quick_config(TrainMode::sat, 1));
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
    CHECK(e.batch_index() == 0);
  }
}
