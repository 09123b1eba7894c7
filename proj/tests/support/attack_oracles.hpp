#pragma once

#include "satlab/attacks.hpp"
#include "support/oracles.hpp"

namespace oracle {

struct CornerTrial {
  bool reached = false;
  double gap = 0.0;  // l-inf distance between the attack output and the optimal corner
};

/// One random 2-d, 2-class linear instance. The brute-force optimum is the clipped ball corner
/// with the largest true-label cross-entropy; for CW with a large kappa the margin objective is
/// minimized at the same corner.
inline CornerTrial linear_corner_trial(satlab::AttackKind kind, satlab::Rng& rng, std::uint64_t seed) {
  std::vector<double> w(4), b(2), x(2);
  for (auto& v : w) v = satlab::uniform(rng, -2.0, 2.0);
  for (auto& v : b) v = satlab::uniform(rng, -1.0, 1.0);
  for (auto& v : x) v = satlab::uniform(rng, -1.0, 1.0);
  const int y = int(satlab::uniform_index(rng, 2));
  const auto model = linear_model(2, 2, w, b);

  satlab::AttackConfig cfg;
  cfg.epsilon = satlab::uniform(rng, 1.0, 16.0);
  cfg.step_size = 2.0;
  cfg.iterations = 20;
  cfg.random_start = true;
  cfg.kappa = 1e6;
  cfg.seed = seed;

  satlab::ImageBatch<double> batch{Tensor<double>(Shape{1, 2, 1, 1}, x), {y}};
  const auto adv = satlab::run_attack(kind, model, batch, cfg);

  const double eps = cfg.epsilon * 2.0 / 255.0;
  double best = -INFINITY;
  std::vector<double> corner;
  for (const auto& c : clipped_corners(x, eps)) {
    const double loss = cross_entropy(affine(w, b, c), y);
    if (loss > best) {
      best = loss;
      corner = c;
    }
  }
  CornerTrial t;
  for (std::size_t i = 0; i < 2; ++i) t.gap = std::max(t.gap, std::abs(adv.pixels[i] - corner[i]));
  t.reached = t.gap <= 1e-9;
  return t;
}

}  // namespace oracle
