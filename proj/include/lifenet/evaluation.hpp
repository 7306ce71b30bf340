#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "lifenet/datasets.hpp"
#include "lifenet/network.hpp"

namespace lifenet {

inline constexpr double kSuccessLoss = 0.01;
inline constexpr double kDegeneratePredictedAlive = 0.001;
inline constexpr double kDegenerateTargetAlive = 0.05;

/// Held-out boards and their n-step successors.
struct ValidationSet {
  Tensor<float> inputs;
  Tensor<float> targets;
  std::size_t steps = 1;

  std::size_t size() const { return inputs.dim(0); }
};

inline ValidationSet make_validation_set(const DensitySpec& spec, std::size_t n_steps, std::size_t count,
                                         std::uint64_t seed) {
  if (count == 0) throw InvalidArgument("make_validation_set: validation size must be >= 1");
  Rng rng(seed);
  auto batch = sample_training_batch<float>(spec, n_steps, count, rng);
  return {std::move(batch.inputs), std::move(batch.targets), n_steps};
}

struct SuccessReport {
  bool success = false;
  double loss = 0;      // mean BCE over every validation cell
  double accuracy = 0;  // thresholded per-cell agreement
  bool degenerate_dead = false;
  double predicted_alive = 0;
  double target_alive = 0;
};

/// Success means validation loss below `loss_threshold` and every thresholded cell correct.
/// Degenerate-dead means almost nothing predicted alive while the targets are not sparse.
template <typename T>
SuccessReport evaluate_success(const Network<T>& net, const ValidationSet& vs, double loss_threshold = kSuccessLoss) {
  const std::size_t n = vs.size();
  const std::size_t plane = vs.inputs.dim(2) * vs.inputs.dim(3);
  constexpr std::size_t kChunk = 32;
  double loss_sum = 0;
  std::size_t correct = 0, predicted_alive = 0, target_alive = 0;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t len = std::min(kChunk, n - start);
    const Shape shape{len, 1, vs.inputs.dim(2), vs.inputs.dim(3)};
    std::vector<T> in(vs.inputs.ptr() + start * plane, vs.inputs.ptr() + (start + len) * plane);
    const auto logits = forward_logits(net, Tensor<T>(shape, std::move(in)));
    const float* tgt = vs.targets.ptr() + start * plane;
    for (std::size_t i = 0; i < len * plane; ++i) {
      const double z = static_cast<double>(logits[i]);
      const double t = tgt[i];
      loss_sum += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
      const bool alive = z > 0;
      const bool truth = t > 0.5;
      correct += alive == truth;
      predicted_alive += alive;
      target_alive += truth;
    }
  }
  const double cells = static_cast<double>(n * plane);
  SuccessReport r;
  r.loss = loss_sum / cells;
  r.accuracy = static_cast<double>(correct) / cells;
  r.predicted_alive = static_cast<double>(predicted_alive) / cells;
  r.target_alive = static_cast<double>(target_alive) / cells;
  r.success = r.loss < loss_threshold && correct == n * plane;
  r.degenerate_dead = r.predicted_alive < kDegeneratePredictedAlive && r.target_alive > kDegenerateTargetAlive;
  return r;
}

/// Evaluates on `validation_size` fresh uniform-density boards of the network's board size.
template <typename T>
SuccessReport evaluate_success(const Network<T>& net, std::size_t n_steps, std::size_t validation_size,
                               std::uint64_t seed, double loss_threshold = kSuccessLoss) {
  const auto& s = net.spec();
  const auto vs = make_validation_set(DensitySpec::uniform(s.board_height, s.board_width), n_steps,
                                      validation_size, seed);
  return evaluate_success(net, vs, loss_threshold);
}

}  // namespace lifenet
