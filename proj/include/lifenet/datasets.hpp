#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lifenet/board.hpp"
#include "lifenet/errors.hpp"
#include "lifenet/network.hpp"
#include "lifenet/rng.hpp"
#include "lifenet/tensor.hpp"

namespace lifenet {

enum class DensityMode { uniform_density, fixed_density };

/// Board distribution. In uniform mode each board draws its own d ~ U[0, 1].
struct DensitySpec {
  DensityMode mode = DensityMode::uniform_density;
  double d = 0.5;  // fixed mode only
  std::size_t board_height = 32;
  std::size_t board_width = 32;

  static DensitySpec uniform(std::size_t h = 32, std::size_t w = 32) {
    return {DensityMode::uniform_density, 0.5, h, w};
  }
  static DensitySpec fixed(double d, std::size_t h = 32, std::size_t w = 32) {
    return {DensityMode::fixed_density, d, h, w};
  }

  void validate() const {
    if (mode == DensityMode::fixed_density && !(d >= 0.0 && d <= 1.0))
      throw InvalidArgument("DensitySpec: d must lie in [0, 1], got " + std::to_string(d));
    if (board_height == 0 || board_width == 0) throw InvalidArgument("DensitySpec: empty board size");
  }
};

inline Board sample_board(const DensitySpec& spec, Rng& rng) {
  spec.validate();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double d = spec.mode == DensityMode::uniform_density ? unit(rng) : spec.d;
  std::vector<std::uint8_t> cells(spec.board_height * spec.board_width);
  for (auto& c : cells) c = unit(rng) < d ? 1 : 0;
  return Board(spec.board_height, spec.board_width, std::move(cells));
}

template <typename T = float>
struct Batch {
  Tensor<T> inputs;   // [batch, 1, H, W]
  Tensor<T> targets;  // step_n of each input
};

/// Sampled boards and their n-step successors computed by the Life engine.
template <typename T = float>
Batch<T> sample_training_batch(const DensitySpec& spec, std::size_t n_steps, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw InvalidArgument("sample_training_batch: batch_size must be >= 1");
  std::vector<Board> inputs, targets;
  inputs.reserve(batch_size);
  targets.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    inputs.push_back(sample_board(spec, rng));
    targets.push_back(step_n(inputs.back(), n_steps));
  }
  return {boards_to_tensor<T>(inputs), boards_to_tensor<T>(targets)};
}

namespace detail {

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Neighbour counts along one axis: how many of {i-1, i, i+1} lie inside [0, len).
inline std::vector<std::pair<int, std::size_t>> axis_classes(std::size_t len) {
  std::vector<std::pair<int, std::size_t>> out;  // (span, number of positions)
  if (len == 1) return {{1, 1}};
  out.push_back({2, 2});
  if (len > 2) out.push_back({3, len - 2});
  return out;
}

}  // namespace detail

/// Probability that a cell with k neighbours is alive after one step on a d-density board.
inline double alive_prob_for_neighbors(int k, double d) {
  using detail::binomial;
  double p = 0;
  if (k >= 3) p += binomial(k, 3) * std::pow(d, 3) * std::pow(1 - d, k - 3);
  if (k >= 2) p += d * binomial(k, 2) * std::pow(d, 2) * std::pow(1 - d, k - 2);
  return p;
}

/// Exact expected fraction of alive cells after one step of a d-density board,
/// averaging over interior, edge and corner cells.
inline double alive_prob_curve(double d, std::size_t height = 32, std::size_t width = 32) {
  if (!(d >= 0.0 && d <= 1.0)) throw InvalidArgument("alive_prob_curve: d must lie in [0, 1], got " + std::to_string(d));
  if (height == 0 || width == 0) throw InvalidArgument("alive_prob_curve: empty board");
  double total = 0;
  for (auto [ry, ny] : detail::axis_classes(height))
    for (auto [rx, nx] : detail::axis_classes(width))
      total += static_cast<double>(ny * nx) * alive_prob_for_neighbors(ry * rx - 1, d);
  return total / static_cast<double>(height * width);
}

/// argmax of alive_prob_curve on [0, 1]: coarse grid, then golden-section refinement.
inline double optimal_density(std::size_t height = 32, std::size_t width = 32) {
  constexpr int kGrid = 1000;
  int best = 0;
  double best_val = -1;
  for (int i = 0; i <= kGrid; ++i) {
    const double v = alive_prob_curve(static_cast<double>(i) / kGrid, height, width);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  double lo = std::max(0, best - 1) / double(kGrid), hi = std::min(kGrid, best + 1) / double(kGrid);
  const double inv_phi = (std::sqrt(5.0) - 1) / 2;
  double a = hi - inv_phi * (hi - lo), b = lo + inv_phi * (hi - lo);
  double fa = alive_prob_curve(a, height, width), fb = alive_prob_curve(b, height, width);
  while (hi - lo > 1e-10) {
    if (fa < fb) {
      lo = a;
      a = b;
      fa = fb;
      b = lo + inv_phi * (hi - lo);
      fb = alive_prob_curve(b, height, width);
    } else {
      hi = b;
      b = a;
      fb = fa;
      a = hi - inv_phi * (hi - lo);
      fa = alive_prob_curve(a, height, width);
    }
  }
  return (lo + hi) / 2;
}

/// Large-board limit of optimal_density: the root of 3/d - 5/(1-d) - 1/(3-d) = 0.
inline double interior_optimal_density() {
  auto f = [](double d) { return 3 / d - 5 / (1 - d) - 1 / (3 - d); };
  double lo = 1e-6, hi = 1 - 1e-6;
  for (int i = 0; i < 200; ++i) {
    const double mid = (lo + hi) / 2;
    (f(mid) > 0 ? lo : hi) = mid;
  }
  return (lo + hi) / 2;
}

}  // namespace lifenet
