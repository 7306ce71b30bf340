#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <type_traits>
#include <vector>

#include "lifenet/autograd.hpp"
#include "lifenet/network.hpp"

namespace lifenet {

struct GradCheckOptions {
  double step = 1e-5;  // h_i = step * max(1, |theta_i|)
  // Gradients smaller than this are compared on an absolute scale:
  // rel = |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-4;
  // Combine central differences at h and h/2 (Richardson) to cancel the h^2 term.
  bool richardson = true;
};

struct GradCheckReport {
  bool passed = false;
  double max_relative_error = 0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  std::size_t skipped_kink = 0;  // coordinates whose stencil crossed a ReLU kink
  double min_kink_distance = std::numeric_limits<double>::infinity();
  std::vector<double> analytic;
  std::vector<double> numeric;
};

inline double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Compares `analytic` against central differences of `loss` around `point`.
/// `skip(i, plus, minus)` may veto a coordinate after seeing its stencil points.
template <typename Loss, typename Skip>
GradCheckReport finite_diff_check(Loss&& loss, std::span<const double> point, std::span<const double> analytic,
                                  double tolerance, const GradCheckOptions& opt, Skip&& skip) {
  GradCheckReport r;
  r.analytic.assign(analytic.begin(), analytic.end());
  r.numeric.assign(point.size(), 0.0);
  std::vector<double> x(point.begin(), point.end());
  // Differences are taken in the loss's own type, which may be wider than double.
  using R = std::common_type_t<double, decltype(loss(std::span<const double>(x)))>;
  auto central = [&](std::size_t i, double h) {
    x[i] = point[i] + h;
    const R up = loss(std::span<const double>(x));
    const R step_up = static_cast<R>(x[i]) - static_cast<R>(point[i]);
    x[i] = point[i] - h;
    const R down = loss(std::span<const double>(x));
    const R step_down = static_cast<R>(point[i]) - static_cast<R>(x[i]);
    x[i] = point[i];
    return static_cast<double>((up - down) / (step_up + step_down));
  };
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double h = opt.step * std::max(1.0, std::abs(point[i]));
    std::vector<double> plus(x), minus(x);
    plus[i] += h;
    minus[i] -= h;
    if (skip(i, std::span<const double>(plus), std::span<const double>(minus))) {
      ++r.skipped_kink;
      continue;
    }
    double d = central(i, h);
    if (opt.richardson) d = (4 * central(i, h / 2) - d) / 3;
    r.numeric[i] = d;
    const double err = relative_error(analytic[i], d, opt.floor);
    if (r.checked == 0 || err > r.max_relative_error) {
      r.max_relative_error = err;
      r.worst_index = i;
    }
    ++r.checked;
  }
  r.passed = r.checked > 0 && r.max_relative_error < tolerance;
  return r;
}

template <typename Loss>
GradCheckReport finite_diff_check(Loss&& loss, std::span<const double> point, std::span<const double> analytic,
                                  double tolerance, const GradCheckOptions& opt = {}) {
  return finite_diff_check(std::forward<Loss>(loss), point, analytic, tolerance, opt,
                           [](std::size_t, auto, auto) { return false; });
}

namespace detail {

/// Signs of every hidden (ReLU) pre-activation, plus the smallest |pre-activation|.
inline std::pair<std::vector<bool>, double> relu_pattern(const Network<double>& net, const Tensor<double>& boards) {
  std::vector<bool> pattern;
  double closest = std::numeric_limits<double>::infinity();
  const auto& layers = net.layers();
  Tensor<double> x = boards;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    x = ops::conv2d(x, layers[i].kernel, layers[i].bias);
    for (double v : x.data()) {
      pattern.push_back(v > 0);
      closest = std::min(closest, std::abs(v));
    }
    x = ops::activation(layers[i].activation, std::move(x));
  }
  return {std::move(pattern), closest};
}

}  // namespace detail

/// Gradient check of the mean BCE (on logits) of a whole network, double precision.
/// Coordinates whose finite-difference stencil flips any ReLU are skipped and counted;
/// `min_kink_distance` reports how close the base point is to a kink.
inline GradCheckReport finite_diff_check(const Network<double>& net, const Tensor<double>& boards,
                                         const Tensor<double>& targets, double tolerance,
                                         const GradCheckOptions& opt = {}) {
  Tape<double> tape;
  auto in = tape.constant(boards);
  auto rec = record_forward(tape, net, in);
  auto loss = tape.bce_with_logits(rec.logits, tape.constant(targets));
  tape.backward(loss);
  std::vector<double> analytic;
  for (auto p : rec.parameters) {
    const auto& g = tape.grad(p);
    analytic.insert(analytic.end(), g.data().begin(), g.data().end());
  }

  // The reference loss is evaluated in extended precision: double rounding noise in a
  // mean over thousands of cells, divided by h, would swamp gradients near 1e-4.
  auto wide = net.template cast<long double>();
  const auto wide_boards = boards.template cast<long double>();
  const auto wide_targets = targets.template cast<long double>();
  std::vector<long double> wide_params(net.parameter_count());
  auto eval = [&](std::span<const double> params) {
    std::copy(params.begin(), params.end(), wide_params.begin());
    wide.set_flat_parameters(wide_params);
    return ops::bce_with_logits(forward_logits(wide, wide_boards), wide_targets);
  };
  Network<double> probe = net;
  auto [base_pattern, closest] = detail::relu_pattern(net, boards);
  auto crosses = [&, base = std::move(base_pattern)](std::size_t, std::span<const double> plus,
                                                     std::span<const double> minus) {
    for (auto pts : {plus, minus}) {
      probe.set_flat_parameters(pts);
      if (detail::relu_pattern(probe, boards).first != base) return true;
    }
    return false;
  };
  const auto point = net.flat_parameters();
  auto report = finite_diff_check(eval, std::span<const double>(point), std::span<const double>(analytic), tolerance,
                                  opt, crosses);
  report.min_kink_distance = closest;
  return report;
}

}  // namespace lifenet
