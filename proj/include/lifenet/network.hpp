#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lifenet/autograd.hpp"
#include "lifenet/board.hpp"
#include "lifenet/errors.hpp"
#include "lifenet/ops.hpp"
#include "lifenet/rng.hpp"
#include "lifenet/tensor.hpp"

namespace lifenet {

/// LifeNet(n, m): n blocks of [3x3 conv, 2m filters, ReLU] -> [1x1 conv, m filters, ReLU],
/// followed by one 1x1 conv with a single sigmoid output.
struct NetworkSpec {
  int n_steps = 1;
  int overcompleteness = 1;
  std::size_t board_height = 32;
  std::size_t board_width = 32;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

enum class LayerKind { conv3x3, conv1x1 };

inline const char* to_string(LayerKind k) { return k == LayerKind::conv3x3 ? "conv3x3" : "conv1x1"; }
inline const char* to_string(ops::Activation a) { return a == ops::Activation::relu ? "relu" : "sigmoid"; }

template <typename T>
struct Layer {
  std::string name;
  LayerKind kind;
  ops::Activation activation;
  Tensor<T> kernel;  // [filters, in_channels, k, k]
  Tensor<T> bias;    // [filters]

  std::size_t filters() const { return kernel.dim(0); }
  std::size_t in_channels() const { return kernel.dim(1); }

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Closed-form parameter count (biases included).
constexpr std::size_t expected_parameter_count(int n, int m) {
  const auto N = static_cast<std::size_t>(n), M = static_cast<std::size_t>(m);
  const std::size_t first = 2 * M * (9 * 1 + 1) + M * (2 * M + 1);
  const std::size_t later = 2 * M * (9 * M + 1) + M * (2 * M + 1);
  return first + (N - 1) * later + (M + 1);
}

template <typename T>
class Network {
 public:
  Network() = default;
  Network(NetworkSpec spec, std::vector<Layer<T>> layers) : spec_(spec), layers_(std::move(layers)) {}

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<Layer<T>>& layers() const { return layers_; }
  std::vector<Layer<T>>& layers() { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.kernel.size() + l.bias.size();
    return n;
  }

  /// Parameter tensors in canonical order: for each layer, kernel then bias.
  std::vector<Tensor<T>*> parameter_tensors() {
    std::vector<Tensor<T>*> out;
    for (auto& l : layers_) {
      out.push_back(&l.kernel);
      out.push_back(&l.bias);
    }
    return out;
  }
  std::vector<const Tensor<T>*> parameter_tensors() const {
    std::vector<const Tensor<T>*> out;
    for (const auto& l : layers_) {
      out.push_back(&l.kernel);
      out.push_back(&l.bias);
    }
    return out;
  }

  /// All parameters flattened in canonical order.
  std::vector<T> flat_parameters() const {
    std::vector<T> out;
    out.reserve(parameter_count());
    for (const auto* t : parameter_tensors()) out.insert(out.end(), t->data().begin(), t->data().end());
    return out;
  }

  void set_flat_parameters(std::span<const T> values) {
    if (values.size() != parameter_count())
      throw InvalidShape("set_flat_parameters: expected " + std::to_string(parameter_count()) + " values, got " +
                         std::to_string(values.size()));
    std::size_t off = 0;
    for (auto* t : parameter_tensors()) {
      std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(off), t->size(), t->data().begin());
      off += t->size();
    }
  }

  template <typename U>
  Network<U> cast() const {
    std::vector<Layer<U>> layers;
    for (const auto& l : layers_)
      layers.push_back(Layer<U>{l.name, l.kind, l.activation, l.kernel.template cast<U>(), l.bias.template cast<U>()});
    return Network<U>(spec_, std::move(layers));
  }

  friend bool operator==(const Network&, const Network&) = default;

 private:
  NetworkSpec spec_;
  std::vector<Layer<T>> layers_;
};

/// Layer stack with all parameters zero.
template <typename T = float>
Network<T> build_network(const NetworkSpec& spec) {
  if (spec.n_steps < 1) throw InvalidArgument("build_network: n_steps must be >= 1");
  if (spec.overcompleteness < 1) throw InvalidArgument("build_network: overcompleteness must be >= 1");
  if (spec.board_height < 1 || spec.board_width < 1) throw InvalidArgument("build_network: empty board size");
  const auto m = static_cast<std::size_t>(spec.overcompleteness);
  std::vector<Layer<T>> layers;
  std::size_t in = 1;
  for (int block = 1; block <= spec.n_steps; ++block) {
    const std::string prefix = "block" + std::to_string(block) + ".";
    layers.push_back(Layer<T>{prefix + "conv3x3", LayerKind::conv3x3, ops::Activation::relu,
                              Tensor<T>(Shape{2 * m, in, 3, 3}), Tensor<T>(Shape{2 * m})});
    layers.push_back(Layer<T>{prefix + "conv1x1", LayerKind::conv1x1, ops::Activation::relu,
                              Tensor<T>(Shape{m, 2 * m, 1, 1}), Tensor<T>(Shape{m})});
    in = m;
  }
  layers.push_back(Layer<T>{"decode", LayerKind::conv1x1, ops::Activation::sigmoid, Tensor<T>(Shape{1, m, 1, 1}),
                            Tensor<T>(Shape{1})});
  return Network<T>(spec, std::move(layers));
}

/// Every kernel and bias entry drawn i.i.d. from N(0, 1).
template <typename T>
Network<T> init_unit_normal(Network<T> network, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto* t : network.parameter_tensors())
    for (auto& v : t->data()) v = static_cast<T>(normal(rng));
  return network;
}

/// Decode-layer gain: the last layer computes sigmoid(2s * x - s).
inline constexpr double kHandDecodeGain = 20.0;

/// Exact hand-built solution of n-step Life on LifeNet(n, 1).
///
/// Each block counts neighbours with two 3x3 filters,
///   a = relu(neighbours + 0.1 * centre - 3),  b = relu(neighbours + centre - 2),
/// and combines them as relu(-10 a + b), which is 1 exactly when the cell lives
/// and 0 otherwise, so blocks chain without an intermediate decode.
template <typename T = float>
Network<T> hand_engineered_weights(int n, std::size_t board_height = 32, std::size_t board_width = 32) {
  auto net = build_network<T>(NetworkSpec{n, 1, board_height, board_width});
  auto& layers = net.layers();
  for (int block = 0; block < n; ++block) {
    auto& count = layers[2 * block];
    count.kernel.fill(T{1});
    count.kernel[4] = static_cast<T>(0.1);  // centre of filter 0
    count.bias[0] = T{-3};
    count.bias[1] = T{-2};
    auto& combine = layers[2 * block + 1];
    combine.kernel[0] = T{-10};
    combine.kernel[1] = T{1};
    combine.bias[0] = T{0};
  }
  auto& decode = layers.back();
  decode.kernel[0] = static_cast<T>(2 * kHandDecodeGain);
  decode.bias[0] = static_cast<T>(-kHandDecodeGain);
  return net;
}

/// Encodes boards as a [batch, 1, H, W] tensor of 0/1.
template <typename T = float>
Tensor<T> boards_to_tensor(std::span<const Board> boards) {
  if (boards.empty()) throw InvalidArgument("boards_to_tensor: no boards");
  const std::size_t h = boards[0].height(), w = boards[0].width();
  Tensor<T> t(Shape{boards.size(), 1, h, w});
  for (std::size_t b = 0; b < boards.size(); ++b) {
    if (boards[b].height() != h || boards[b].width() != w)
      throw InvalidShape("boards_to_tensor: boards have different sizes");
    const auto& cells = boards[b].cells();
    for (std::size_t i = 0; i < cells.size(); ++i) t[b * h * w + i] = static_cast<T>(cells[i]);
  }
  return t;
}

/// Thresholds plane `index` of a [batch, 1, H, W] probability tensor at 0.5.
template <typename T>
Board threshold_board(const Tensor<T>& probabilities, std::size_t index) {
  const std::size_t h = probabilities.dim(2), w = probabilities.dim(3);
  std::vector<std::uint8_t> cells(h * w);
  for (std::size_t i = 0; i < h * w; ++i) cells[i] = probabilities[index * h * w + i] > T(0.5) ? 1 : 0;
  return Board(h, w, std::move(cells));
}

namespace detail {
template <typename T>
void check_board_input(const Network<T>& net, const Tensor<T>& boards) {
  if (boards.rank() != 4 || boards.dim(1) != 1)
    throw InvalidShape("forward: expected boards shaped [batch, 1, H, W], got " + shape_string(boards.shape()));
  if (net.layers().empty()) throw InvalidArgument("forward: network has no layers");
}
}  // namespace detail

/// Pre-sigmoid output of the decode layer, [batch, 1, H, W].
/// The network is fully convolutional, so any board size is accepted.
template <typename T>
Tensor<T> forward_logits(const Network<T>& net, const Tensor<T>& boards) {
  detail::check_board_input(net, boards);
  const auto& layers = net.layers();
  Tensor<T> x = ops::conv2d(boards, layers[0].kernel, layers[0].bias);
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    x = ops::activation(layers[i].activation, std::move(x));
    x = ops::conv2d(x, layers[i + 1].kernel, layers[i + 1].bias);
  }
  return x;
}

/// Alive probabilities for each cell, [batch, 1, H, W].
template <typename T>
Tensor<T> forward_batch(const Network<T>& net, const Tensor<T>& boards) {
  return ops::activation(net.layers().back().activation, forward_logits(net, boards));
}

/// Result of recording a forward pass on a tape.
struct RecordedForward {
  std::vector<Var> parameters;  // canonical order, matching parameter_tensors()
  Var logits;
  std::vector<Var> pre_activations;  // outputs of each hidden conv, before ReLU
};

/// Records the forward pass (up to the decode logits) on `tape`.
template <typename T>
RecordedForward record_forward(Tape<T>& tape, const Network<T>& net, Var boards) {
  detail::check_board_input(net, tape.value(boards));
  RecordedForward rec{};
  for (const auto* p : net.parameter_tensors()) rec.parameters.push_back(tape.parameter(*p));
  Var x = boards;
  const auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = tape.conv2d(x, rec.parameters[2 * i], rec.parameters[2 * i + 1]);
    if (i + 1 < layers.size()) {
      rec.pre_activations.push_back(x);
      x = tape.activation(layers[i].activation, x);
    }
  }
  rec.logits = x;
  return rec;
}

/// Flips the sign of k distinct parameters chosen uniformly without replacement.
template <typename T>
Network<T> k_sign_perturb(Network<T> net, std::size_t k, std::uint64_t seed) {
  auto flat = net.flat_parameters();
  if (k > flat.size())
    throw InvalidArgument("k_sign_perturb: k = " + std::to_string(k) + " exceeds parameter count " +
                          std::to_string(flat.size()));
  std::vector<std::size_t> idx(flat.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  // Partial Fisher-Yates: the first k slots end up as a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
    flat[idx[i]] = -flat[idx[i]];
  }
  net.set_flat_parameters(flat);
  return net;
}

/// Adds an independent U[-r, r] offset to every parameter.
template <typename T>
Network<T> uniform_perturb(Network<T> net, double r, std::uint64_t seed) {
  if (!(r > 0)) throw InvalidArgument("uniform_perturb: r must be > 0");
  Rng rng(seed);
  std::uniform_real_distribution<double> offset(-r, r);
  for (auto* t : net.parameter_tensors())
    for (auto& v : t->data()) v = static_cast<T>(static_cast<double>(v) + offset(rng));
  return net;
}

}  // namespace lifenet
