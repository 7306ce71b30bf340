#pragma once

// Forward and gradient kernels shared by the tape and the inference path.
// All reductions run in a fixed order so results are bitwise reproducible.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "lifenet/errors.hpp"
#include "lifenet/tensor.hpp"

namespace lifenet::ops {

inline constexpr double kBceClip = 1e-7;

namespace detail {

// Lane-wise accumulation so the compiler can vectorise without reassociating.
template <typename T>
T sum(const T* a, std::size_t n) {
  constexpr std::size_t L = 16;
  std::array<T, L> acc{};
  std::size_t i = 0;
  for (; i + L <= n; i += L)
    for (std::size_t j = 0; j < L; ++j) acc[j] += a[i + j];
  T total{0};
  for (; i < n; ++i) total += a[i];
  for (std::size_t j = 0; j < L; ++j) total += acc[j];
  return total;
}

struct ConvGeometry {
  std::size_t batch, in_ch, out_ch, height, width, kh, kw, pad_y, pad_x;
  std::size_t padded_h() const { return height + 2 * pad_y; }
  std::size_t padded_w() const { return width + 2 * pad_x; }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias) {
  if (input.rank() != 4) throw InvalidShape("conv2d: input must be [batch, channels, H, W], got " + shape_string(input.shape()));
  if (kernel.rank() != 4) throw InvalidShape("conv2d: kernel must be [out, in, kH, kW], got " + shape_string(kernel.shape()));
  if (kernel.dim(1) != input.dim(1))
    throw InvalidShape("conv2d: kernel expects " + std::to_string(kernel.dim(1)) + " input channels, input has " +
                       std::to_string(input.dim(1)));
  if (kernel.dim(2) % 2 == 0 || kernel.dim(3) % 2 == 0)
    throw InvalidShape("conv2d: kernel spatial size must be odd, got " + shape_string(kernel.shape()));
  if (bias.size() != kernel.dim(0))
    throw InvalidShape("conv2d: bias has " + std::to_string(bias.size()) + " entries for " +
                       std::to_string(kernel.dim(0)) + " filters");
  return {input.dim(0), input.dim(1), kernel.dim(0), input.dim(2), input.dim(3),
          kernel.dim(2), kernel.dim(3), (kernel.dim(2) - 1) / 2, (kernel.dim(3) - 1) / 2};
}

// Zero-padded copy of the input, [batch, channels, H + 2py, W + 2px].
template <typename T>
std::vector<T> pad_input(const Tensor<T>& input, const ConvGeometry& g) {
  const std::size_t hp = g.padded_h(), wp = g.padded_w();
  std::vector<T> padded(g.batch * g.in_ch * hp * wp, T{0});
  for (std::size_t bc = 0; bc < g.batch * g.in_ch; ++bc) {
    const T* src = input.ptr() + bc * g.height * g.width;
    T* dst = padded.data() + bc * hp * wp;
    for (std::size_t y = 0; y < g.height; ++y)
      std::copy_n(src + y * g.width, g.width, dst + (y + g.pad_y) * wp + g.pad_x);
  }
  return padded;
}

}  // namespace detail

/// Stride-1 convolution with "same" zero padding:
/// out[b,o,y,x] = bias[o] + sum_{c,dy,dx} kernel[o,c,dy,dx] * in_padded[b,c,y+dy,x+dx].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias) {
  const auto g = detail::conv_geometry(input, kernel, bias);
  Tensor<T> out(Shape{g.batch, g.out_ch, g.height, g.width});
  const std::size_t plane = g.height * g.width;

  if (g.kh == 1 && g.kw == 1) {
    for (std::size_t b = 0; b < g.batch; ++b) {
      for (std::size_t o = 0; o < g.out_ch; ++o) {
        T* dst = out.ptr() + (b * g.out_ch + o) * plane;
        std::fill_n(dst, plane, bias[o]);
        for (std::size_t c = 0; c < g.in_ch; ++c) {
          const T w = kernel[o * g.in_ch + c];
          const T* src = input.ptr() + (b * g.in_ch + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) dst[i] += w * src[i];
        }
      }
    }
    return out;
  }

  const auto padded = detail::pad_input(input, g);
  const std::size_t hp = g.padded_h(), wp = g.padded_w();
  const std::size_t taps = g.kh * g.kw;
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t o = 0; o < g.out_ch; ++o) {
      T* dst_plane = out.ptr() + (b * g.out_ch + o) * plane;
      std::fill_n(dst_plane, plane, bias[o]);
      for (std::size_t c = 0; c < g.in_ch; ++c) {
        const T* src_plane = padded.data() + (b * g.in_ch + c) * hp * wp;
        const T* k = kernel.ptr() + (o * g.in_ch + c) * taps;
        for (std::size_t y = 0; y < g.height; ++y) {
          T* dst = dst_plane + y * g.width;
          for (std::size_t dy = 0; dy < g.kh; ++dy) {
            const T* row = src_plane + (y + dy) * wp;
            for (std::size_t dx = 0; dx < g.kw; ++dx) {
              const T w = k[dy * g.kw + dx];
              const T* src = row + dx;
              for (std::size_t x = 0; x < g.width; ++x) dst[x] += w * src[x];
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
struct ConvGrads {
  std::optional<Tensor<T>> input;
  Tensor<T> kernel;
  Tensor<T> bias;
};

/// Gradients of conv2d given the upstream gradient of its output.
/// The input gradient is only computed when requested.
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                             const Tensor<T>& grad_out, bool want_input_grad) {
  const auto g = detail::conv_geometry(input, kernel, bias);
  if (grad_out.shape() != Shape{g.batch, g.out_ch, g.height, g.width})
    throw InvalidShape("conv2d_backward: upstream gradient has shape " + shape_string(grad_out.shape()));
  const std::size_t plane = g.height * g.width;
  const std::size_t hp = g.padded_h(), wp = g.padded_w();
  const std::size_t taps = g.kh * g.kw;
  const bool pointwise = g.kh == 1 && g.kw == 1;

  ConvGrads<T> grads{std::nullopt, Tensor<T>(kernel.shape()), Tensor<T>(bias.shape())};

  for (std::size_t o = 0; o < g.out_ch; ++o) {
    T total{0};
    for (std::size_t b = 0; b < g.batch; ++b)
      total += detail::sum(grad_out.ptr() + (b * g.out_ch + o) * plane, plane);
    grads.bias[o] = total;
  }

  std::vector<T> padded_storage;
  if (!pointwise) padded_storage = detail::pad_input(input, g);
  const T* padded = pointwise ? input.ptr() : padded_storage.data();

  // Kernel gradient: accumulate row products lane-wise over every (b, y), reduce once per tap.
  std::vector<T> lanes(pointwise ? plane : g.width);
  for (std::size_t o = 0; o < g.out_ch; ++o) {
    for (std::size_t c = 0; c < g.in_ch; ++c) {
      for (std::size_t dy = 0; dy < g.kh; ++dy) {
        for (std::size_t dx = 0; dx < g.kw; ++dx) {
          std::fill(lanes.begin(), lanes.end(), T{0});
          for (std::size_t b = 0; b < g.batch; ++b) {
            const T* go = grad_out.ptr() + (b * g.out_ch + o) * plane;
            const T* src_plane = padded + (b * g.in_ch + c) * hp * wp;
            if (pointwise) {
              for (std::size_t i = 0; i < plane; ++i) lanes[i] += go[i] * src_plane[i];
            } else {
              for (std::size_t y = 0; y < g.height; ++y) {
                const T* gr = go + y * g.width;
                const T* src = src_plane + (y + dy) * wp + dx;
                for (std::size_t x = 0; x < g.width; ++x) lanes[x] += gr[x] * src[x];
              }
            }
          }
          grads.kernel[(o * g.in_ch + c) * taps + dy * g.kw + dx] = detail::sum(lanes.data(), lanes.size());
        }
      }
    }
  }

  if (want_input_grad) {
    Tensor<T> grad_in(input.shape());
    if (pointwise) {
      for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t c = 0; c < g.in_ch; ++c) {
          T* dst = grad_in.ptr() + (b * g.in_ch + c) * plane;
          for (std::size_t o = 0; o < g.out_ch; ++o) {
            const T w = kernel[o * g.in_ch + c];
            const T* go = grad_out.ptr() + (b * g.out_ch + o) * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] += w * go[i];
          }
        }
    } else {
      std::vector<T> grad_pad(hp * wp);
      for (std::size_t b = 0; b < g.batch; ++b) {
        for (std::size_t c = 0; c < g.in_ch; ++c) {
          std::fill(grad_pad.begin(), grad_pad.end(), T{0});
          for (std::size_t o = 0; o < g.out_ch; ++o) {
            const T* go = grad_out.ptr() + (b * g.out_ch + o) * plane;
            const T* k = kernel.ptr() + (o * g.in_ch + c) * taps;
            for (std::size_t y = 0; y < g.height; ++y) {
              const T* gr = go + y * g.width;
              for (std::size_t dy = 0; dy < g.kh; ++dy) {
                T* row = grad_pad.data() + (y + dy) * wp;
                for (std::size_t dx = 0; dx < g.kw; ++dx) {
                  const T w = k[dy * g.kw + dx];
                  T* dst = row + dx;
                  for (std::size_t x = 0; x < g.width; ++x) dst[x] += w * gr[x];
                }
              }
            }
          }
          T* dst = grad_in.ptr() + (b * g.in_ch + c) * plane;
          for (std::size_t y = 0; y < g.height; ++y)
            std::copy_n(grad_pad.data() + (y + g.pad_y) * wp + g.pad_x, g.width, dst + y * g.width);
        }
      }
    }
    grads.input = std::move(grad_in);
  }
  return grads;
}

template <typename T>
T sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

enum class Activation { relu, sigmoid };

template <typename T>
Tensor<T> activation(Activation kind, Tensor<T> x) {
  auto d = x.data();
  if (kind == Activation::relu) {
    for (auto& v : d) v = v > T{0} ? v : T{0};
  } else {
    for (auto& v : d) v = sigmoid(v);
  }
  return x;
}

/// d(activation)/dx * upstream. The ReLU derivative at exactly 0 is 0.
/// `output` is the activation's result (used for sigmoid, ignored for relu).
template <typename T>
Tensor<T> activation_backward(Activation kind, const Tensor<T>& input, const Tensor<T>& output,
                              Tensor<T> grad_out) {
  auto g = grad_out.data();
  if (kind == Activation::relu) {
    const auto x = input.data();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!(x[i] > T{0})) g[i] = T{0};
  } else {
    const auto s = output.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s[i] * (T{1} - s[i]);
  }
  return grad_out;
}

inline void check_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) throw InvalidShape(std::string(what) + ": shape " + shape_string(a) + " vs " + shape_string(b));
}

/// Mean binary cross-entropy on probabilities, clipped to [1e-7, 1 - 1e-7].
template <typename T>
T bce_loss(const Tensor<T>& predictions, const Tensor<T>& targets) {
  check_same_shape(predictions.shape(), targets.shape(), "bce_loss");
  double total = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = std::clamp<double>(predictions[i], kBceClip, 1.0 - kBceClip);
    const double t = targets[i];
    total -= t * std::log(p) + (1.0 - t) * std::log1p(-p);
  }
  return static_cast<T>(total / static_cast<double>(predictions.size()));
}

/// Gradient of bce_loss with respect to the predictions; zero where clipping is active.
template <typename T>
Tensor<T> bce_loss_backward(const Tensor<T>& predictions, const Tensor<T>& targets, T upstream) {
  check_same_shape(predictions.shape(), targets.shape(), "bce_loss_backward");
  Tensor<T> grad(predictions.shape());
  const double scale = static_cast<double>(upstream) / static_cast<double>(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = predictions[i];
    if (p < kBceClip || p > 1.0 - kBceClip) continue;
    const double t = targets[i];
    grad[i] = static_cast<T>(scale * (-t / p + (1.0 - t) / (1.0 - p)));
  }
  return grad;
}

template <typename T>
struct LogitLoss {
  T loss;
  Tensor<T> residual;  // sigmoid(z) - t, the per-cell gradient before averaging
};

/// Mean binary cross-entropy of sigmoid(logits), evaluated in the overflow-free form
/// max(z, 0) - z*t + log(1 + exp(-|z|)). Also returns sigmoid(z) - t for the backward pass.
template <typename T>
LogitLoss<T> bce_with_logits_fused(const Tensor<T>& logits, const Tensor<T>& targets) {
  check_same_shape(logits.shape(), targets.shape(), "bce_with_logits");
  using Acc = decltype(T{} + 0.0);  // at least double
  Tensor<T> residual(logits.shape());
  Acc total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const T z = logits[i];
    const T t = targets[i];
    const T e = std::exp(-std::abs(z));
    const T s = (z >= T{0} ? T{1} : e) / (T{1} + e);
    total += static_cast<Acc>(std::max(z, T{0}) - z * t + std::log1p(e));
    residual[i] = s - t;
  }
  return {static_cast<T>(total / static_cast<Acc>(logits.size())), std::move(residual)};
}

template <typename T>
T bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets) {
  return bce_with_logits_fused(logits, targets).loss;
}

template <typename T>
Tensor<T> bce_with_logits_backward(Tensor<T> residual, T upstream) {
  const T scale = upstream / static_cast<T>(residual.size());
  for (auto& r : residual.data()) r *= scale;
  return residual;
}

}  // namespace lifenet::ops
