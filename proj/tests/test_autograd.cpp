#include <gtest/gtest.h>

#include <random>

#include "lifenet/autograd.hpp"
#include "lifenet/gradcheck.hpp"
#include "lifenet/network.hpp"

using namespace lifenet;

namespace {

Tensor<double> random_tensor(Shape s, std::mt19937_64& rng, double scale = 1.0) {
  Tensor<double> t(std::move(s));
  std::normal_distribution<double> nd(0, scale);
  for (auto& v : t.data()) v = nd(rng);
  return t;
}

Tensor<double> random_bits(Shape s, std::mt19937_64& rng) {
  Tensor<double> t(std::move(s));
  std::bernoulli_distribution coin(0.4);
  for (auto& v : t.data()) v = coin(rng);
  return t;
}

// Flattens tensors into one parameter vector and back.
struct Packed {
  std::vector<Tensor<double>> tensors;

  std::vector<double> flat() const {
    std::vector<double> out;
    for (const auto& t : tensors) out.insert(out.end(), t.data().begin(), t.data().end());
    return out;
  }
  std::vector<Tensor<double>> unflat(std::span<const double> v) const {
    auto out = tensors;
    std::size_t at = 0;
    for (auto& t : out)
      for (auto& x : t.data()) x = v[at++];
    return out;
  }
};

enum class Head { sigmoid_bce, logits_bce };

// loss(x) = head(act(conv(x, k, b)))
double chain_loss(const std::vector<Tensor<double>>& p, const Tensor<double>& targets, ops::Activation act, Head head) {
  auto y = ops::activation(act, ops::conv2d(p[0], p[1], p[2]));
  if (head == Head::logits_bce) return ops::bce_with_logits(y, targets);
  return ops::bce_loss(ops::activation(ops::Activation::sigmoid, y), targets);
}

std::vector<double> chain_grad(const std::vector<Tensor<double>>& p, const Tensor<double>& targets,
                               ops::Activation act, Head head) {
  Tape<double> tape;
  auto x = tape.parameter(p[0]);
  auto k = tape.parameter(p[1]);
  auto b = tape.parameter(p[2]);
  auto y = tape.activation(act, tape.conv2d(x, k, b));
  auto t = tape.constant(targets);
  auto loss = head == Head::logits_bce ? tape.bce_with_logits(y, t) : tape.bce(tape.sigmoid(y), t);
  tape.backward(loss);
  std::vector<double> g;
  for (auto v : {x, k, b}) g.insert(g.end(), tape.grad(v).data().begin(), tape.grad(v).data().end());
  return g;
}

void run_property(ops::Activation act, Head head, std::size_t ksize, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::size_t checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Packed p{{random_tensor({2, 2, 4, 5}, rng), random_tensor({3, 2, ksize, ksize}, rng, 0.5),
              random_tensor({3}, rng, 0.5)}};
    const auto targets = random_bits({2, 3, 4, 5}, rng);
    const auto point = p.flat();
    const auto analytic = chain_grad(p.tensors, targets, act, head);
    auto loss = [&](std::span<const double> v) { return chain_loss(p.unflat(v), targets, act, head); };
    // Skip coordinates whose stencil moves a ReLU input across zero.
    auto crosses = [&](std::size_t, std::span<const double> plus, std::span<const double> minus) {
      if (act != ops::Activation::relu) return false;
      auto signs = [&](std::span<const double> v) {
        const auto q = p.unflat(v);
        const auto z = ops::conv2d(q[0], q[1], q[2]);
        std::vector<bool> s;
        for (double x : z.data()) s.push_back(x > 0);
        return s;
      };
      return signs(plus) != signs(point) || signs(minus) != signs(point);
    };
    const auto r = finite_diff_check(loss, std::span<const double>(point), std::span<const double>(analytic), 1e-6,
                                     GradCheckOptions{}, crosses);
    ASSERT_TRUE(r.passed) << "trial " << trial << " worst " << r.worst_index << " err " << r.max_relative_error;
    checked += r.checked;
  }
  EXPECT_GT(checked, 100u * 40u);
}

}  // namespace

TEST(Autograd, Conv3x3ReluLogits) { run_property(ops::Activation::relu, Head::logits_bce, 3, 1); }
TEST(Autograd, Conv1x1ReluLogits) { run_property(ops::Activation::relu, Head::logits_bce, 1, 2); }
TEST(Autograd, Conv3x3SigmoidBce) { run_property(ops::Activation::sigmoid, Head::sigmoid_bce, 3, 3); }
TEST(Autograd, Conv1x1ReluSigmoidBce) { run_property(ops::Activation::relu, Head::sigmoid_bce, 1, 4); }

TEST(Autograd, ReusedNodeAccumulates) {
  // loss = bce_logits(conv(x,k,b) twice through the same kernel): gradient adds up.
  Tape<double> tape;
  auto x = tape.constant(Tensor<double>({1, 1, 1, 1}, 2.0));
  auto k = tape.parameter(Tensor<double>({1, 1, 1, 1}, 0.5));
  auto b = tape.parameter(Tensor<double>({1}, 0.0));
  auto y1 = tape.conv2d(x, k, b);
  auto y2 = tape.conv2d(y1, k, b);
  auto loss = tape.bce_with_logits(y2, tape.constant(Tensor<double>({1, 1, 1, 1}, 1.0)));
  tape.backward(loss);
  // y2 = k*(k*x + b) + b = 0.5; dL/dy2 = sigmoid(0.5) - 1
  const double r = ops::sigmoid(0.5) - 1.0;
  EXPECT_NEAR(tape.grad(k)[0], r * (2 * 0.5 * 2.0), 1e-15);
  EXPECT_NEAR(tape.grad(b)[0], r * (0.5 + 1), 1e-15);
}

TEST(Autograd, StateErrors) {
  Tape<double> tape;
  auto x = tape.parameter(Tensor<double>({1, 1, 2, 2}, 1.0));
  auto c = tape.constant(Tensor<double>({1, 1, 2, 2}, 1.0));
  auto y = tape.relu(x);
  EXPECT_THROW(tape.grad(x), StateError);
  EXPECT_THROW(tape.backward(y), StateError);  // not a scalar
  auto loss = tape.bce_with_logits(y, c);
  tape.backward(loss);
  EXPECT_THROW(tape.grad(c), StateError);
  EXPECT_THROW(tape.backward(loss), StateError);
  EXPECT_THROW(tape.relu(x), StateError);
  EXPECT_THROW(tape.value(Var{999}), StateError);
}

TEST(GradCheck, DetectsAWrongGradient) {
  std::mt19937_64 rng(8);
  Packed p{{random_tensor({1, 1, 4, 4}, rng), random_tensor({2, 1, 3, 3}, rng), random_tensor({2}, rng)}};
  const auto targets = random_bits({1, 2, 4, 4}, rng);
  const auto point = p.flat();
  auto analytic = chain_grad(p.tensors, targets, ops::Activation::sigmoid, Head::logits_bce);
  auto loss = [&](std::span<const double> v) {
    return chain_loss(p.unflat(v), targets, ops::Activation::sigmoid, Head::logits_bce);
  };
  EXPECT_TRUE(finite_diff_check(loss, std::span<const double>(point), std::span<const double>(analytic), 1e-6).passed);
  analytic[20] *= 1.001;
  const auto r = finite_diff_check(loss, std::span<const double>(point), std::span<const double>(analytic), 1e-6);
  EXPECT_FALSE(r.passed);
  EXPECT_EQ(r.worst_index, 20u);
}

TEST(GradCheck, WholeNetwork) {
  std::mt19937_64 rng(4);
  auto net = init_unit_normal(build_network<double>({1, 2, 6, 6}), 17);
  const auto boards = random_bits({3, 1, 6, 6}, rng);
  const auto targets = random_bits({3, 1, 6, 6}, rng);
  const auto r = finite_diff_check(net, boards, targets, 1e-6);
  EXPECT_EQ(r.checked + r.skipped_kink, net.parameter_count());
  EXPECT_TRUE(r.passed) << r.max_relative_error;
}
