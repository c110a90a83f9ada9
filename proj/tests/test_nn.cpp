#include <gtest/gtest.h>

#include <cmath>

#include "support/gradcheck.hpp"
#include "wavestate/network.hpp"
#include "wavestate/optimizer.hpp"

using namespace wavestate;
using nn::LayerSpec;

namespace {

nn::Network single(Shape in, LayerSpec layer) {
  nn::Network n;
  n.input_shape = std::move(in);
  n.layers = {std::move(layer)};
  return n;
}

}  // namespace

TEST(Tensor, ReshapeKeepsValuesAndRejectsSizeChange) {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor r = t.reshaped({3, 2});
  EXPECT_EQ(r.shape(), (Shape{3, 2}));
  EXPECT_EQ(r.to_vector(), t.to_vector());
  EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Layers, Conv1DOutputShapeAndParameters) {
  const auto net = single({800, 1}, LayerSpec::conv1d(64, 3));
  EXPECT_EQ(net.output_shape(), (Shape{800, 64}));
  EXPECT_EQ(net.parameter_count(), 256u);
}

TEST(Layers, MaxPool1DHalvesTimeWithoutParameters) {
  const auto net = single({800, 64}, LayerSpec::max_pool1d(2));
  EXPECT_EQ(net.output_shape(), (Shape{400, 64}));
  EXPECT_EQ(net.parameter_count(), 0u);
}

TEST(Layers, UpsampleRepeatsAConstant) {
  const auto net = single({4, 1}, LayerSpec::upsample1d(2));
  const Tensor out = nn::forward(net, nn::zero_parameters(net), Tensor({4, 1}, 2.5));
  ASSERT_EQ(out.shape(), (Shape{8, 1}));
  for (double v : out.values()) EXPECT_EQ(v, 2.5);
}

TEST(Layers, ShapeErrorNamesTheLayer) {
  nn::Network net;
  net.input_shape = {5, 1};
  net.layers = {LayerSpec::conv1d(2), LayerSpec::max_pool1d(2)};
  try {
    net.output_shapes();
    FAIL() << "odd length should not pool by 2";
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.layer(), 1);
  }
  EXPECT_THROW(nn::forward(net, nn::zero_parameters(net), Tensor({4, 1})), ShapeError);
}

TEST(Backward, RequiresAForwardCache) {
  const auto net = single({3}, LayerSpec::dense(2));
  nn::ForwardCache cache;
  EXPECT_THROW(nn::backward(net, nn::zero_parameters(net), cache, Tensor({2})), MissingCacheError);
}

TEST(Backward, ZeroUpstreamGradientGivesZeroParameterGradients) {
  const auto net = single({4}, LayerSpec::dense(3));
  Rng rng(1);
  const auto params = nn::init_parameters(net, rng);
  nn::ForwardCache cache;
  nn::forward(net, params, test_support::random_tensor({4}, rng), &cache);
  const auto g = nn::backward(net, params, cache, Tensor({3}));
  for (double v : g.params[0].weight.values()) EXPECT_EQ(v, 0.0);
  for (double v : g.params[0].bias.values()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, SmallConvNetworkMatchesFiniteDifferences) {
  nn::Network net;
  net.input_shape = {8, 1};
  net.layers = {LayerSpec::conv1d(2, 3), LayerSpec::act(nn::Activation::Tanh), LayerSpec::flatten(), LayerSpec::dense(1)};
  Rng rng(7);
  auto params = nn::init_parameters(net, rng);
  const auto r = test_support::gradient_check(net, params, test_support::random_tensor({8, 1}, rng), Tensor({1}, 1.0));
  EXPECT_LT(r.max_relative_error, 1e-4);
  EXPECT_EQ(r.checked, 2u * 3u + 2u + 16u + 1u + 8u);
}

TEST(Backward, MaxPoolRoutesGradientToArgmaxOnly) {
  const auto net = single({6, 2}, LayerSpec::max_pool1d(2));
  Tensor x({6, 2}, {1, -1, 3, -2, 5, 9, 4, 0, -1, 2, -3, 1});
  nn::ForwardCache cache;
  const Tensor y = nn::forward(net, nn::zero_parameters(net), x, &cache);
  EXPECT_EQ(y.to_vector(), (std::vector<double>{3, -1, 5, 9, -1, 2}));
  Tensor up({3, 2}, {0.5, 1.5, -2.0, 3.0, 4.0, 0.25});
  const auto g = nn::backward(net, nn::zero_parameters(net), cache, up);
  EXPECT_EQ(g.input.to_vector(), (std::vector<double>{0, 1.5, 0.5, 0, -2.0, 3.0, 0, 0, 4.0, 0.25, 0, 0}));
  double in_sum = 0.0, out_sum = 0.0;
  for (double v : g.input.values()) in_sum += v;
  for (double v : up.values()) out_sum += v;
  EXPECT_DOUBLE_EQ(in_sum, out_sum);
}

TEST(Backward, RandomisedNetworksMatchFiniteDifferences) {
  const auto s = test_support::gradient_suite(50, 2024);
  EXPECT_EQ(s.networks, 50u);
  EXPECT_GT(s.checked, 500u);
  EXPECT_LT(s.worst, 1e-4);
}

TEST(Init, SameSeedSameParameters) {
  nn::Network net;
  net.input_shape = {6, 1};
  net.layers = {LayerSpec::conv1d(4), LayerSpec::flatten(), LayerSpec::dense(3)};
  Rng a(99), b(99), c(100);
  EXPECT_EQ(nn::init_parameters(net, a), nn::init_parameters(net, b));
  EXPECT_NE(nn::init_parameters(net, a), nn::init_parameters(net, c));
}

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
  const auto net = single({3}, LayerSpec::dense(2));
  Rng rng(3);
  auto params = nn::init_parameters(net, rng);
  const auto before = params;
  auto state = nn::make_optimizer(net);
  nn::optimizer_step(state, params, nn::zero_parameters(net));
  EXPECT_EQ(params, before);
}

TEST(Adam, FirstStepMovesByTheLearningRate) {
  const auto net = single({1}, LayerSpec::dense(1));
  auto params = nn::zero_parameters(net);
  auto grads = nn::zero_parameters(net);
  grads[0].weight[0] = 1.0;
  auto state = nn::make_optimizer(net);
  nn::optimizer_step(state, params, grads);
  // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
  EXPECT_NEAR(params[0].weight[0], -1e-3 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(params[0].bias[0], 0.0);
}

TEST(Adam, IdenticalGradientSequencesGiveIdenticalTrajectories) {
  const auto net = single({4}, LayerSpec::dense(3));
  Rng init(5);
  auto p1 = nn::init_parameters(net, init);
  auto p2 = p1;
  auto s1 = nn::make_optimizer(net), s2 = nn::make_optimizer(net);
  Rng g(6);
  for (int step = 0; step < 20; ++step) {
    auto grads = nn::zero_parameters(net);
    for (auto& v : grads[0].weight.values()) v = g.uniform(-1, 1);
    for (auto& v : grads[0].bias.values()) v = g.uniform(-1, 1);
    nn::optimizer_step(s1, p1, grads);
    nn::optimizer_step(s2, p2, grads);
  }
  EXPECT_EQ(p1, p2);
}

TEST(Adam, RejectsNonFiniteGradientsWithoutMutating) {
  const auto net = single({2}, LayerSpec::dense(1));
  auto params = nn::zero_parameters(net);
  auto grads = nn::zero_parameters(net);
  grads[0].weight[1] = std::nan("");
  auto state = nn::make_optimizer(net);
  EXPECT_THROW(nn::optimizer_step(state, params, grads), NonFiniteError);
  EXPECT_EQ(state.step, 0u);
  EXPECT_EQ(params, nn::zero_parameters(net));
}
