#include <gtest/gtest.h>

#include <stdexcept>

#include "dynshot/errors.hpp"
#include "dynshot/optimizer.hpp"

using namespace dynshot;

namespace {

struct Trace {
  std::vector<double> v, w;
};

Trace run(MomentumKind kind, double alpha, double mu, double w0, const std::vector<double>& grads) {
  ParameterRegistry reg;
  reg.acquire("w", {1}, Initializer::constant(w0));
  OptState state(reg);
  Trace t;
  for (double g : grads) {
    reg.at(0).grad[0] = g;
    optimizer_step(reg, state, OptimizerConfig{alpha, mu, kind});
    t.v.push_back(state.velocity(0)[0]);
    t.w.push_back(reg.at(0).value[0]);
  }
  return t;
}

}  // namespace

TEST(Momentum, SingleStepFromRest) {
  const Trace t = run(MomentumKind::classic, 0.1, 0.9, 0.0, {1.0});
  EXPECT_EQ(t.v[0], 1.0);
  EXPECT_NEAR(t.w[0], -0.1, 1e-15);
}

TEST(Momentum, TwoStepTrace) {
  // v1 = 2, w1 = 1 - 0.2 = 0.8; v2 = 1.8 + 2 = 3.8, w2 = 0.8 - 0.38 = 0.42
  const Trace t = run(MomentumKind::classic, 0.1, 0.9, 1.0, {2.0, 2.0});
  EXPECT_NEAR(t.v[0], 2.0, 1e-12);
  EXPECT_NEAR(t.w[0], 0.8, 1e-12);
  EXPECT_NEAR(t.v[1], 3.8, 1e-12);
  EXPECT_NEAR(t.w[1], 0.42, 1e-12);
}

TEST(Nesterov, TwoStepTrace) {
  // w1 = 1 - 0.1 (2 + 1.8) = 0.62; v2 = 3.8, w2 = 0.62 - 0.1 (2 + 3.42) = 0.078
  const Trace t = run(MomentumKind::nesterov, 0.1, 0.9, 1.0, {2.0, 2.0});
  EXPECT_NEAR(t.v[0], 2.0, 1e-12);
  EXPECT_NEAR(t.w[0], 0.62, 1e-12);
  EXPECT_NEAR(t.v[1], 3.8, 1e-12);
  EXPECT_NEAR(t.w[1], 0.078, 1e-12);
}

TEST(Momentum, ZeroMomentumIsPlainGradientDescent) {
  const std::vector<double> grads{0.5, -1.5, 3.0, 0.0, 2.25, -0.125};
  const Trace classic = run(MomentumKind::classic, 0.05, 0.0, 2.0, grads);
  const Trace nesterov = run(MomentumKind::nesterov, 0.05, 0.0, 2.0, grads);
  EXPECT_EQ(classic.w, nesterov.w);
  double w = 2.0;
  for (std::size_t k = 0; k < grads.size(); ++k) {
    w -= 0.05 * grads[k];
    EXPECT_EQ(classic.w[k], w);
  }
}

TEST(Momentum, UpdatesEveryEntryIndependently) {
  ParameterRegistry reg;
  reg.acquire("a", {2, 2}, Initializer::constant(1.0));
  reg.acquire("b", {3}, Initializer::zeros());
  OptState state(reg);
  reg.at("a").grad = Tensor::matrix(2, 2, {1, 2, 3, 4});
  reg.at("b").grad = Tensor::vector({-1, 0, 1});
  momentum_step(reg, state, OptimizerConfig{0.5, 0.9, MomentumKind::classic});
  EXPECT_EQ(reg.at("a").value, Tensor::matrix(2, 2, {0.5, 0, -0.5, -1}));
  EXPECT_EQ(reg.at("b").value, Tensor::vector({0.5, 0, -0.5}));
}

TEST(OptimizerState, DetectsShapeDrift) {
  ParameterRegistry reg;
  reg.acquire("w", {2}, Initializer::zeros());
  OptState state(reg);
  reg.acquire("extra", {1}, Initializer::zeros());
  EXPECT_THROW(state.check(reg), GraphError);
  EXPECT_THROW(momentum_step(reg, state, OptimizerConfig{}), GraphError);
}

TEST(OptimizerConfigType, Validation) {
  EXPECT_THROW((OptimizerConfig{0.0, 0.9, MomentumKind::classic}.validate()), std::invalid_argument);
  EXPECT_THROW((OptimizerConfig{0.1, 1.0, MomentumKind::classic}.validate()), std::invalid_argument);
  EXPECT_THROW((OptimizerConfig{0.1, -0.1, MomentumKind::classic}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((OptimizerConfig{0.1, 0.0, MomentumKind::nesterov}.validate()));
  EXPECT_EQ(parse_momentum("nesterov"), MomentumKind::nesterov);
  EXPECT_THROW(parse_momentum("adam"), std::invalid_argument);
}
