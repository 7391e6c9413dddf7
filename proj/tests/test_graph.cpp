#include <gtest/gtest.h>

#include <cmath>

#include "dynshot/errors.hpp"
#include "dynshot/graph.hpp"
#include "test_util.hpp"

using namespace dynshot;
using dynshot::test::random_tensor;

TEST(Tensor, ConstructionValidatesLength) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m.at(1, 2), 6.0);
  EXPECT_EQ(m.row(1)[0], 4.0);
}

TEST(Graph, InputEchoesShapeAndRefsAreDistinct) {
  Graph g;
  NodeRef a = g.input({2, 3}, "a");
  NodeRef b = g.input({2, 3}, "b");
  EXPECT_EQ(g.shape(a), (Shape{2, 3}));
  EXPECT_NE(a, b);
  EXPECT_EQ(g.node_count(), 2u);
  EXPECT_THROW(g.input({0}), ShapeError);
}

TEST(Graph, ParameterReuseSharesStorage) {
  Graph g;
  NodeRef p1 = g.parameter("w", {2}, Initializer::constant(1.0));
  NodeRef p2 = g.parameter("w", {2}, Initializer::constant(5.0));
  EXPECT_NE(p1, p2);
  EXPECT_EQ(g.registry().size(), 1u);
  EXPECT_EQ(g.registry().at("w").value[0], 1.0);
  EXPECT_THROW(g.parameter("w", {3}, Initializer::zeros()), ShapeError);

  g.registry().at("w").value[1] = 7.0;
  Activations acts = forward(g, Feeds{});
  EXPECT_EQ(acts.value(p1)[1], 7.0);
  EXPECT_EQ(acts.value(p2)[1], 7.0);
}

TEST(Graph, RegistrySharedAcrossGraphs) {
  auto reg = std::make_shared<ParameterRegistry>();
  Graph g1(reg), g2(reg);
  g1.parameter("w", {3}, Initializer::constant(2.0));
  NodeRef w2 = g2.parameter("w", {3}, Initializer::zeros());
  EXPECT_EQ(reg->size(), 1u);
  EXPECT_EQ(forward(g2, Feeds{}).value(w2)[2], 2.0);
}

TEST(Graph, ShapeErrorsNameTheNode) {
  Graph g;
  NodeRef a = g.input({2, 3}, "lhs");
  NodeRef b = g.input({2}, "rhs");
  try {
    g.matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("lhs"), std::string::npos);
  }
  EXPECT_THROW(g.add_bias(a, b), ShapeError);
  EXPECT_THROW(g.slice_row(a, 2), ShapeError);
  NodeRef parts[] = {a, b};
  EXPECT_THROW(g.mean_of(parts), ShapeError);
}

TEST(Graph, FrozenGraphRejectsNodes) {
  Graph g;
  g.input({1});
  g.freeze();
  EXPECT_THROW(g.input({1}), GraphError);
}

TEST(Forward, MatmulByIdentity) {
  Graph g;
  NodeRef w = g.parameter("I", {3, 3}, Initializer::zeros());
  NodeRef x = g.input({3});
  NodeRef y = g.matmul(w, x);
  g.registry().at("I").value = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor v = Tensor::vector({0.5, -2.0, 3.25});
  EXPECT_EQ(forward(g, Feeds().set(x, v), y).value(y), v);
}

TEST(Forward, MatrixMatrixProduct) {
  Graph g;
  NodeRef a = g.input({2, 2});
  NodeRef b = g.input({2, 3});
  NodeRef c = g.matmul(a, b);
  const Tensor ta = Tensor::matrix(2, 2, {1, 2, 3, 4});
  const Tensor tb = Tensor::matrix(2, 3, {1, 0, -1, 2, 1, 0});
  EXPECT_EQ(forward(g, Feeds().set(a, ta).set(b, tb), c).value(c), Tensor::matrix(2, 3, {5, 2, -1, 11, 4, -3}));
}

TEST(Forward, MatmulBiasReluChain) {
  Graph g;
  NodeRef w = g.parameter("W", {2, 2}, Initializer::zeros());
  NodeRef b = g.parameter("b", {2}, Initializer::zeros());
  NodeRef x = g.input({2});
  NodeRef y = g.activation(g.add_bias(g.matmul(w, x), b), ActivationKind::relu);
  g.registry().at("W").value = Tensor::matrix(2, 2, {1, -2, 3, 0.5});
  g.registry().at("b").value = Tensor::vector({-1, 1});
  // W x = (0, 6.5); + b = (-1, 7.5); relu = (0, 7.5)
  EXPECT_EQ(forward(g, Feeds().set(x, Tensor::vector({2, 1})), y).value(y), Tensor::vector({0, 7.5}));
}

TEST(Forward, ConcatAndSlice) {
  Graph g;
  NodeRef a = g.input({2});
  NodeRef m = g.input({3, 2});
  NodeRef r = g.slice_row(m, 2);
  NodeRef parts[] = {a, r};
  NodeRef c = g.concat(parts);
  EXPECT_EQ(g.shape(c), (Shape{4}));
  Feeds feeds;
  const Tensor ta = Tensor::vector({1, 2});
  const Tensor tm = Tensor::matrix(3, 2, {0, 0, 0, 0, 8, 9});
  EXPECT_EQ(forward(g, feeds.set(a, ta).set(m, tm), c).value(c), Tensor::vector({1, 2, 8, 9}));
}

TEST(Forward, MeanOfTwoVectors) {
  Graph g;
  NodeRef a = g.input({2});
  NodeRef b = g.input({2});
  NodeRef parts[] = {a, b};
  NodeRef m = g.mean_of(parts);
  const Tensor ta = Tensor::vector({1, 2});
  const Tensor tb = Tensor::vector({3, 4});
  EXPECT_EQ(forward(g, Feeds().set(a, ta).set(b, tb), m).value(m), Tensor::vector({2, 3}));
}

TEST(Forward, MeanOfIdenticalInputsIsExact) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Graph g;
    NodeRef x = g.input({7});
    std::vector<NodeRef> parts(2 + trial % 20, x);
    NodeRef m = g.mean_of(parts);
    const Tensor v = random_tensor({7}, rng, 1e3);
    EXPECT_EQ(forward(g, Feeds().set(x, v), m).value(m), v);
  }
}

TEST(Forward, MeanOfIsOrderInvariant) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    Graph g;
    std::vector<NodeRef> parts;
    std::vector<Tensor> values;
    for (int k = 0; k < 5; ++k) {
      parts.push_back(g.input({3}));
      values.push_back(random_tensor({3}, rng));
    }
    NodeRef fwd = g.mean_of(parts);
    std::vector<NodeRef> rev(parts.rbegin(), parts.rend());
    NodeRef bwd = g.mean_of(rev);
    Feeds feeds;
    for (int k = 0; k < 5; ++k) feeds.set(parts[k], values[k]);
    Activations acts = forward(g, feeds);
    EXPECT_EQ(acts.value(fwd), acts.value(bwd));
  }
}

TEST(Forward, SoftmaxXentClosedForms) {
  Graph g;
  NodeRef z = g.input({2});
  NodeRef y = g.input({1});
  NodeRef loss = g.softmax_xent(z, y);

  const Tensor even = Tensor::vector({0, 0});
  const Tensor label0 = Tensor::vector({0});
  EXPECT_NEAR(forward(g, Feeds().set(z, even).set(y, label0)).value(loss)[0], std::log(2.0), 1e-15);

  const Tensor confident = Tensor::vector({10, -10});
  EXPECT_NEAR(forward(g, Feeds().set(z, confident).set(y, label0)).value(loss)[0], std::log1p(std::exp(-20.0)),
              1e-22);

  const Tensor huge = Tensor::vector({-800, 800});
  const Tensor label1 = Tensor::vector({1});
  EXPECT_EQ(forward(g, Feeds().set(z, huge).set(y, label1)).value(loss)[0], 0.0);
  EXPECT_NEAR(forward(g, Feeds().set(z, huge).set(y, label0)).value(loss)[0], 1600.0, 1e-9);
}

TEST(Forward, SoftmaxProbabilitiesSumToOne) {
  Rng rng(7);
  Graph g;
  NodeRef z = g.input({2});
  NodeRef y = g.input({1});
  NodeRef loss = g.softmax_xent(z, y);
  const Tensor label = Tensor::vector({1});
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor logits = random_tensor({2}, rng, 5.0);
    Activations acts = forward(g, Feeds().set(z, logits).set(y, label));
    const Tensor& p = acts.probabilities(loss);
    EXPECT_NEAR(p[0] + p[1], 1.0, 1e-15);
    EXPECT_GE(p[0], 0.0);
    EXPECT_GE(p[1], 0.0);
  }
}

TEST(Forward, LabelOutOfRange) {
  Graph g;
  NodeRef z = g.input({2});
  NodeRef y = g.input({1});
  NodeRef loss = g.softmax_xent(z, y);
  const Tensor logits = Tensor::vector({0, 1});
  const Tensor bad = Tensor::vector({2});
  EXPECT_THROW(forward(g, Feeds().set(z, logits).set(y, bad), loss), GraphError);
}

TEST(Forward, MissingFeedNamesTheInput) {
  Graph g;
  NodeRef a = g.input({2}, "support");
  NodeRef r = g.activation(a, ActivationKind::tanh);
  try {
    forward(g, Feeds{}, r);
    FAIL() << "expected GraphError";
  } catch (const GraphError& e) {
    EXPECT_NE(std::string(e.what()).find("support"), std::string::npos);
  }
  const Tensor wrong({3});
  EXPECT_THROW(forward(g, Feeds().set(a, wrong), r), ShapeError);
}

TEST(Forward, OnlyEvaluatesWhatTheTargetNeeds) {
  Graph g;
  NodeRef a = g.input({1});
  NodeRef unused = g.input({1});
  NodeRef r = g.activation(a, ActivationKind::relu);
  g.activation(unused, ActivationKind::relu);
  const Tensor v = Tensor::vector({3});
  Activations acts = forward(g, Feeds().set(a, v), r);
  EXPECT_TRUE(acts.evaluated(r));
  EXPECT_FALSE(acts.evaluated(unused));
}

TEST(Forward, RepeatedEvaluationIsBitIdentical) {
  Rng rng(8);
  Graph g;
  NodeRef w = g.parameter("W", {4, 6}, Initializer::glorot(1));
  NodeRef x = g.input({6});
  NodeRef y = g.activation(g.matmul(w, x), ActivationKind::tanh);
  const Tensor v = random_tensor({6}, rng);
  EXPECT_EQ(forward(g, Feeds().set(x, v), y).value(y), forward(g, Feeds().set(x, v), y).value(y));
}

// Scalar-valued helper graph: loss = xent(W x + b, label).
struct LinearModel {
  Graph graph;
  NodeRef x, label, logits, loss;

  explicit LinearModel(std::size_t dim) {
    x = graph.input({dim}, "x");
    label = graph.input({1}, "label");
    NodeRef w = graph.parameter("W", {2, dim}, Initializer::glorot(3));
    NodeRef b = graph.parameter("b", {2}, Initializer::constant(0.1));
    logits = graph.add_bias(graph.matmul(w, x), b);
    loss = graph.softmax_xent(logits, label);
  }
};

TEST(Backward, LinearSoftmaxGradientByHand) {
  LinearModel m(3);
  Rng rng(9);
  const Tensor x = random_tensor({3}, rng);
  const Tensor y = Tensor::vector({1});
  Activations acts = forward(m.graph, Feeds().set(m.x, x).set(m.label, y));
  backward(m.graph, acts, m.loss);
  const Tensor& p = acts.probabilities(m.loss);
  // dL/dz = p - onehot(label); dL/dW = outer(dL/dz, x); dL/db = dL/dz.
  const double dz[2] = {p[0], p[1] - 1.0};
  const Tensor& gw = m.graph.registry().at("W").grad;
  const Tensor& gb = m.graph.registry().at("b").grad;
  for (std::size_t o = 0; o < 2; ++o) {
    EXPECT_NEAR(gb[o], dz[o], 1e-15);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(gw.at(o, i), dz[o] * x[i], 1e-15);
  }
}

TEST(Backward, ScalarProductGradient) {
  Graph g;
  NodeRef w = g.parameter("w", {1, 1}, Initializer::constant(3.0));
  NodeRef x = g.input({1});
  NodeRef y = g.matmul(w, x);
  const Tensor two = Tensor::vector({2.0});
  Activations acts = forward(g, Feeds().set(x, two));
  EXPECT_EQ(acts.value(y)[0], 6.0);
  backward(g, acts, y);
  EXPECT_EQ(g.registry().at("w").grad[0], 2.0);
}

TEST(Backward, UnusedParameterGetsZeroGradient) {
  LinearModel m(2);
  m.graph.parameter("spare", {4}, Initializer::constant(1.0));
  const Tensor x = Tensor::vector({1, 2});
  const Tensor y = Tensor::vector({0});
  m.graph.registry().at("spare").grad.fill(9.0);
  Activations acts = forward(m.graph, Feeds().set(m.x, x).set(m.label, y));
  backward(m.graph, acts, m.loss);
  EXPECT_EQ(m.graph.registry().at("spare").grad, Tensor({4}, 0.0));
}

TEST(Backward, SharedParameterAccumulatesEveryUse) {
  // A tied graph using one W three times against an untied copy with W0..W2
  // holding the same values: the tied gradient is the sum of the untied ones.
  Rng rng(10);
  const Tensor wv = random_tensor({2, 3}, rng);
  const Tensor xs[3] = {random_tensor({3}, rng), random_tensor({3}, rng), random_tensor({3}, rng)};
  const Tensor label = Tensor::vector({1});

  auto build = [&](bool tied, Graph& g, std::vector<NodeRef>& inputs, NodeRef& y) {
    std::vector<NodeRef> heads;
    for (int k = 0; k < 3; ++k) {
      const std::string name = tied ? "W" : "W" + std::to_string(k);
      NodeRef w = g.parameter(name, {2, 3}, Initializer::zeros());
      g.registry().at(name).value = wv;
      inputs.push_back(g.input({3}));
      heads.push_back(g.activation(g.matmul(w, inputs.back()), ActivationKind::tanh));
    }
    y = g.input({1});
    return g.softmax_xent(g.mean_of(heads), y);
  };
  Graph tied, untied;
  std::vector<NodeRef> ti, ui;
  NodeRef ty, uy;
  NodeRef tl = build(true, tied, ti, ty);
  NodeRef ul = build(false, untied, ui, uy);
  Feeds tf, uf;
  for (int k = 0; k < 3; ++k) {
    tf.set(ti[k], xs[k]);
    uf.set(ui[k], xs[k]);
  }
  tf.set(ty, label);
  uf.set(uy, label);
  Activations ta = forward(tied, tf);
  Activations ua = forward(untied, uf);
  EXPECT_EQ(ta.value(tl), ua.value(ul));
  backward(tied, ta, tl);
  backward(untied, ua, ul);
  const Tensor& gt = tied.registry().at("W").grad;
  for (std::size_t e = 0; e < gt.size(); ++e) {
    const double sum = untied.registry().at("W0").grad[e] + untied.registry().at("W1").grad[e] +
                       untied.registry().at("W2").grad[e];
    EXPECT_NEAR(gt[e], sum, 1e-15);
  }
}

TEST(Backward, BackwardIntoMatchesRegistryGradients) {
  LinearModel m(4);
  Rng rng(11);
  const Tensor x = random_tensor({4}, rng);
  const Tensor y = Tensor::vector({0});
  Activations acts = forward(m.graph, Feeds().set(m.x, x).set(m.label, y));
  backward(m.graph, acts, m.loss);
  GradientBuffer buf(m.graph.registry());
  buf.zero();
  backward_into(m.graph, acts, m.loss, buf);
  for (std::size_t i = 0; i < m.graph.registry().size(); ++i) EXPECT_EQ(buf[i], m.graph.registry().at(i).grad);
}

TEST(Backward, RequiresScalarLossAndPriorForward) {
  LinearModel m(2);
  const Tensor x = Tensor::vector({1, 2});
  const Tensor y = Tensor::vector({0});
  Activations acts = forward(m.graph, Feeds().set(m.x, x).set(m.label, y));
  EXPECT_THROW(backward(m.graph, acts, m.logits), GraphError);
  Activations fresh(m.graph);
  EXPECT_THROW(backward(m.graph, fresh, m.loss), GraphError);
}

TEST(GradCheck, LinearModelIsNearExact) {
  LinearModel m(5);
  Rng rng(12);
  const Tensor x = random_tensor({5}, rng);
  const Tensor y = Tensor::vector({1});
  const GradCheckReport r = grad_check(m.graph, m.loss, Feeds().set(m.x, x).set(m.label, y));
  EXPECT_EQ(r.entries_checked, 12u);
  EXPECT_LT(r.max_relative_error, 1e-9);
}

TEST(GradCheck, RejectsNonPositiveEpsilon) {
  LinearModel m(2);
  const Tensor x = Tensor::vector({1, 2});
  const Tensor y = Tensor::vector({0});
  EXPECT_THROW(grad_check(m.graph, m.loss, Feeds().set(m.x, x).set(m.label, y), 0.0), GraphError);
}

TEST(GradCheck, RestoresParameterValues) {
  LinearModel m(3);
  const Tensor before = m.graph.registry().at("W").value;
  const Tensor x = Tensor::vector({1, 2, 3});
  const Tensor y = Tensor::vector({0});
  grad_check(m.graph, m.loss, Feeds().set(m.x, x).set(m.label, y));
  EXPECT_EQ(m.graph.registry().at("W").value, before);
}

TEST(GradCheck, SkipsEntriesStraddlingReluKink) {
  auto run = [](std::vector<double> xv) {
    Graph g;
    NodeRef x = g.input({2}, "x");
    NodeRef w = g.parameter("W", {1, 2}, Initializer::zeros());
    NodeRef head = g.parameter("head", {2, 1}, Initializer::zeros());
    NodeRef label = g.input({1}, "label");
    NodeRef loss = g.softmax_xent(g.matmul(head, g.activation(g.matmul(w, x), ActivationKind::relu)), label);
    test::set_values(g.registry(), "W", {1.0, -1.0});
    test::set_values(g.registry(), "head", {0.3, -0.2});
    return grad_check(g, loss, Feeds().set(x, Tensor::vector(std::move(xv))).set(label, Tensor::vector({0})));
  };
  // W x = 0 exactly: nudging either W entry flips the unit
  const GradCheckReport at_kink = run({0.5, 0.5});
  EXPECT_EQ(at_kink.kinks_skipped, 2u);
  EXPECT_EQ(at_kink.entries_checked, 2u);
  EXPECT_LT(at_kink.max_relative_error, 1e-9);

  const GradCheckReport away = run({1.0, 0.5});
  EXPECT_EQ(away.kinks_skipped, 0u);
  EXPECT_EQ(away.entries_checked, 4u);
  EXPECT_LT(away.max_relative_error, 1e-9);
}

// Random small graphs mixing every differentiable op, smooth activations only.
TEST(GradCheck, RandomGraphsAgreeWithFiniteDifferences) {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    Graph g;
    const std::size_t rows = 2 + rng.index(3);
    const std::size_t dim = 1 + rng.index(4);
    NodeRef m = g.input({rows, dim}, "m");
    std::vector<NodeRef> branches;
    const std::size_t nb = 1 + rng.index(3);
    for (std::size_t k = 0; k < nb; ++k) {
      NodeRef a = g.slice_row(m, rng.index(rows));
      NodeRef b = g.slice_row(m, rng.index(rows));
      NodeRef parts[] = {a, b};
      NodeRef h = g.concat(parts);
      const std::string layer = "l" + std::to_string(rng.index(2));  // sometimes shared
      NodeRef w = g.parameter(layer + "/W", {3, 2 * dim}, Initializer::glorot(rng.next_u64()));
      NodeRef bias = g.parameter(layer + "/b", {3}, Initializer::constant(0.05));
      branches.push_back(g.activation(g.add_bias(g.matmul(w, h), bias), ActivationKind::tanh));
    }
    NodeRef pooled = g.mean_of(branches);
    NodeRef head = g.parameter("head", {2, 3}, Initializer::glorot(rng.next_u64()));
    NodeRef label = g.input({1});
    NodeRef loss = g.softmax_xent(g.matmul(head, pooled), label);
    const Tensor mv = random_tensor({rows, dim}, rng);
    const Tensor lv = Tensor::vector({static_cast<double>(rng.index(2))});
    const GradCheckReport r = grad_check(g, loss, Feeds().set(m, mv).set(label, lv));
    EXPECT_LT(r.max_relative_error, 1e-6) << "trial " << trial << " worst " << r.worst_parameter;
  }
}
