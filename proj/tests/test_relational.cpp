#include <gtest/gtest.h>

#include <numeric>

#include "dynshot/errors.hpp"
#include "dynshot/mlp.hpp"
#include "dynshot/relational.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace dynshot;
using dynshot::test::random_tensor;
using dynshot::test::set_values;

namespace {

GArch small_arch(bool symmetrize) {
  GArch arch;
  arch.hidden_sizes = {3};
  arch.embed_dim = 2;
  arch.symmetrize = symmetrize;
  return arch;
}

// Weights for the hand-worked g example (s_v = 2, hidden 3, d_e = 2).
void load_hand_weights(ParameterRegistry& reg) {
  set_values(reg, "g/layer0/W", {0.5, -1, 0.25, 0, 0, 0.5, -0.5, 1, -0.25, 0.25, 1, 0.5});
  set_values(reg, "g/layer0/b", {0.1, -0.2, 0});
  set_values(reg, "g/layer1/W", {1, -0.5, 0.25, 0.5, 1, -1});
  set_values(reg, "g/layer1/b", {0.05, -0.1});
}

struct PairGraph {
  Graph graph;
  NodeRef a, b, out;
  PairGraph(std::size_t dim, const GArch& arch, std::shared_ptr<ParameterRegistry> reg = nullptr)
      : graph(reg ? reg : std::make_shared<ParameterRegistry>()) {
    a = graph.input({dim});
    b = graph.input({dim});
    out = build_g(graph, a, b, arch, 1);
  }
  Tensor eval(const Tensor& x, const Tensor& y) {
    return forward(graph, Feeds().set(a, x).set(b, y), out).value(out);
  }
};

struct ClassGraph {
  Graph graph;
  NodeRef c, out;
  ClassGraph(std::size_t n, std::size_t dim, const GArch& arch, std::shared_ptr<ParameterRegistry> reg)
      : graph(std::move(reg)) {
    c = graph.input({n, dim});
    out = build_relational(graph, c, n, arch, 1);
  }
  Tensor eval(const Tensor& x) { return forward(graph, Feeds().set(c, x), out).value(out); }
};

}  // namespace

TEST(UniquePairs, EnumeratesLexicographically) {
  EXPECT_EQ(unique_pairs(2), (std::vector<IndexPair>{{0, 1}}));
  EXPECT_EQ(unique_pairs(4), (std::vector<IndexPair>{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}));
  EXPECT_EQ(unique_pairs(5).size(), 10u);
  for (std::size_t n = 2; n <= 12; ++n) EXPECT_EQ(unique_pairs(n).size(), n * (n - 1) / 2);
  EXPECT_THROW(unique_pairs(1), GraphError);
  EXPECT_THROW(unique_pairs(0), GraphError);
}

TEST(ClassSetType, ValidatesShapeAndValues) {
  EXPECT_THROW(ClassSet(Tensor({1, 4})), DataError);
  EXPECT_THROW(ClassSet(Tensor({4})), DataError);
  Tensor bad({2, 2});
  bad[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(ClassSet{bad}, DataError);
  EXPECT_EQ(ClassSet(Tensor({3, 5})).n(), 3u);
}

TEST(BuildG, HandWorkedExample) {
  PairGraph pg(2, small_arch(false));
  load_hand_weights(pg.graph.registry());
  const Tensor a = Tensor::vector({1, 2});
  const Tensor b = Tensor::vector({0.5, -1});
  // hidden relu(W0 [a;b] + b0) = (0, 0.05, 0.125); output (9/80, -7/20).
  const Tensor ab = pg.eval(a, b);
  EXPECT_NEAR(ab[0], 0.1125, 1e-15);
  EXPECT_NEAR(ab[1], -0.35, 1e-15);
  const Tensor ba = pg.eval(b, a);
  EXPECT_NEAR(ba[0], 1.65625, 1e-15);
  EXPECT_NEAR(ba[1], -0.125, 1e-15);

  PairGraph sym(2, small_arch(true));
  load_hand_weights(sym.graph.registry());
  const Tensor s = sym.eval(a, b);
  EXPECT_NEAR(s[0], 0.884375, 1e-15);
  EXPECT_NEAR(s[1], -0.2375, 1e-15);
}

TEST(BuildG, InstancesShareOneParameterSet) {
  Graph g;
  NodeRef x = g.input({4});
  NodeRef y = g.input({4});
  const GArch arch;
  build_g(g, x, y, arch, 1);
  const std::size_t params = g.registry().size();
  build_g(g, y, x, arch, 1);
  build_g(g, x, x, arch, 1);
  EXPECT_EQ(g.registry().size(), params);
  EXPECT_EQ(g.instance_count("g"), 3u);
  EXPECT_EQ(g.shape(build_g(g, x, y, arch, 1)), (Shape{arch.embed_dim}));
}

TEST(BuildG, SymmetrizedIsExactlyOrderFree) {
  Rng rng(20);
  PairGraph pg(6, GArch{});
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor a = random_tensor({6}, rng);
    const Tensor b = random_tensor({6}, rng);
    EXPECT_EQ(pg.eval(a, b), pg.eval(b, a));
  }
}

TEST(BuildRelational, PairCountAndWidthIndependentOfN) {
  auto reg = std::make_shared<ParameterRegistry>();
  const GArch arch;
  std::size_t params = 0;
  for (std::size_t n = 2; n <= 7; ++n) {
    ClassGraph cg(n, 5, arch, reg);
    EXPECT_EQ(cg.graph.instance_count("g"), n * (n - 1) / 2);
    EXPECT_EQ(cg.graph.shape(cg.out), (Shape{arch.embed_dim}));
    if (n == 2) params = reg->size();
    EXPECT_EQ(reg->size(), params);
  }
}

TEST(BuildRelational, RejectsMismatchedInput) {
  Graph g;
  NodeRef c = g.input({3, 4});
  EXPECT_THROW(build_relational(g, c, 4, GArch{}, 1), ShapeError);
  NodeRef one = g.input({1, 4});
  EXPECT_THROW(build_relational(g, one, 1, GArch{}, 1), GraphError);
}

TEST(BuildRelational, TwoExamplesIsASingleG) {
  Rng rng(21);
  auto reg = std::make_shared<ParameterRegistry>();
  ClassGraph cg(2, 4, GArch{}, reg);
  PairGraph pg(4, GArch{}, reg);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor c = random_tensor({2, 4}, rng);
    const Tensor a = Tensor::vector(oracle::row(c, 0));
    const Tensor b = Tensor::vector(oracle::row(c, 1));
    EXPECT_EQ(cg.eval(c), pg.eval(a, b));
  }
}

TEST(BuildRelational, MatchesPairLoopOracle) {
  Rng rng(22);
  for (bool sym : {true, false}) {
    GArch arch;
    arch.symmetrize = sym;
    ModelSpec spec;
    spec.g = arch;
    auto reg = std::make_shared<ParameterRegistry>();
    for (std::size_t n = 2; n <= 6; ++n) {
      ClassGraph cg(n, 5, arch, reg);
      for (int trial = 0; trial < 10; ++trial) {
        const Tensor c = random_tensor({n, 5}, rng);
        EXPECT_LT(oracle::max_abs_diff(oracle::embedding(*reg, spec, c), cg.eval(c)), 1e-12);
      }
    }
  }
}

TEST(BuildRelational, DuplicateExamplesCollapseToGcc) {
  Rng rng(23);
  auto reg = std::make_shared<ParameterRegistry>();
  PairGraph pg(6, GArch{}, reg);
  for (std::size_t n = 2; n <= 6; ++n) {
    ClassGraph cg(n, 6, GArch{}, reg);
    for (int trial = 0; trial < 10; ++trial) {
      const Tensor c = random_tensor({6}, rng, 3.0);
      Tensor copies({n, 6});
      for (std::size_t r = 0; r < n; ++r) std::copy(c.values().begin(), c.values().end(), copies.data() + r * 6);
      EXPECT_EQ(cg.eval(copies), pg.eval(c, c)) << "n=" << n;
    }
  }
}

#ifdef DYNSHOT_MUTATION_HOOKS
TEST(BuildRelational, SumMutationBreaksCollapse) {
  Rng rng(24);
  auto reg = std::make_shared<ParameterRegistry>();
  PairGraph pg(4, GArch{}, reg);
  ClassGraph cg(3, 4, GArch{}, reg);
  const Tensor c = random_tensor({4}, rng);
  Tensor copies({3, 4});
  for (std::size_t r = 0; r < 3; ++r) std::copy(c.values().begin(), c.values().end(), copies.data() + r * 4);
  const Tensor reference = pg.eval(c, c);
  dynshot::testing::set_mean_as_sum(true);
  const Tensor mutated = cg.eval(copies);
  dynshot::testing::set_mean_as_sum(false);
  EXPECT_NE(mutated, reference);
  EXPECT_EQ(cg.eval(copies), reference);
}
#endif

TEST(BuildRelational, PermutationInvariantWhenSymmetrized) {
  Rng rng(25);
  auto reg = std::make_shared<ParameterRegistry>();
  for (std::size_t n = 2; n <= 6; ++n) {
    ClassGraph cg(n, 5, GArch{}, reg);
    for (int trial = 0; trial < 10; ++trial) {
      const Tensor c = random_tensor({n, 5}, rng);
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
      Tensor shuffled({n, 5});
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = 0; k < 5; ++k) shuffled.at(r, k) = c.at(perm[r], k);
      }
      EXPECT_LT(dynshot::test::max_abs_diff(cg.eval(c), cg.eval(shuffled)), 1e-12);
    }
  }
}

// The gradient of a loss through the tied relational stage equals the sum of the
// gradients of an untied copy where each pair owns a private g.
TEST(BuildRelational, TiedGradientIsSumOverPairs) {
  Rng rng(26);
  const GArch arch = small_arch(false);
  for (std::size_t n = 2; n <= 5; ++n) {
    Graph tied;
    NodeRef c = tied.input({n, 3});
    NodeRef label = tied.input({1});
    NodeRef e = build_relational(tied, c, n, arch, 7);
    NodeRef head = tied.parameter("head", {2, arch.embed_dim}, Initializer::glorot(8));
    NodeRef loss = tied.softmax_xent(tied.matmul(head, e), label);

    Graph untied;
    NodeRef uc = untied.input({n, 3});
    NodeRef ulabel = untied.input({1});
    std::vector<NodeRef> outs;
    const auto pairs = unique_pairs(n);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      NodeRef parts[] = {untied.slice_row(uc, pairs[p].first), untied.slice_row(uc, pairs[p].second)};
      outs.push_back(apply_mlp(untied, untied.concat(parts), "g" + std::to_string(p), arch.hidden_sizes,
                               arch.embed_dim, arch.activation, 7));
    }
    NodeRef uhead = untied.parameter("head", {2, arch.embed_dim}, Initializer::zeros());
    NodeRef uloss = untied.softmax_xent(untied.matmul(uhead, untied.mean_of(outs)), ulabel);

    const ParameterRegistry& tr = tied.registry();
    untied.registry().at("head").value = tr.at("head").value;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      for (const char* suffix : {"/layer0/W", "/layer0/b", "/layer1/W", "/layer1/b"}) {
        untied.registry().at("g" + std::to_string(p) + suffix).value = tr.at(std::string("g") + suffix).value;
      }
    }

    const Tensor cv = random_tensor({n, 3}, rng);
    const Tensor lv = Tensor::vector({1});
    Activations ta = forward(tied, Feeds().set(c, cv).set(label, lv));
    Activations ua = forward(untied, Feeds().set(uc, cv).set(ulabel, lv));
    ASSERT_NEAR(ta.value(loss)[0], ua.value(uloss)[0], 1e-14);
    backward(tied, ta, loss);
    backward(untied, ua, uloss);
    for (const char* suffix : {"/layer0/W", "/layer0/b", "/layer1/W", "/layer1/b"}) {
      const Tensor& gt = tr.at(std::string("g") + suffix).grad;
      for (std::size_t k = 0; k < gt.size(); ++k) {
        double sum = 0.0;
        for (std::size_t p = 0; p < pairs.size(); ++p) sum += untied.registry().at("g" + std::to_string(p) + suffix).grad[k];
        EXPECT_NEAR(gt[k], sum, 1e-10) << "n=" << n << " " << suffix << "[" << k << "]";
      }
    }
  }
}
