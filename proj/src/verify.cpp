#include "dynshot/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include "dynshot/assembly.hpp"
#include "dynshot/kernels.hpp"
#include "dynshot/optimizer.hpp"
#include "dynshot/rng.hpp"

namespace dynshot {

namespace {

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  void fail(const std::string& why) {
    if (!passed) detail << "; ";
    passed = false;
    detail << why;
  }
};

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.normal();
  return t;
}

ModelSpec small_spec(std::uint64_t seed) {
  ModelSpec spec;
  spec.feature_dim = 8;
  spec.init_seed = seed;
  return spec;
}

std::size_t choose2(std::size_t n) { return n * (n - 1) / 2; }

void check_gradients(Outcome& out, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "verify-grad"));
  double worst = 0.0;
  for (std::size_t n = 2; n <= 5; ++n) {
    const ModelSpec spec = small_spec(derive_seed(seed, n));
    AssembledModel model = assemble(std::make_shared<ParameterRegistry>(), n, spec);
    const Tensor support = random_tensor({n, spec.feature_dim}, rng);
    const Tensor query = random_tensor({spec.feature_dim}, rng);
    const Tensor label({1}, static_cast<double>(n % 2));
    Feeds feeds;
    feeds.set(model.input_c, support).set(model.input_q, query).set(model.label, label);
    const GradCheckReport report = grad_check(*model.graph, model.loss, feeds);
    worst = std::max(worst, report.max_relative_error);
    if (report.max_relative_error >= 1e-4) {
      std::ostringstream why;
      why << "n=" << n << " max relative error " << report.max_relative_error << " at " << report.worst_parameter
          << "[" << report.worst_entry << "]";
      out.fail(why.str());
    }
  }
  if (out.passed) out.detail << "max relative error " << worst << " over n=2..5";
}

void check_collapse(Outcome& out, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "verify-collapse"));
  ModelCache cache(small_spec(seed));
  const ModelSpec& spec = cache.spec();
  const Tensor c = random_tensor({spec.feature_dim}, rng);
  const Tensor query = random_tensor({spec.feature_dim}, rng);

  cache.ensure_parameters();
  Graph pair_graph(cache.registry_handle());
  NodeRef a = pair_graph.input({spec.feature_dim}, "a");
  NodeRef b = pair_graph.input({spec.feature_dim}, "b");
  NodeRef g_out = build_g(pair_graph, a, b, spec.g, spec.init_seed);
  Feeds pair_feeds;
  pair_feeds.set(a, c).set(b, c);
  const Tensor reference = forward(pair_graph, pair_feeds, g_out).value(g_out);

  for (std::size_t n = 2; n <= 6; ++n) {
    const AssembledModel& model = cache.get_or_assemble(n);
    Tensor copies({n, spec.feature_dim});
    for (std::size_t r = 0; r < n; ++r) std::copy(c.values().begin(), c.values().end(), copies.data() + r * c.size());
    Feeds feeds;
    feeds.set(model.input_c, copies).set(model.input_q, query);
    const Tensor embedding = forward(*model.graph, feeds, model.embedding).value(model.embedding);
    if (!(embedding == reference)) {
      double diff = 0.0;
      for (std::size_t k = 0; k < reference.size(); ++k) diff = std::max(diff, std::abs(embedding[k] - reference[k]));
      std::ostringstream why;
      why << "n=" << n << " embedding of duplicated class differs from g(c,c) by " << diff;
      out.fail(why.str());
    }
  }
  if (out.passed) out.detail << "R(n copies of c) == g(c,c) bit-exactly for n=2..6";
}

void check_census(Outcome& out, std::uint64_t seed) {
  ModelCache cache(small_spec(seed));
  const Census base = assembly_census(cache.get_or_assemble(2));
  double per_pair = 0.0;
  for (std::size_t n = 2; n <= 8; ++n) {
    const Census c = assembly_census(cache.get_or_assemble(n));
    if (c.g_instances != choose2(n)) {
      out.fail("n=" + std::to_string(n) + " has " + std::to_string(c.g_instances) + " g instances, expected " +
               std::to_string(choose2(n)));
    }
    if (c.param_count != base.param_count || c.param_tensors != base.param_tensors) {
      out.fail("n=" + std::to_string(n) + " changed the parameter count");
    }
    if (n > 2) {
      const double slope = static_cast<double>(c.node_count - base.node_count) / static_cast<double>(choose2(n) - 1);
      if (n == 3) per_pair = slope;
      if (slope != per_pair) out.fail("node count not affine in C(n,2) at n=" + std::to_string(n));
    }
  }
  if (out.passed) {
    out.detail << "g instances == C(n,2) for n=2..8; " << base.param_count << " parameters throughout; "
               << per_pair << " nodes per pair";
  }
}

void check_cache(Outcome& out, std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  ModelCache cache(small_spec(seed));
  const auto t0 = clock::now();
  const AssembledModel& first = cache.get_or_assemble(4);
  const double miss = std::chrono::duration<double>(clock::now() - t0).count();
  const std::size_t nodes = first.graph->node_count();
  const std::size_t params = cache.registry().size();

  constexpr int hits = 1000;
  const AssembledModel* again = nullptr;
  const auto t1 = clock::now();
  for (int i = 0; i < hits; ++i) again = &cache.get_or_assemble(4);
  const double hit = std::chrono::duration<double>(clock::now() - t1).count() / hits;

  if (again != &first) out.fail("hit returned a different model object");
  if (first.graph->node_count() != nodes) out.fail("hit added graph nodes");
  if (cache.registry().size() != params) out.fail("hit added parameters");
  if (cache.size() != 1) out.fail("cache holds " + std::to_string(cache.size()) + " sizes after one distinct request");
  if (!(hit < 0.01 * miss)) {
    std::ostringstream why;
    why << "hit time " << hit << "s not below 1% of miss time " << miss << "s";
    out.fail(why.str());
  }
  if (out.passed) out.detail << "hit " << hit * 1e6 << "us vs miss " << miss * 1e6 << "us";
}

void check_sharing(Outcome& out, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "verify-sharing"));
  ModelCache cache(small_spec(seed));
  const std::size_t dim = cache.spec().feature_dim;
  const AssembledModel& m5 = cache.get_or_assemble(5);
  const ClassSet class5(random_tensor({5, dim}, rng));
  const Tensor query = random_tensor({dim}, rng);
  const double before = predict_prob(m5, class5, query);

  const AssembledModel& m3 = cache.get_or_assemble(3);
  std::vector<Episode> batch;
  for (int i = 0; i < 4; ++i) {
    batch.push_back(Episode{ClassSet(random_tensor({3, dim}, rng)), random_tensor({dim}, rng),
                            static_cast<std::uint8_t>(i % 2)});
  }
  batch_gradient_serial(m3, batch, cache.registry());
  OptState state(cache.registry());
  momentum_step(cache.registry(), state, OptimizerConfig{0.1, 0.9, MomentumKind::classic});
  const double after = predict_prob(m5, class5, query);
  if (before == after) out.fail("a step through model(3) left model(5)'s prediction unchanged");
  if (out.passed) out.detail << "model(5) p(member) " << before << " -> " << after << " after one step via model(3)";
}

void check_optimizer(Outcome& out) {
  auto trace = [](MomentumKind kind, double mu, std::vector<double> grads) {
    ParameterRegistry reg;
    reg.acquire("w", {1}, Initializer::constant(1.0));
    OptState state(reg);
    std::vector<std::pair<double, double>> steps;
    for (double g : grads) {
      reg.at(0).grad[0] = g;
      optimizer_step(reg, state, OptimizerConfig{0.1, mu, kind});
      steps.emplace_back(state.velocity(0)[0], reg.at(0).value[0]);
    }
    return steps;
  };
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12; };

  const auto classic = trace(MomentumKind::classic, 0.9, {2.0, 2.0});
  if (!(near(classic[0].first, 2.0) && near(classic[0].second, 0.8) && near(classic[1].first, 3.8) &&
        near(classic[1].second, 0.42))) {
    out.fail("classic momentum two-step trace deviates from (v,w) = (2,0.8), (3.8,0.42)");
  }
  const auto nesterov = trace(MomentumKind::nesterov, 0.9, {2.0, 2.0});
  if (!(near(nesterov[0].first, 2.0) && near(nesterov[0].second, 0.62) && near(nesterov[1].first, 3.8) &&
        near(nesterov[1].second, 0.078))) {
    out.fail("Nesterov two-step trace deviates from (v,w) = (2,0.62), (3.8,0.078)");
  }
  const std::vector<double> grads{0.3, -1.2, 2.5, 0.0, -0.7};
  if (trace(MomentumKind::classic, 0.0, grads) != trace(MomentumKind::nesterov, 0.0, grads)) {
    out.fail("mu=0 classic and Nesterov trajectories differ");
  }
  if (out.passed) out.detail << "two-step traces within 1e-12; mu=0 trajectories identical";
}

}  // namespace

const std::vector<std::string>& verification_groups() {
  static const std::vector<std::string> groups{"grad", "collapse", "census", "cache", "sharing", "optimizer"};
  return groups;
}

std::vector<CheckResult> run_verification(const VerifyOptions& options) {
  using clock = std::chrono::steady_clock;
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> checks{
      {"grad", [&](Outcome& o) { check_gradients(o, options.seed); }},
      {"collapse", [&](Outcome& o) { check_collapse(o, options.seed); }},
      {"census", [&](Outcome& o) { check_census(o, options.seed); }},
      {"cache", [&](Outcome& o) { check_cache(o, options.seed); }},
      {"sharing", [&](Outcome& o) { check_sharing(o, options.seed); }},
      {"optimizer", [&](Outcome& o) { check_optimizer(o); }},
  };
  const std::vector<std::string> names{"gradient check vs finite differences", "duplicate-collapse averaging",
                                       "assembly census", "model cache idempotence",
                                       "cross-size weight sharing", "optimizer oracles"};

  std::vector<CheckResult> results;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto& [group, body] = checks[i];
    if (!options.only.empty() && std::find(options.only.begin(), options.only.end(), group) == options.only.end()) {
      continue;
    }
    Outcome outcome;
    const auto start = clock::now();
    try {
      body(outcome);
    } catch (const std::exception& e) {
      outcome.fail(std::string("exception: ") + e.what());
    }
    results.push_back(CheckResult{group, names[i], outcome.passed, outcome.detail.str(),
                                  std::chrono::duration<double>(clock::now() - start).count()});
  }
  return results;
}

}  // namespace dynshot
