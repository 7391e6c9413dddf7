#include "dynshot/assembly.hpp"

#include <algorithm>
#include <cmath>

#include "dynshot/errors.hpp"

namespace dynshot {

void ModelSpec::validate() const {
  if (feature_dim < 1) throw GraphError("feature dimension must be >= 1");
  if (max_n < 2) throw GraphError("max_n must be >= 2");
  g.validate();
  f.validate();
}

AssembledModel assemble(std::shared_ptr<ParameterRegistry> registry, std::size_t n, const ModelSpec& spec) {
  spec.validate();
  if (n < 2) {
    throw GraphError("class too small for relational stage: n=" + std::to_string(n) + " (need n >= 2)");
  }
  if (n > spec.max_n) {
    throw GraphError("support size " + std::to_string(n) + " exceeds max_n " + std::to_string(spec.max_n));
  }
  AssembledModel model;
  model.n = n;
  model.graph = std::make_shared<Graph>(std::move(registry));
  Graph& graph = *model.graph;

  model.input_c = graph.input({n, spec.feature_dim}, "input_c");
  model.input_q = graph.input({spec.feature_dim}, "input_q");
  model.embedding = build_relational(graph, model.input_c, n, spec.g, spec.init_seed);
  model.logits = build_metric(graph, model.input_q, model.embedding, spec.f, spec.init_seed);
  model.label = graph.input({1}, "label");
  model.loss = graph.softmax_xent(model.logits, model.label);
  graph.freeze();
  return model;
}

ModelCache::ModelCache(ModelSpec spec, std::shared_ptr<ParameterRegistry> registry)
    : spec_(std::move(spec)), registry_(std::move(registry)) {
  spec_.validate();
  if (!registry_) throw GraphError("model cache needs a parameter registry");
}

const AssembledModel& ModelCache::get_or_assemble(std::size_t n) {
  if (auto it = by_size_.find(n); it != by_size_.end()) return *it->second;
  auto model = std::make_unique<AssembledModel>(assemble(registry_, n, spec_));
  return *by_size_.emplace(n, std::move(model)).first->second;
}

std::vector<std::size_t> ModelCache::sizes() const {
  std::vector<std::size_t> out;
  for (const auto& [n, _] : by_size_) out.push_back(n);
  return out;
}

Census assembly_census(const AssembledModel& model) {
  const Graph& graph = *model.graph;
  if (!graph.frozen()) throw GraphError("census requires a frozen model");
  return Census{model.n, graph.instance_count("g"), graph.node_count(), graph.registry().scalar_count(),
                graph.registry().size()};
}

double predict_prob(const AssembledModel& model, const ClassSet& class_set, const Tensor& query) {
  if (class_set.n() != model.n) {
    throw GraphError("wrong assembled model; consult cache (model n=" + std::to_string(model.n) +
                     ", class set n=" + std::to_string(class_set.n()) + ")");
  }
  Feeds feeds;
  feeds.set(model.input_c, class_set.features()).set(model.input_q, query);
  Activations acts(*model.graph);
  forward(*model.graph, feeds, acts, model.logits);
  const Tensor& z = acts.value(model.logits);
  const double top = std::max(z[0], z[1]);
  const double e0 = std::exp(z[0] - top);
  const double e1 = std::exp(z[1] - top);
  return (kMemberUnit == 1 ? e1 : e0) / (e0 + e1);
}

std::vector<SizedBatch> route_batches(std::vector<Episode> episodes) {
  std::vector<SizedBatch> batches;
  for (auto& ep : episodes) {
    const std::size_t n = ep.n();
    auto it = std::find_if(batches.begin(), batches.end(), [n](const SizedBatch& b) { return b.n == n; });
    if (it == batches.end()) {
      batches.push_back(SizedBatch{n, {}});
      it = std::prev(batches.end());
    }
    it->episodes.push_back(std::move(ep));
  }
  return batches;
}

}  // namespace dynshot
