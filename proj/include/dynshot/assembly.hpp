#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "dynshot/episode.hpp"
#include "dynshot/graph.hpp"
#include "dynshot/metric.hpp"
#include "dynshot/relational.hpp"

namespace dynshot {

struct ModelSpec {
  std::size_t feature_dim = 32;
  GArch g;
  FArch f;
  std::uint64_t init_seed = 1;
  // Largest support size the cache will assemble; graph size grows with C(n,2).
  std::size_t max_n = 32;

  void validate() const;
};

// A frozen graph specialised to support size n, over a registry it shares with
// every other size.
struct AssembledModel {
  std::size_t n = 0;
  std::shared_ptr<Graph> graph;
  NodeRef input_c;    // [n, s_v]
  NodeRef input_q;    // [s_v]
  NodeRef embedding;  // [d_e]
  NodeRef logits;     // [2]
  NodeRef label;      // [1], fed 0 or 1
  NodeRef loss;       // scalar cross-entropy
};

// Builds the size-n model: class and query inputs, one g instance per unique
// pair of rows, their element-wise average, f over (query, average), and the
// two-unit loss head. The graph is frozen on return.
AssembledModel assemble(std::shared_ptr<ParameterRegistry> registry, std::size_t n, const ModelSpec& spec);

// Size-indexed lookup table of assembled models over one parameter registry.
// No eviction. Misses must be serialised by the caller.
class ModelCache {
 public:
  explicit ModelCache(ModelSpec spec,
                      std::shared_ptr<ParameterRegistry> registry = std::make_shared<ParameterRegistry>());

  const AssembledModel& get_or_assemble(std::size_t n);
  // Registers every parameter (by assembling the smallest model) without training.
  void ensure_parameters() { get_or_assemble(2); }

  bool contains(std::size_t n) const { return by_size_.contains(n); }
  std::vector<std::size_t> sizes() const;
  std::size_t size() const { return by_size_.size(); }

  const ModelSpec& spec() const { return spec_; }
  ParameterRegistry& registry() { return *registry_; }
  const ParameterRegistry& registry() const { return *registry_; }
  const std::shared_ptr<ParameterRegistry>& registry_handle() const { return registry_; }

 private:
  ModelSpec spec_;
  std::shared_ptr<ParameterRegistry> registry_;
  std::map<std::size_t, std::unique_ptr<AssembledModel>> by_size_;
};

struct Census {
  std::size_t n = 0;
  std::size_t g_instances = 0;
  std::size_t node_count = 0;
  std::size_t param_count = 0;    // trainable scalars in the registry
  std::size_t param_tensors = 0;  // named registry entries
};

Census assembly_census(const AssembledModel& model);

// Membership probability softmax(logits)[kMemberUnit].
double predict_prob(const AssembledModel& model, const ClassSet& class_set, const Tensor& query);

struct SizedBatch {
  std::size_t n = 0;
  std::vector<Episode> episodes;
};

// Stable partition of episodes by support size, groups ordered by first appearance.
std::vector<SizedBatch> route_batches(std::vector<Episode> episodes);

}  // namespace dynshot
