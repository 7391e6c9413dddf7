#include "dynshot/metric.hpp"

#include <array>

#include "dynshot/errors.hpp"
#include "dynshot/mlp.hpp"

namespace dynshot {

void FArch::validate() const {
  if (hidden_sizes.empty()) throw GraphError("f needs at least one hidden layer");
  for (auto h : hidden_sizes) {
    if (h < 1) throw GraphError("f hidden widths must be >= 1");
  }
}

NodeRef build_metric(Graph& graph, NodeRef query, NodeRef class_embedding, const FArch& arch,
                     std::uint64_t init_seed) {
  arch.validate();
  if (graph.shape(query).size() != 1 || graph.shape(class_embedding).size() != 1) {
    throw ShapeError("f expects vector inputs, got query " + to_string(graph.shape(query)) + " and embedding " +
                     to_string(graph.shape(class_embedding)));
  }
  graph.count_instance("f");
  const std::array<NodeRef, 2> parts{query, class_embedding};
  return apply_mlp(graph, graph.concat(parts), "f", arch.hidden_sizes, 2, arch.activation, init_seed);
}

}  // namespace dynshot
