#include "dynshot/mlp.hpp"

#include <string>

#include "dynshot/rng.hpp"

namespace dynshot {

NodeRef apply_mlp(Graph& graph, NodeRef x, std::string_view prefix, std::span<const std::size_t> hidden,
                  std::size_t out_width, ActivationKind act, std::uint64_t init_seed) {
  std::size_t in_width = graph.shape(x).back();
  NodeRef h = x;
  for (std::size_t layer = 0; layer <= hidden.size(); ++layer) {
    const bool last = layer == hidden.size();
    const std::size_t width = last ? out_width : hidden[layer];
    const std::string base = std::string(prefix) + "/layer" + std::to_string(layer);
    const std::string w_name = base + "/W";
    NodeRef w = graph.parameter(w_name, {width, in_width}, Initializer::glorot(derive_seed(init_seed, w_name)));
    NodeRef b = graph.parameter(base + "/b", {width}, Initializer::zeros());
    h = graph.add_bias(graph.matmul(w, h), b);
    if (!last) h = graph.activation(h, act);
    in_width = width;
  }
  return h;
}

}  // namespace dynshot
