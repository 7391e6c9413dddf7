#include "dynshot/relational.hpp"

#include <array>

#include "dynshot/errors.hpp"
#include "dynshot/mlp.hpp"

namespace dynshot {

ClassSet::ClassSet(Tensor features) : features_(std::move(features)) {
  if (features_.rank() != 2) {
    throw DataError("class set must be [n, s_v], got " + to_string(features_.shape()));
  }
  if (n() < 2) throw DataError("class set needs at least 2 examples, got " + std::to_string(n()));
  if (dim() < 1) throw DataError("class set feature dimension must be >= 1");
  if (!features_.all_finite()) throw DataError("class set contains non-finite features");
}

void GArch::validate() const {
  if (embed_dim < 1) throw GraphError("g embed_dim must be >= 1");
  if (hidden_sizes.empty()) throw GraphError("g needs at least one hidden layer");
  for (auto h : hidden_sizes) {
    if (h < 1) throw GraphError("g hidden widths must be >= 1");
  }
}

std::vector<IndexPair> unique_pairs(std::size_t n) {
  if (n < 2) {
    throw GraphError("class too small for relational stage: n=" + std::to_string(n) + " (need n >= 2)");
  }
  std::vector<IndexPair> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  return pairs;
}

NodeRef build_g(Graph& graph, NodeRef left, NodeRef right, const GArch& arch, std::uint64_t init_seed) {
  arch.validate();
  const Shape& sl = graph.shape(left);
  if (sl.size() != 1 || graph.shape(right) != sl) {
    throw ShapeError("g expects two equal-length vectors, got " + to_string(sl) + " and " +
                     to_string(graph.shape(right)));
  }
  graph.count_instance("g");
  auto one_way = [&](NodeRef a, NodeRef b) {
    const std::array<NodeRef, 2> parts{a, b};
    return apply_mlp(graph, graph.concat(parts), "g", arch.hidden_sizes, arch.embed_dim, arch.activation,
                     init_seed);
  };
  NodeRef forward_dir = one_way(left, right);
  if (!arch.symmetrize) return forward_dir;
  const std::array<NodeRef, 2> both{forward_dir, one_way(right, left)};
  return graph.mean_of(both);
}

NodeRef build_relational(Graph& graph, NodeRef class_input, std::size_t n, const GArch& arch,
                         std::uint64_t init_seed) {
  const Shape& shape = graph.shape(class_input);
  if (shape.size() != 2 || shape[0] != n) {
    throw ShapeError("relational stage expects a [" + std::to_string(n) + ", s_v] class input, got " +
                     to_string(shape));
  }
  std::vector<NodeRef> outputs;
  for (const auto& [i, j] : unique_pairs(n)) {
    NodeRef left = graph.slice_row(class_input, i);
    NodeRef right = graph.slice_row(class_input, j);
    outputs.push_back(build_g(graph, left, right, arch, init_seed));
  }
  return graph.mean_of(outputs);
}

}  // namespace dynshot
