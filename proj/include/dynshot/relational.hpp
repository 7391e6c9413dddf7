#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dynshot/graph.hpp"

namespace dynshot {

// n support examples of one class, one row per example.
class ClassSet {
 public:
  ClassSet() = default;
  // Requires a rank-2 [n, s_v] tensor with n >= 2, s_v >= 1 and finite entries.
  explicit ClassSet(Tensor features);

  const Tensor& features() const { return features_; }
  std::size_t n() const { return features_.rank() ? features_.extent(0) : 0; }
  std::size_t dim() const { return features_.rank() ? features_.extent(1) : 0; }

  friend bool operator==(const ClassSet&, const ClassSet&) = default;

 private:
  Tensor features_;
};

// Architecture of the pairwise network g. Parameters live under "g/".
struct GArch {
  std::vector<std::size_t> hidden_sizes{64};
  std::size_t embed_dim = 32;
  ActivationKind activation = ActivationKind::relu;
  // Average g(a,b) and g(b,a) so each pair contributes an order-free term.
  bool symmetrize = true;

  void validate() const;
};

using IndexPair = std::pair<std::size_t, std::size_t>;

// All (i, j) with i < j < n in lexicographic order.
std::vector<IndexPair> unique_pairs(std::size_t n);

// One instance of g over two feature vectors, counted as a "g" instance.
NodeRef build_g(Graph& graph, NodeRef left, NodeRef right, const GArch& arch, std::uint64_t init_seed);

// Class embedding of an [n, s_v] class input: the element-wise mean of g over
// every unique pair of rows. The output width is arch.embed_dim for every n.
NodeRef build_relational(Graph& graph, NodeRef class_input, std::size_t n, const GArch& arch,
                         std::uint64_t init_seed);

}  // namespace dynshot
