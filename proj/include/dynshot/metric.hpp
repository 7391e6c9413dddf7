#pragma once

#include <cstdint>
#include <vector>

#include "dynshot/graph.hpp"

namespace dynshot {

// Output unit convention shared by the loss wiring, trainer and CLI.
inline constexpr std::size_t kNonMemberUnit = 0;
inline constexpr std::size_t kMemberUnit = 1;

// Architecture of the metric network f. Parameters live under "f/"; the output
// layer always has two units.
struct FArch {
  std::vector<std::size_t> hidden_sizes{64};
  ActivationKind activation = ActivationKind::relu;

  void validate() const;
};

// Two membership logits from the raw query vector and a class embedding.
NodeRef build_metric(Graph& graph, NodeRef query, NodeRef class_embedding, const FArch& arch,
                     std::uint64_t init_seed);

}  // namespace dynshot
