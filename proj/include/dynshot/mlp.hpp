#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "dynshot/graph.hpp"

namespace dynshot {

// Dense stack over a vector input. Parameters are "<prefix>/layer<K>/{W,b}" with
// W shaped [out, in]; hidden layers apply `act`, the last layer is linear.
// Weights come from parameter(), so every call with one prefix shares storage.
NodeRef apply_mlp(Graph& graph, NodeRef x, std::string_view prefix, std::span<const std::size_t> hidden,
                  std::size_t out_width, ActivationKind act, std::uint64_t init_seed);

}  // namespace dynshot
