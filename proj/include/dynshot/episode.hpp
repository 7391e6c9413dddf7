#pragma once

#include <cstdint>

#include "dynshot/relational.hpp"
#include "dynshot/tensor.hpp"

namespace dynshot {

// One 1-way decision: is `query` a member of the class shown by `support`?
struct Episode {
  ClassSet support;
  Tensor query;            // [s_v]
  std::uint8_t label = 0;  // 1 member, 0 non-member

  std::size_t n() const { return support.n(); }
};

}  // namespace dynshot
