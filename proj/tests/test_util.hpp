#pragma once

#include <vector>

#include "dynshot/graph.hpp"
#include "dynshot/rng.hpp"

namespace dynshot::test {

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

inline void set_values(ParameterRegistry& reg, const std::string& name, std::vector<double> values) {
  Tensor& t = reg.at(name).value;
  t = Tensor(t.shape(), std::move(values));
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
  return d;
}

}  // namespace dynshot::test
