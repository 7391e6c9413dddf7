#pragma once

#include <vector>

#include "dynshot/graph.hpp"

namespace dynshot {

enum class MomentumKind { classic, nesterov };

std::string_view to_string(MomentumKind kind);
MomentumKind parse_momentum(std::string_view text);

struct OptimizerConfig {
  double alpha = 0.001;  // learning rate
  double mu = 0.9;       // momentum coefficient
  MomentumKind kind = MomentumKind::classic;

  void validate() const;
};

// Velocity buffers, zero-initialised and shape-matched to a registry.
class OptState {
 public:
  OptState() = default;
  explicit OptState(const ParameterRegistry& registry);

  std::size_t size() const { return velocity_.size(); }
  Tensor& velocity(std::size_t i) { return velocity_.at(i); }
  const Tensor& velocity(std::size_t i) const { return velocity_.at(i); }
  // Throws unless every buffer mirrors the registry entry of the same index.
  void check(const ParameterRegistry& registry) const;

 private:
  std::vector<Tensor> velocity_;
};

// v <- mu*v + grad;  w <- w - alpha*v
void momentum_step(ParameterRegistry& registry, OptState& state, const OptimizerConfig& cfg);
// v <- mu*v + grad;  w <- w - alpha*(grad + mu*v)
void nesterov_step(ParameterRegistry& registry, OptState& state, const OptimizerConfig& cfg);
void optimizer_step(ParameterRegistry& registry, OptState& state, const OptimizerConfig& cfg);

}  // namespace dynshot
