#include "dynshot/optimizer.hpp"

#include "dynshot/errors.hpp"

namespace dynshot {

std::string_view to_string(MomentumKind kind) { return kind == MomentumKind::classic ? "classic" : "nesterov"; }

MomentumKind parse_momentum(std::string_view text) {
  if (text == "classic") return MomentumKind::classic;
  if (text == "nesterov") return MomentumKind::nesterov;
  throw std::invalid_argument("unknown momentum kind '" + std::string(text) + "' (expected classic or nesterov)");
}

void OptimizerConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  if (!(mu >= 0.0 && mu < 1.0)) throw std::invalid_argument("mu must lie in [0, 1)");
}

OptState::OptState(const ParameterRegistry& registry) {
  velocity_.reserve(registry.size());
  for (const auto& p : registry) velocity_.emplace_back(p.value.shape(), 0.0);
}

void OptState::check(const ParameterRegistry& registry) const {
  if (velocity_.size() != registry.size()) {
    throw GraphError("optimizer state tracks " + std::to_string(velocity_.size()) + " parameters, registry has " +
                     std::to_string(registry.size()));
  }
  for (std::size_t i = 0; i < velocity_.size(); ++i) {
    if (velocity_[i].shape() != registry.at(i).value.shape()) {
      throw GraphError("optimizer state shape drift on '" + registry.at(i).name + "'");
    }
  }
}

void momentum_step(ParameterRegistry& registry, OptState& state, const OptimizerConfig& cfg) {
  state.check(registry);
  for (std::size_t i = 0; i < registry.size(); ++i) {
    Parameter& p = registry.at(i);
    Tensor& v = state.velocity(i);
    for (std::size_t e = 0; e < v.size(); ++e) {
      v[e] = cfg.mu * v[e] + p.grad[e];
      p.value[e] -= cfg.alpha * v[e];
    }
  }
}

void nesterov_step(ParameterRegistry& registry, OptState& state, const OptimizerConfig& cfg) {
  state.check(registry);
  for (std::size_t i = 0; i < registry.size(); ++i) {
    Parameter& p = registry.at(i);
    Tensor& v = state.velocity(i);
    for (std::size_t e = 0; e < v.size(); ++e) {
      v[e] = cfg.mu * v[e] + p.grad[e];
      p.value[e] -= cfg.alpha * (p.grad[e] + cfg.mu * v[e]);
    }
  }
}

void optimizer_step(ParameterRegistry& registry, OptState& state, const OptimizerConfig& cfg) {
  if (cfg.kind == MomentumKind::classic) {
    momentum_step(registry, state, cfg);
  } else {
    nesterov_step(registry, state, cfg);
  }
}

}  // namespace dynshot
