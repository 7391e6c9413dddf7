#include "dynshot/kernels.hpp"

#include <algorithm>
#include <exception>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dynshot/errors.hpp"

namespace dynshot {

namespace {

// Exceptions may not cross an OpenMP region boundary; keep the first and rethrow after.
class ErrorSlot {
 public:
  template <typename F>
  void guard(F&& body) {
    try {
      body();
    } catch (...) {
#pragma omp critical(dynshot_error_slot)
      if (!error_) error_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::exception_ptr error_;
};

// Bounds the per-episode gradient buffers held at once by the parallel path.
constexpr std::size_t kGradientChunk = 64;

void check_sizes(const AssembledModel& model, std::span<const Episode> episodes) {
  for (const auto& ep : episodes) {
    if (ep.n() != model.n) {
      throw GraphError("wrong assembled model; consult cache (model n=" + std::to_string(model.n) +
                       ", episode n=" + std::to_string(ep.n()) + ")");
    }
  }
}

double episode_gradient(const AssembledModel& model, const Episode& ep, Activations& acts, GradientBuffer& grads) {
  const Tensor label({1}, static_cast<double>(ep.label));
  Feeds feeds;
  feeds.set(model.input_c, ep.support.features()).set(model.input_q, ep.query).set(model.label, label);
  forward(*model.graph, feeds, acts, model.loss);
  grads.zero();
  backward_into(*model.graph, acts, model.loss, grads);
  return acts.value(model.loss)[0];
}

bool episode_correct(const AssembledModel& model, const Episode& ep, Activations& acts) {
  Feeds feeds;
  feeds.set(model.input_c, ep.support.features()).set(model.input_q, ep.query);
  forward(*model.graph, feeds, acts, model.logits);
  const Tensor& z = acts.value(model.logits);
  const std::size_t predicted = z[kMemberUnit] > z[kNonMemberUnit] ? kMemberUnit : kNonMemberUnit;
  return predicted == (ep.label ? kMemberUnit : kNonMemberUnit);
}

double finish_batch(ParameterRegistry& registry, const GradientBuffer& total, double loss_sum, std::size_t count) {
  const double scale = static_cast<double>(count);
  for (std::size_t i = 0; i < registry.size(); ++i) {
    Tensor& g = registry.at(i).grad;
    for (std::size_t e = 0; e < g.size(); ++e) g[e] = total[i][e] / scale;
  }
  return loss_sum / scale;
}

}  // namespace

std::string_view to_string(Execution exec) { return exec == Execution::serial ? "serial" : "parallel"; }

Execution parse_execution(std::string_view text) {
  if (text == "serial") return Execution::serial;
  if (text == "parallel") return Execution::parallel;
  throw std::invalid_argument("unknown execution mode '" + std::string(text) + "' (expected serial or parallel)");
}

int parallel_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

double batch_gradient_serial(const AssembledModel& model, std::span<const Episode> episodes,
                             ParameterRegistry& registry) {
  if (episodes.empty()) throw GraphError("empty batch");
  check_sizes(model, episodes);
  Activations acts(*model.graph);
  GradientBuffer total(registry);
  GradientBuffer one(registry);
  double loss_sum = 0.0;
  for (const auto& ep : episodes) {
    loss_sum += episode_gradient(model, ep, acts, one);
    total.add(one);
  }
  return finish_batch(registry, total, loss_sum, episodes.size());
}

double batch_gradient_parallel(const AssembledModel& model, std::span<const Episode> episodes,
                               ParameterRegistry& registry) {
  if (episodes.empty()) throw GraphError("empty batch");
  check_sizes(model, episodes);
  GradientBuffer total(registry);
  const std::size_t chunk = std::min(kGradientChunk, episodes.size());
  std::vector<GradientBuffer> grads(chunk, GradientBuffer(registry));
  std::vector<double> losses(chunk, 0.0);
  double loss_sum = 0.0;

  for (std::size_t start = 0; start < episodes.size(); start += chunk) {
    const auto count = static_cast<std::ptrdiff_t>(std::min(chunk, episodes.size() - start));
    ErrorSlot error;
#pragma omp parallel
    {
      Activations acts(*model.graph);
#pragma omp for schedule(static)
      for (std::ptrdiff_t k = 0; k < count; ++k) {
        error.guard([&] { losses[k] = episode_gradient(model, episodes[start + k], acts, grads[k]); });
      }
    }
    error.rethrow();
    for (std::ptrdiff_t k = 0; k < count; ++k) {
      loss_sum += losses[k];
      total.add(grads[k]);
    }
  }
  return finish_batch(registry, total, loss_sum, episodes.size());
}

double batch_gradient(const AssembledModel& model, std::span<const Episode> episodes, ParameterRegistry& registry,
                      Execution exec) {
  return exec == Execution::serial ? batch_gradient_serial(model, episodes, registry)
                                   : batch_gradient_parallel(model, episodes, registry);
}

std::size_t count_correct_serial(const AssembledModel& model, std::span<const Episode> episodes) {
  check_sizes(model, episodes);
  Activations acts(*model.graph);
  std::size_t correct = 0;
  for (const auto& ep : episodes) correct += episode_correct(model, ep, acts);
  return correct;
}

std::size_t count_correct_parallel(const AssembledModel& model, std::span<const Episode> episodes) {
  check_sizes(model, episodes);
  const auto count = static_cast<std::ptrdiff_t>(episodes.size());
  std::size_t correct = 0;
  ErrorSlot error;
#pragma omp parallel reduction(+ : correct)
  {
    Activations acts(*model.graph);
#pragma omp for schedule(static)
    for (std::ptrdiff_t k = 0; k < count; ++k) {
      error.guard([&] { correct += episode_correct(model, episodes[k], acts); });
    }
  }
  error.rethrow();
  return correct;
}

std::size_t count_correct(const AssembledModel& model, std::span<const Episode> episodes, Execution exec) {
  return exec == Execution::serial ? count_correct_serial(model, episodes) : count_correct_parallel(model, episodes);
}

}  // namespace dynshot
