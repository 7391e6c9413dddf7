#pragma once

#include <span>

#include "dynshot/assembly.hpp"
#include "dynshot/episode.hpp"

namespace dynshot {

// Episode-level kernels. Each has a serial reference and an OpenMP version that
// produces bit-identical results: per-episode gradients are computed
// independently and reduced in episode order.
enum class Execution { serial, parallel };

std::string_view to_string(Execution exec);
Execution parse_execution(std::string_view text);
int parallel_threads();

// Writes d(mean episode loss)/d(theta) into the registry gradients and returns
// the mean loss. Every episode must have support size model.n.
double batch_gradient_serial(const AssembledModel& model, std::span<const Episode> episodes,
                             ParameterRegistry& registry);
double batch_gradient_parallel(const AssembledModel& model, std::span<const Episode> episodes,
                               ParameterRegistry& registry);
double batch_gradient(const AssembledModel& model, std::span<const Episode> episodes, ParameterRegistry& registry,
                      Execution exec);

// Episodes where argmax(logits) equals the label; ties go to the non-member unit.
std::size_t count_correct_serial(const AssembledModel& model, std::span<const Episode> episodes);
std::size_t count_correct_parallel(const AssembledModel& model, std::span<const Episode> episodes);
std::size_t count_correct(const AssembledModel& model, std::span<const Episode> episodes, Execution exec);

}  // namespace dynshot
