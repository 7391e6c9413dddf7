#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dynshot/graph.hpp"

namespace dynshot {

// "DYNP" parameter checkpoint, little-endian:
//   magic "DYNP" | u32 version (=1) | u32 count
//   count x { u16 name_len | name bytes (UTF-8) | u8 rank | u32 extents[rank] | f64 data[numel] }
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
};

std::vector<std::uint8_t> encode_checkpoint(const ParameterRegistry& registry);
std::vector<NamedTensor> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const ParameterRegistry& registry, const std::filesystem::path& path);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into an existing registry. Every registry entry must be
// present with a matching shape, and the checkpoint may not carry extra names.
void apply_checkpoint(ParameterRegistry& registry, const std::vector<NamedTensor>& tensors);

}  // namespace dynshot
