#pragma once

#include <filesystem>
#include <vector>

#include "svddlab/encoder.hpp"

namespace svddlab {

// Checkpoint layout (all integers little-endian):
//   "SVDP" | u16 version | repeated until EOF:
//   u16 name_len | name bytes | u8 rank | u32 dim * rank | f64 values (row-major)
inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

}  // namespace svddlab
