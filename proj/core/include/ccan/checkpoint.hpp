#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ccan/network.hpp"

// Checkpoint layout (little-endian):
//   "CCAC" | u16 version | u32 config length | config text (model_config_to_text)
//   | u32 parameter count | per parameter: u16 name length | name | TensorFile record
namespace ccan {

std::vector<std::uint8_t> encode_checkpoint(const CcanModel& model);
CcanModel decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const CcanModel& model);
CcanModel load_checkpoint(const std::filesystem::path& path);

}  // namespace ccan
