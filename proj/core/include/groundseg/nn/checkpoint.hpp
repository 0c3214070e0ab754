#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "groundseg/nn/models.hpp"

namespace groundseg::nn {

struct CheckpointInfo {
  std::uint64_t seed = 0;
  int epoch = 0;
  std::map<std::string, std::string> config;
};

/// Text header (format tag, seed, epoch, one `config key=value` line per
/// config entry, one `tensor name shape` line per stored tensor, then
/// `end_header`) followed by every parameter value and then every buffer
/// as little-endian float64, in the model's layer order.
void save_checkpoint(const std::filesystem::path& path, Model& model, std::uint64_t seed, int epoch);

/// Restores parameters and buffers. Throws ParseError if the tensor list
/// does not match the model.
CheckpointInfo load_checkpoint(const std::filesystem::path& path, Model& model);

/// Reads only the header.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

}  // namespace groundseg::nn
