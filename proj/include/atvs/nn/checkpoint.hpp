#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "atvs/nn/config.hpp"

namespace atvs::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Learnable parameters keyed by module path plus the stage that produced them.
/// Layout on disk is documented in docs/checkpoint_format.md.
struct Checkpoint {
  int stage = 1;
  NetworkConfig config;
  std::vector<std::pair<std::string, torch::Tensor>> parameters;  // float32, CPU, contiguous
};

/// Snapshot of every parameter of `module` (copied, detached).
Checkpoint make_checkpoint(const torch::nn::Module& module, const NetworkConfig& config, int stage);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

/// Throws ParseError on a bad magic, an unknown version or a truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies the checkpoint values into the parameters of `module` named
/// `prefix + name`. Every checkpoint entry must match a parameter of identical shape;
/// throws std::invalid_argument naming the first offending entry. Parameters of the
/// module that the checkpoint does not cover are left untouched and returned.
std::vector<std::string> apply_checkpoint(torch::nn::Module& module, const Checkpoint& checkpoint,
                                          const std::string& prefix = "");

/// Hash of the raw bytes of every parameter whose name starts with `prefix`.
std::uint64_t parameter_hash(const torch::nn::Module& module, const std::string& prefix = "");

}  // namespace atvs::nn
