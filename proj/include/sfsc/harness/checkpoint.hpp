#pragma once

#include <cstdint>
#include <string>

#include <torch/torch.h>

#include "sfsc/harness/config.hpp"

namespace sfsc::harness {

struct CheckpointMeta {
    RunConfig config;
    int64_t epoch = 0;
};

/// Serializes model parameters, optimizer state (when given), the run
/// configuration and the epoch counter into one archive file.
void save_checkpoint(const std::string& path, torch::nn::Module& model,
                     torch::optim::Optimizer* optimizer, const RunConfig& config, int64_t epoch);

/// Restores parameters into `model` (and optimizer state into `optimizer`
/// when given). Throws if the stored network configuration disagrees with
/// the model the caller constructed.
CheckpointMeta load_checkpoint(const std::string& path, torch::nn::Module& model,
                               torch::optim::Optimizer* optimizer,
                               const semnet::NetworkConfig& expected_network);

/// Reads only the stored metadata, without touching any parameters.
CheckpointMeta peek_checkpoint(const std::string& path);

}  // namespace sfsc::harness
