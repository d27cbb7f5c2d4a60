#pragma once

#include <cstdint>

#include <torch/torch.h>

#include "sfsc/channel.hpp"
#include "sfsc/harness/config.hpp"
#include "sfsc/harness/dataset.hpp"
#include "sfsc/harness/pipeline.hpp"
#include "sfsc/harness/train.hpp"
#include "sfsc/semnet.hpp"

namespace sfsc::harness {

/// Analog joint source-channel coder: the encoder maps an image directly to a
/// unit-power I/Q frame, the decoder maps a received frame back to pixels.
/// Shares one weight set across the ground and on-board codecs.
class DeepJsccModelImpl : public torch::nn::Module {
public:
    explicit DeepJsccModelImpl(const semnet::NetworkConfig& cfg);

    /// image [B, 3, S, S] -> unit-power frame of M complex symbols.
    channel::SymbolFrame encode(const torch::Tensor& images);
    /// frame [B, M, 2] -> image [B, 3, S, S].
    torch::Tensor decode(const channel::SymbolFrame& frame);

    semnet::NetworkConfig cfg;

private:
    torch::nn::ModuleList enc_layers, dec_layers;
};
TORCH_MODULE(DeepJsccModel);

struct BaselineStepResult {
    torch::Tensor reconstruction;
    torch::Tensor mse;
};

/// Transparent-mode relay: amplify-and-forward between the two hops.
BaselineStepResult tm_deepjscc_forward(DeepJsccModel& model, const torch::Tensor& images,
                                       const channel::ChannelConfig& ul,
                                       const channel::ChannelConfig& dl, uint64_t seed,
                                       StepTrace* trace = nullptr);

/// Regenerative-mode relay: full on-board decode and re-encode with the same
/// weights before the downlink hop.
BaselineStepResult rm_deepjscc_forward(DeepJsccModel& model, const torch::Tensor& images,
                                       const channel::ChannelConfig& ul,
                                       const channel::ChannelConfig& dl, uint64_t seed,
                                       StepTrace* trace = nullptr);

/// MSE-only training of either relay mode (cfg.mode picks tm or rm).
TrainResult train_deepjscc(DeepJsccModel& model, const RunConfig& cfg, const Dataset& data,
                           std::ostream* log = nullptr);

}  // namespace sfsc::harness
