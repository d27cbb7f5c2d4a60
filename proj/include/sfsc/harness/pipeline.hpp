#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "sfsc/channel.hpp"
#include "sfsc/codebook.hpp"
#include "sfsc/harness/config.hpp"
#include "sfsc/losses.hpp"
#include "sfsc/mdma.hpp"
#include "sfsc/semnet.hpp"

namespace sfsc::harness {

/// Ordered record of the pipeline stages one step actually touched.
struct StepTrace {
    std::vector<std::string> stages;
    void mark(const std::string& s) { stages.push_back(s); }
};

/// How discrete indices are produced along the pipeline.
enum class IndexMode {
    kSample,  // training: seeded one-hot samples with gradient surrogate
    kSoft,    // soft relaxation (softmax), for gradient diagnostics
    kHard,    // evaluation: argmin / argmax, strict one-hots
};

struct SfscStepOptions {
    double temperature = 1.0;
    codebook::EstimatorKind estimator = codebook::EstimatorKind::kReinMax;
    IndexMode index_mode = IndexMode::kSample;
    uint64_t seed = 0;
    StepTrace* trace = nullptr;
};

struct SfscStepResult {
    losses::LossBreakdown loss;
    torch::Tensor reconstruction;  // [B, 3, S, S]
    torch::Tensor true_indices;    // hard one-hots actually transmitted
    torch::Tensor restored_probs;  // gateway posterior [B, M, K]
};

/// One end-to-end pass: encode, quantize+CSG, uplink, forward, CSG, downlink,
/// restore, dequantize+decode, losses.
SfscStepResult sfsc_forward(semnet::SfscModel& model, const torch::Tensor& images,
                            const channel::ChannelConfig& ul, const channel::ChannelConfig& dl,
                            const losses::LossWeights& weights, const SfscStepOptions& opts);

/// Two-user CS-MDMA system: shared encoder/decoder and uplink forwarder, one
/// private codebook per user, common orthogonal codebook with combined
/// feature extractor, per-user enhancement streams, and downlink restorers.
class CsmdmaModelImpl : public torch::nn::Module {
public:
    CsmdmaModelImpl(const semnet::NetworkConfig& cfg, int64_t p1, int64_t p2, uint64_t seed = 0);

    semnet::NetworkConfig cfg;
    semnet::SemanticEncoder encoder{nullptr};
    semnet::SemanticDecoder decoder{nullptr};
    semnet::RelayNet forwarder{nullptr};        // uplink relay recovery (shared)
    codebook::Codebook book1{nullptr}, book2{nullptr};
    codebook::CommonOrthogonalCodebook common{nullptr};
    mdma::CombinedFeatureExtractor cfe{nullptr};
    mdma::EnhancementExtractor efe{nullptr};
    mdma::EnhancementRestorer efr{nullptr};
    semnet::RelayNet common_restorer{nullptr};  // over the common stream
    semnet::RelayNet enh_restorer{nullptr};     // over the half-length streams
    semnet::Constellation constellation;

    const codebook::Codebook& user_book(int user) const { return user == 1 ? book1 : book2; }
};
TORCH_MODULE(CsmdmaModel);

struct CsmdmaStepOptions : SfscStepOptions {
    bool ideal_uplink = false;
    bool disable_enhancement = false;  // ablation: zero the restored residual
};

struct CsmdmaStepResult {
    losses::LossBreakdown loss;               // joint loss over both users
    std::array<torch::Tensor, 2> reconstructions;
    std::array<torch::Tensor, 2> per_user_mse;
    // Detached hard one-hots actually quantized, for usage bookkeeping.
    std::array<torch::Tensor, 2> user_onehots;  // private uplink streams
    std::array<torch::Tensor, 2> enh_onehots;   // enhancement (private books)
    torch::Tensor common_onehots;
};

CsmdmaStepResult csmdma_forward(CsmdmaModel& model,
                                const std::array<torch::Tensor, 2>& user_images,
                                const channel::ChannelConfig& ul,
                                const channel::ChannelConfig& dl,
                                const losses::LossWeights& weights,
                                const CsmdmaStepOptions& opts);

}  // namespace sfsc::harness
