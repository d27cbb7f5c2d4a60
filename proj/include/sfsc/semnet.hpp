#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include <torch/torch.h>

#include "sfsc/channel.hpp"
#include "sfsc/codebook.hpp"
#include "sfsc/constellation.hpp"

namespace sfsc::semnet {

struct NetworkConfig {
    int64_t image_size = 64;       // H = W
    int64_t downsample_factor = 2; // power of 2
    int64_t base_width = 32;       // encoder/decoder channels
    int64_t relay_width = 16;      // forwarder/restorer hidden channels
    int64_t film_width = 32;       // FiLM generator hidden channels
    int64_t feature_dim = 64;      // N
    int64_t codebook_size = 16;    // K = constellation order

    void validate() const;
    int64_t latent_side() const { return image_size / downsample_factor; }
    int64_t positions() const { return latent_side() * latent_side(); }
};

/// Full-scale configuration matching the reference layer plan
/// (512x512 images, 128-wide encoder, 64-wide relay nets, N=256, K=8).
NetworkConfig full_scale_config();

// ---- layout helpers -------------------------------------------------------
// Complex frames are presented to networks as 2 real channels (I, Q); these
// conversions round-trip exactly. Row-major position order throughout.

torch::Tensor frame_to_grid(const torch::Tensor& iq, int64_t h, int64_t w);  // [B,M,2]->[B,2,h,w]
torch::Tensor grid_to_frame(const torch::Tensor& grid);                 // [B,2,h,w]->[B,M,2]
torch::Tensor features_to_grid(const torch::Tensor& feat, int64_t side);// [B,M,N]->[B,N,h,w]
torch::Tensor grid_to_features(const torch::Tensor& grid);              // [B,N,h,w]->[B,M,N]

/// Normalized coordinate maps, each spanning [-1, 1] inclusive per axis.
std::pair<torch::Tensor, torch::Tensor> coordinate_grids(int64_t h, int64_t w);

// ---- blocks ---------------------------------------------------------------

class ResBlockImpl : public torch::nn::Module {
public:
    explicit ResBlockImpl(int64_t channels);
    torch::Tensor forward(torch::Tensor x);

private:
    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(ResBlock);

/// SNR-conditioned per-position FiLM parameters. Input stack is
/// [snr map, grid-x, grid-y]; the final layer is zero-initialized so that
/// gamma == 1 and beta == 0 before training.
class FilmGeneratorImpl : public torch::nn::Module {
public:
    FilmGeneratorImpl(int64_t hidden, int64_t modulated_channels);
    /// Returns {gamma, beta}, each [B, modulated_channels, h, w].
    std::pair<torch::Tensor, torch::Tensor> forward(double snr_db, int64_t batch, int64_t h,
                                                    int64_t w, torch::TensorOptions opts);

private:
    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, conv_out{nullptr};
    int64_t modulated_;
};
TORCH_MODULE(FilmGenerator);

/// gamma * F + beta, elementwise over [B, C, h, w].
torch::Tensor film_apply(const torch::Tensor& feature_map, const torch::Tensor& gamma,
                         const torch::Tensor& beta);

/// Shared architecture of the semantic forwarder and the index restorer:
/// 2-channel I/Q input, three ResBlocks each followed by FiLM, 1x1 output
/// conv onto K logits per position.
class RelayNetImpl : public torch::nn::Module {
public:
    /// The frame is laid out on an (h, w) grid; by default the square latent
    /// grid, with width_divisor > 1 for shortened (e.g. enhancement) streams.
    RelayNetImpl(const NetworkConfig& cfg, int64_t width_divisor = 1);
    /// received: [B, M, 2] -> logits [B, M, K].
    torch::Tensor forward(const torch::Tensor& received_iq, double snr_db);

    FilmGenerator film_gen{nullptr};

private:
    torch::nn::Conv2d conv_in{nullptr}, conv_out{nullptr};
    torch::nn::ModuleList blocks;
    int64_t h_, w_;
};
TORCH_MODULE(RelayNet);

class SemanticEncoderImpl : public torch::nn::Module {
public:
    explicit SemanticEncoderImpl(const NetworkConfig& cfg);
    /// image [B, 3, S, S] in [0,1] -> features [B, M, N].
    torch::Tensor forward(const torch::Tensor& image);

private:
    torch::nn::ModuleList layers;
    NetworkConfig cfg_;
};
TORCH_MODULE(SemanticEncoder);

class SemanticDecoderImpl : public torch::nn::Module {
public:
    explicit SemanticDecoderImpl(const NetworkConfig& cfg);
    /// features [B, M, N] -> image [B, 3, S, S], sigmoid-squashed into [0,1].
    torch::Tensor forward(const torch::Tensor& features);
    /// Same map on an already-gridded [B, N, h, w] input.
    torch::Tensor forward_grid(const torch::Tensor& grid);

private:
    torch::nn::ModuleList layers;
    NetworkConfig cfg_;
};
TORCH_MODULE(SemanticDecoder);

/// The end-to-end single-user model: encoder, codebook, forwarder, restorer,
/// decoder, plus the fixed constellation tied to the codebook size.
class SfscModelImpl : public torch::nn::Module {
public:
    SfscModelImpl(const NetworkConfig& cfg, uint64_t seed = 0);

    NetworkConfig cfg;
    SemanticEncoder encoder{nullptr};
    SemanticDecoder decoder{nullptr};
    codebook::Codebook book{nullptr};
    RelayNet forwarder{nullptr};
    RelayNet restorer{nullptr};
    Constellation constellation;

    /// Negative squared distances to the codebook, the sampling scores.
    torch::Tensor vq_scores(const torch::Tensor& features);
};
TORCH_MODULE(SfscModel);

/// Exact count of trainable scalars.
int64_t count_parameters(const torch::nn::Module& model);

/// Layer-by-layer parameter listing, for the accounting report.
std::string parameter_report(const torch::nn::Module& model);

}  // namespace sfsc::semnet
