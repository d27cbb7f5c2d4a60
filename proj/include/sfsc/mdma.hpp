#pragma once

#include <cstdint>

#include <torch/torch.h>

#include "sfsc/codebook.hpp"
#include "sfsc/constellation.hpp"
#include "sfsc/semnet.hpp"

namespace sfsc::mdma {

/// Learned map combining the two users' recovered features [B,M,N] x 2 into
/// the common-codebook space [B,M,P1+P2].
class CombinedFeatureExtractorImpl : public torch::nn::Module {
public:
    CombinedFeatureExtractorImpl(int64_t feature_dim, int64_t out_dim, int64_t side);
    torch::Tensor forward(const torch::Tensor& user1, const torch::Tensor& user2);

private:
    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
    int64_t side_;
};
TORCH_MODULE(CombinedFeatureExtractor);

/// Residual compressor f_efe: [B,M,N] -> [B,M/2,N] (half the symbol budget).
/// Zero-initialized final layer, so a zero residual maps to zero features.
class EnhancementExtractorImpl : public torch::nn::Module {
public:
    EnhancementExtractorImpl(int64_t feature_dim, int64_t side);
    torch::Tensor forward(const torch::Tensor& residual);

private:
    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
    int64_t side_;
};
TORCH_MODULE(EnhancementExtractor);

/// Residual restorer f_efr: [B,M/2,N] -> [B,M,N]. Zero-initialized final
/// layer, so the system starts split-only.
class EnhancementRestorerImpl : public torch::nn::Module {
public:
    EnhancementRestorerImpl(int64_t feature_dim, int64_t side);
    torch::Tensor forward(const torch::Tensor& enhancement);

private:
    torch::nn::Conv2d conv1{nullptr};
    torch::nn::ConvTranspose2d deconv{nullptr};
    torch::nn::Conv2d conv_out{nullptr};
    int64_t side_;
};
TORCH_MODULE(EnhancementRestorer);

/// Quantizes the combined features against the common orthogonal codebook and
/// modulates the indices. Returns {one-hot indices [B,M,K], frame}.
std::pair<torch::Tensor, channel::SymbolFrame> superpose_encode(
    const torch::Tensor& combined, const codebook::CommonOrthogonalCodebook& common,
    const semnet::Constellation& constellation);

/// Dequantizes combined indices through user u's sub-codebook and lifts the
/// result into the full N-dimensional space: user 1 occupies columns [0, P1),
/// user 2 columns [P1, N), zeros elsewhere.
torch::Tensor split_semantics(const torch::Tensor& indices,
                              const codebook::CommonOrthogonalCodebook& common, int user,
                              int64_t feature_dim);

/// Same lift applied directly to combined-space vectors [..., P1+P2]: slices
/// user u's segment and places it at its offset in the N-dimensional space.
/// Equals split_semantics when the input rows are common codewords, but keeps
/// the gradient into the combined features.
torch::Tensor split_combined(const torch::Tensor& combined,
                             const codebook::CommonOrthogonalCodebook& common, int user,
                             int64_t feature_dim);

/// Elementwise sum of the split component and the restored residual.
torch::Tensor fuse(const torch::Tensor& split, const torch::Tensor& residual);

struct SuperpositionDiagnostic {
    double direct;       // E || f_de(L) - f_de(L_split) ||^2
    double first_order;  // E [ r^T J^T J r ]  via Jacobian-vector products
};

/// Compares the exact superposition loss against its first-order expansion
/// around the original features. `decoder` is any autograd-differentiable map
/// of the feature grid (e.g. SemanticDecoder::forward_grid).
SuperpositionDiagnostic diagnose_superposition(
    const std::function<torch::Tensor(const torch::Tensor&)>& decoder,
    const torch::Tensor& original_grid, const torch::Tensor& split_grid);

}  // namespace sfsc::mdma
