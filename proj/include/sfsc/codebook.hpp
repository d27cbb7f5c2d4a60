#pragma once

#include <cstdint>
#include <utility>

#include <torch/torch.h>

namespace sfsc::codebook {

/// Learnable semantic codebook E, K codewords of dimension N.
class CodebookImpl : public torch::nn::Module {
public:
    CodebookImpl(int64_t num_codewords, int64_t dim, uint64_t seed = 0);

    torch::Tensor vectors;  // [K, N], trainable

    int64_t size() const { return vectors.size(0); }
    int64_t dim() const { return vectors.size(1); }
};
TORCH_MODULE(Codebook);

/// Codebook whose codeword columns partition into two per-user segments
/// [0, P1) and [P1, P1+P2). Used by the CS-MDMA downlink.
class CommonOrthogonalCodebookImpl : public torch::nn::Module {
public:
    CommonOrthogonalCodebookImpl(int64_t num_codewords, int64_t p1, int64_t p2,
                                 uint64_t seed = 0);

    torch::Tensor vectors;  // [K, P1+P2], trainable
    int64_t split_point;    // P1

    int64_t size() const { return vectors.size(0); }
    int64_t width() const { return vectors.size(1); }
    /// Column segment for one user, u in {1, 2}. A view of `vectors`.
    torch::Tensor sub_codebook(int user) const;
};
TORCH_MODULE(CommonOrthogonalCodebook);

/// Nearest-codeword assignment: features [..., M, N] against vectors [K, N],
/// returns one-hot [..., M, K]. Ties break toward the lowest index.
torch::Tensor vq_assign(const torch::Tensor& features, const torch::Tensor& vectors);

/// One-hot [..., M, K] times vectors [K, W] -> [..., M, W]. Exactly linear.
torch::Tensor dequantize(const torch::Tensor& onehots, const torch::Tensor& vectors);

enum class EstimatorKind { kReinMax, kStraightThrough };

/// Samples hard one-hots from softmax(scores / temperature) and attaches a
/// gradient surrogate: the second-order straight-through estimator (ReinMax)
/// or, as a fallback, the plain straight-through estimator.
torch::Tensor differentiable_onehot(const torch::Tensor& scores, double temperature,
                                    uint64_t seed,
                                    EstimatorKind kind = EstimatorKind::kReinMax);

/// ||sg[L] - L_vq||^2 + beta_q * ||L - sg[L_vq]||^2, squared norms taken per
/// position and averaged over every position in the batch. Gradients of the
/// first term reach only the codebook path, of the second only the encoder.
torch::Tensor quantization_loss(const torch::Tensor& features, const torch::Tensor& quantized,
                                double beta_q);

/// Splits the common codebook into its two column segments (copies).
std::pair<torch::Tensor, torch::Tensor> split_codebook(const CommonOrthogonalCodebook& common);

}  // namespace sfsc::codebook
