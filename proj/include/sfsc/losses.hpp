#pragma once

#include <torch/torch.h>

namespace sfsc::losses {

struct LossWeights {
    double lambda_trans = 1.0;
    double lambda_quant = 1.0;
    double beta_q = 0.25;

    void validate() const;
};

struct LossBreakdown {
    torch::Tensor rec;
    torch::Tensor trans;
    torch::Tensor quant;
    torch::Tensor total;
};

/// Mean squared error over batch and pixels.
torch::Tensor recon_loss(const torch::Tensor& original, const torch::Tensor& reconstructed);

/// Cross-entropy between the truth one-hots and the predicted distribution,
/// summed over positions and categories, averaged over the batch. Logs are
/// floored at 1e-12.
torch::Tensor trans_loss(const torch::Tensor& true_onehots, const torch::Tensor& predicted_probs);

/// total = rec + lambda_trans * trans + lambda_quant * quant.
LossBreakdown composite_loss(const torch::Tensor& rec, const torch::Tensor& trans,
                             const torch::Tensor& quant, const LossWeights& weights);

}  // namespace sfsc::losses
