#include "sfsc/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace sfsc::losses {

void LossWeights::validate() const {
    if (!(lambda_trans >= 0.0) || !(lambda_quant >= 0.0) || !(beta_q >= 0.0) ||
        !std::isfinite(lambda_trans) || !std::isfinite(lambda_quant) || !std::isfinite(beta_q)) {
        throw std::invalid_argument("loss weights must be finite and non-negative");
    }
}

torch::Tensor recon_loss(const torch::Tensor& original, const torch::Tensor& reconstructed) {
    if (!original.sizes().equals(reconstructed.sizes())) {
        throw std::invalid_argument("recon_loss: shape mismatch");
    }
    return (original - reconstructed).square().mean();
}

torch::Tensor trans_loss(const torch::Tensor& true_onehots, const torch::Tensor& predicted_probs) {
    if (!true_onehots.sizes().equals(predicted_probs.sizes())) {
        throw std::invalid_argument("trans_loss: shape mismatch");
    }
    {
        torch::NoGradGuard no_grad;
        torch::Tensor row_sum = predicted_probs.sum(-1);
        if (!((row_sum - 1.0).abs() < 1e-4).all().item<bool>() ||
            predicted_probs.min().item<double>() < -1e-9) {
            throw std::invalid_argument("trans_loss: rows of predicted must be distributions");
        }
    }
    torch::Tensor log_q = predicted_probs.clamp_min(1e-12).log();
    torch::Tensor per_sample = -(true_onehots.detach() * log_q).sum({-2, -1});
    return per_sample.mean();
}

LossBreakdown composite_loss(const torch::Tensor& rec, const torch::Tensor& trans,
                             const torch::Tensor& quant, const LossWeights& weights) {
    weights.validate();
    LossBreakdown out;
    out.rec = rec;
    out.trans = trans;
    out.quant = quant;
    out.total = rec + weights.lambda_trans * trans + weights.lambda_quant * quant;
    return out;
}

}  // namespace sfsc::losses
