#include "sfsc/codebook.hpp"

#include <random>
#include <stdexcept>

namespace sfsc::codebook {

namespace {

torch::Tensor init_uniform(int64_t rows, int64_t cols, double bound, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-bound, bound);
    torch::Tensor t = torch::empty({rows, cols}, torch::kFloat64);
    auto* p = t.data_ptr<double>();
    for (int64_t i = 0; i < t.numel(); ++i) p[i] = uni(rng);
    return t.to(torch::kFloat32);
}

void check_codebook(const torch::Tensor& vectors) {
    if (!vectors.isfinite().all().item<bool>()) {
        throw std::invalid_argument("codebook entries must be finite");
    }
    if (vectors.size(0) < 2) {
        throw std::invalid_argument("codebook needs at least 2 codewords");
    }
    torch::Tensor spread = (vectors - vectors[0]).abs().max();
    if (spread.item<double>() == 0.0) {
        throw std::invalid_argument("degenerate codebook: all rows identical");
    }
}

}  // namespace

CodebookImpl::CodebookImpl(int64_t num_codewords, int64_t dim, uint64_t seed) {
    if (num_codewords < 2 || dim < 1) {
        throw std::invalid_argument("codebook requires K >= 2 and N >= 1");
    }
    vectors = register_parameter(
        "vectors", init_uniform(num_codewords, dim, 1.0 / double(num_codewords), seed));
    check_codebook(vectors);
}

CommonOrthogonalCodebookImpl::CommonOrthogonalCodebookImpl(int64_t num_codewords, int64_t p1,
                                                           int64_t p2, uint64_t seed)
    : split_point(p1) {
    if (p1 < 1 || p2 < 1) {
        throw std::invalid_argument("common codebook requires P1 >= 1 and P2 >= 1");
    }
    if (num_codewords < 2) {
        throw std::invalid_argument("common codebook requires K >= 2");
    }
    vectors = register_parameter(
        "vectors", init_uniform(num_codewords, p1 + p2, 1.0 / double(num_codewords), seed));
    check_codebook(vectors);
}

torch::Tensor CommonOrthogonalCodebookImpl::sub_codebook(int user) const {
    if (user == 1) return vectors.narrow(1, 0, split_point);
    if (user == 2) return vectors.narrow(1, split_point, width() - split_point);
    throw std::invalid_argument("user must be 1 or 2");
}

torch::Tensor vq_assign(const torch::Tensor& features, const torch::Tensor& vectors) {
    if (features.size(-1) != vectors.size(1)) {
        throw std::invalid_argument("feature dimension does not match codebook dimension");
    }
    const int64_t k = vectors.size(0);
    torch::NoGradGuard no_grad;

    torch::Tensor flat = features.reshape({-1, features.size(-1)});
    torch::Tensor idx = torch::empty({flat.size(0)}, torch::kLong);
    torch::Tensor arange = torch::arange(k, torch::kLong);
    const int64_t chunk = 4096;
    for (int64_t start = 0; start < flat.size(0); start += chunk) {
        int64_t len = std::min(chunk, flat.size(0) - start);
        torch::Tensor diff = flat.narrow(0, start, len).unsqueeze(1) - vectors.unsqueeze(0);
        torch::Tensor dist = diff.square().sum(-1);  // [len, K]
        torch::Tensor dmin = std::get<0>(dist.min(-1, /*keepdim=*/true));
        // Ties break toward the lowest index.
        torch::Tensor candidates = torch::where(dist <= dmin, arange.unsqueeze(0),
                                                torch::full_like(arange.unsqueeze(0), k));
        idx.narrow(0, start, len) = std::get<0>(candidates.min(-1));
    }

    auto out_shape = features.sizes().vec();
    out_shape.back() = k;
    return torch::one_hot(idx, k).to(features.scalar_type()).reshape(out_shape);
}

torch::Tensor dequantize(const torch::Tensor& onehots, const torch::Tensor& vectors) {
    if (onehots.size(-1) != vectors.size(0)) {
        throw std::invalid_argument("index width does not match codebook size");
    }
    return torch::matmul(onehots, vectors);
}

torch::Tensor differentiable_onehot(const torch::Tensor& scores, double temperature,
                                    uint64_t seed, EstimatorKind kind) {
    if (!scores.isfinite().all().item<bool>()) {
        throw std::invalid_argument("scores must be finite");
    }
    if (!(temperature > 0.0)) {
        throw std::invalid_argument("temperature must be > 0");
    }
    const int64_t k = scores.size(-1);
    torch::Tensor logits = scores / temperature;
    torch::Tensor probs = torch::softmax(logits, -1);

    // Exact categorical sample from softmax(scores/temperature), seeded.
    torch::Tensor hard;
    {
        torch::NoGradGuard no_grad;
        torch::Tensor flat = probs.detach().to(torch::kFloat64).reshape({-1, k}).cpu();
        auto acc = flat.accessor<double, 2>();
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        torch::Tensor idx = torch::empty({flat.size(0)}, torch::kLong);
        auto* ip = idx.data_ptr<int64_t>();
        for (int64_t r = 0; r < flat.size(0); ++r) {
            double u = uni(rng);
            double cum = 0.0;
            int64_t choice = k - 1;
            for (int64_t c = 0; c < k; ++c) {
                cum += acc[r][c];
                if (u < cum) {
                    choice = c;
                    break;
                }
            }
            ip[r] = choice;
        }
        hard = torch::one_hot(idx, k).to(scores.scalar_type()).reshape(scores.sizes());
    }

    if (kind == EstimatorKind::kStraightThrough) {
        return hard + (probs - probs.detach());
    }

    // ReinMax: second-order straight-through. The surrogate gradient is
    // 2*J(pi_bar) - 0.5*J(p) with pi_bar = (D + p)/2, realized here through
    // a softmax re-parameterization that evaluates to pi_bar in the forward.
    torch::Tensor pi_bar = (hard + probs) / 2.0;
    torch::Tensor pi1 = torch::softmax((pi_bar.log() - logits).detach() + logits, -1);
    torch::Tensor pi2 = 2.0 * pi1 - 0.5 * probs;
    // Parenthesized so the forward value is exactly the hard one-hot.
    return hard + (pi2 - pi2.detach());
}

torch::Tensor quantization_loss(const torch::Tensor& features, const torch::Tensor& quantized,
                                double beta_q) {
    if (!features.sizes().equals(quantized.sizes())) {
        throw std::invalid_argument("quantization_loss: shape mismatch");
    }
    torch::Tensor codebook_term = (features.detach() - quantized).square().sum(-1).mean();
    torch::Tensor commit_term = (features - quantized.detach()).square().sum(-1).mean();
    return codebook_term + beta_q * commit_term;
}

std::pair<torch::Tensor, torch::Tensor> split_codebook(const CommonOrthogonalCodebook& common) {
    return {common->sub_codebook(1).clone(), common->sub_codebook(2).clone()};
}

}  // namespace sfsc::codebook
