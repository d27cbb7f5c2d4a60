#include "sfsc/constellation.hpp"

#include <cmath>
#include <stdexcept>

namespace sfsc::semnet {

Constellation Constellation::qam(int64_t order) {
    if (order < 2) throw std::invalid_argument("constellation order must be >= 2");
    // Grid dimensions: square when possible, otherwise the most balanced
    // factorization with kx >= ky.
    int64_t kx = (int64_t)std::llround(std::ceil(std::sqrt((double)order)));
    while (order % kx != 0) ++kx;
    const int64_t ky = order / kx;

    torch::Tensor pts = torch::empty({order, 2}, torch::kFloat32);
    auto acc = pts.accessor<float, 2>();
    for (int64_t k = 0; k < order; ++k) {
        acc[k][0] = float((kx - 1) - 2 * (k % kx));
        acc[k][1] = float((ky - 1) - 2 * (k / kx));
    }
    pts /= pts.square().sum(-1).mean().sqrt();
    return Constellation{pts};
}

channel::SymbolFrame modulate(const torch::Tensor& onehots, const Constellation& constellation,
                              bool strict) {
    if (onehots.size(-1) != constellation.order()) {
        throw std::invalid_argument("index width does not match constellation order");
    }
    if (strict) {
        torch::NoGradGuard no_grad;
        torch::Tensor binary = (onehots == 0) | (onehots == 1);
        torch::Tensor row_sum = onehots.sum(-1);
        if (!binary.all().item<bool>() || !(row_sum == 1).all().item<bool>()) {
            throw std::invalid_argument("modulate: soft rows rejected in evaluation mode");
        }
    }
    torch::Tensor sym = torch::matmul(onehots, constellation.points.to(onehots.scalar_type()));
    torch::Tensor power = sym.square().sum(-1).mean(-1, /*keepdim=*/true).unsqueeze(-1);
    return channel::SymbolFrame{sym / power.clamp_min(1e-12).sqrt()};
}

}  // namespace sfsc::semnet
