#pragma once

#include <cstdint>

#include <torch/torch.h>

#include "sfsc/channel.hpp"

namespace sfsc::semnet {

/// Fixed constellation table: K complex points with unit average energy under
/// uniform indexing. Codeword index k maps directly to point k (no Gray map).
/// Square QAM for square orders, a rectangular grid otherwise (e.g. 8 -> 4x2).
struct Constellation {
    torch::Tensor points;  // [K, 2]

    int64_t order() const { return points.size(0); }
    static Constellation qam(int64_t order);
};

/// One-hot grids [..., M, K] -> symbol frame [..., M, 2], then the whole frame
/// is normalized to unit empirical average power (differentiable).
/// With strict=true (evaluation), soft rows are rejected.
channel::SymbolFrame modulate(const torch::Tensor& onehots, const Constellation& constellation,
                              bool strict = false);

}  // namespace sfsc::semnet
