#pragma once

#include <torch/torch.h>

namespace sfsc::metrics {

/// 10*log10(MAX^2 / MSE). Identical images report +infinity.
double psnr(const torch::Tensor& original, const torch::Tensor& reconstructed, double max_value);

/// Multi-scale SSIM with the standard five-scale weights
/// (0.0448, 0.2856, 0.3001, 0.2363, 0.1333); the scale count auto-reduces
/// (renormalizing weights) for small images when levels == 0. Requires
/// min_side >= 10 * 2^(levels-1) for an explicit level count.
double ms_ssim(const torch::Tensor& original, const torch::Tensor& reconstructed,
               int levels = 0, double data_range = 1.0);

/// Largest scale count ms_ssim supports for a given minimum image side.
int ms_ssim_max_levels(int64_t min_side);

/// Channel uses per image over the dimensionality of the image data.
double rate(int64_t channel_uses, int64_t height, int64_t width, int64_t channels = 3);

}  // namespace sfsc::metrics
