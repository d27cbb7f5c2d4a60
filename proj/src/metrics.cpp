#include "sfsc/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sfsc::metrics {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;
constexpr double kStandardWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

torch::Tensor gaussian_window(int size, double sigma) {
    torch::Tensor coords = torch::arange(size, torch::kFloat64) - (size - 1) / 2.0;
    torch::Tensor g = (-coords.square() / (2.0 * sigma * sigma)).exp();
    g /= g.sum();
    return g;
}

/// Per-channel valid convolution with the separable Gaussian window.
torch::Tensor blur(const torch::Tensor& x, const torch::Tensor& win1d) {
    const int64_t c = x.size(1);
    torch::Tensor row = win1d.reshape({1, 1, 1, -1}).expand({c, 1, 1, win1d.size(0)});
    torch::Tensor col = win1d.reshape({1, 1, -1, 1}).expand({c, 1, win1d.size(0), 1});
    namespace F = torch::nn::functional;
    torch::Tensor y = F::conv2d(x, row, F::Conv2dFuncOptions().groups(c));
    return F::conv2d(y, col, F::Conv2dFuncOptions().groups(c));
}

/// Returns {mean ssim, mean contrast-structure} for one scale.
std::pair<double, double> ssim_scale(const torch::Tensor& a, const torch::Tensor& b,
                                     double data_range, const torch::Tensor& win) {
    const double c1 = (kK1 * data_range) * (kK1 * data_range);
    const double c2 = (kK2 * data_range) * (kK2 * data_range);
    torch::Tensor mu_a = blur(a, win);
    torch::Tensor mu_b = blur(b, win);
    torch::Tensor mu_aa = mu_a.square();
    torch::Tensor mu_bb = mu_b.square();
    torch::Tensor mu_ab = mu_a * mu_b;
    torch::Tensor sigma_aa = blur(a * a, win) - mu_aa;
    torch::Tensor sigma_bb = blur(b * b, win) - mu_bb;
    torch::Tensor sigma_ab = blur(a * b, win) - mu_ab;

    torch::Tensor cs = (2.0 * sigma_ab + c2) / (sigma_aa + sigma_bb + c2);
    torch::Tensor lum = (2.0 * mu_ab + c1) / (mu_aa + mu_bb + c1);
    return {(lum * cs).mean().item<double>(), cs.mean().item<double>()};
}

torch::Tensor as_batched(const torch::Tensor& img) {
    torch::Tensor x = img.to(torch::kFloat64);
    if (x.dim() == 3) x = x.unsqueeze(0);
    if (x.dim() != 4) throw std::invalid_argument("expected [C,H,W] or [B,C,H,W] image");
    return x;
}

}  // namespace

double psnr(const torch::Tensor& original, const torch::Tensor& reconstructed, double max_value) {
    if (!original.sizes().equals(reconstructed.sizes())) {
        throw std::invalid_argument("psnr: shape mismatch");
    }
    if (!(max_value > 0.0)) throw std::invalid_argument("psnr: max_value must be > 0");
    double mse = (original.to(torch::kFloat64) - reconstructed.to(torch::kFloat64))
                     .square()
                     .mean()
                     .item<double>();
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(max_value * max_value / mse);
}

int ms_ssim_max_levels(int64_t min_side) {
    int levels = 0;
    while (levels < 5 && (kWindow - 1) * (1LL << levels) <= min_side) ++levels;
    return levels;
}

double ms_ssim(const torch::Tensor& original, const torch::Tensor& reconstructed, int levels,
               double data_range) {
    torch::NoGradGuard no_grad;
    torch::Tensor a = as_batched(original);
    torch::Tensor b = as_batched(reconstructed);
    if (!a.sizes().equals(b.sizes())) throw std::invalid_argument("ms_ssim: shape mismatch");

    const int64_t min_side = std::min(a.size(2), a.size(3));
    const int max_levels = ms_ssim_max_levels(min_side);
    if (max_levels < 1) throw std::invalid_argument("ms_ssim: image too small");
    if (levels == 0) levels = max_levels;
    if (levels < 1 || levels > 5 || levels > max_levels) {
        throw std::invalid_argument("ms_ssim: image too small for the configured scale count");
    }

    double weight_sum = 0.0;
    for (int j = 0; j < levels; ++j) weight_sum += kStandardWeights[j];

    torch::Tensor win = gaussian_window(kWindow, kSigma);
    double score = 1.0;
    namespace F = torch::nn::functional;
    for (int j = 0; j < levels; ++j) {
        auto [ssim_j, cs_j] = ssim_scale(a, b, data_range, win);
        const double w = kStandardWeights[j] / weight_sum;
        const double component = j + 1 < levels ? cs_j : ssim_j;
        score *= std::pow(std::max(component, 0.0), w);
        if (j + 1 < levels) {
            a = F::avg_pool2d(a, F::AvgPool2dFuncOptions(2));
            b = F::avg_pool2d(b, F::AvgPool2dFuncOptions(2));
        }
    }
    return score;
}

double rate(int64_t channel_uses, int64_t height, int64_t width, int64_t channels) {
    if (channel_uses <= 0 || height <= 0 || width <= 0 || channels <= 0) {
        throw std::invalid_argument("rate: arguments must be positive");
    }
    return double(channel_uses) / double(height * width * channels);
}

}  // namespace sfsc::metrics
