#include "sfsc/mdma.hpp"

#include <stdexcept>

namespace sfsc::mdma {

namespace nn = torch::nn;

CombinedFeatureExtractorImpl::CombinedFeatureExtractorImpl(int64_t feature_dim, int64_t out_dim,
                                                           int64_t side)
    : side_(side) {
    conv1 = register_module(
        "conv1", nn::Conv2d(nn::Conv2dOptions(2 * feature_dim, 2 * feature_dim, 3).padding(1)));
    conv2 = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(2 * feature_dim, out_dim, 1)));
}

torch::Tensor CombinedFeatureExtractorImpl::forward(const torch::Tensor& user1,
                                                    const torch::Tensor& user2) {
    if (!user1.sizes().equals(user2.sizes())) {
        throw std::invalid_argument("combine_features: user grids must have the same shape");
    }
    torch::Tensor x = torch::cat({semnet::features_to_grid(user1, side_),
                                  semnet::features_to_grid(user2, side_)},
                                 1);
    x = torch::relu(conv1->forward(x));
    x = conv2->forward(x);
    return semnet::grid_to_features(x);
}

EnhancementExtractorImpl::EnhancementExtractorImpl(int64_t feature_dim, int64_t side)
    : side_(side) {
    if (side % 2 != 0) throw std::invalid_argument("latent side must be even for enhancement");
    conv1 = register_module(
        "conv1", nn::Conv2d(nn::Conv2dOptions(feature_dim, feature_dim, 3).padding(1)));
    // Halves the symbol budget: stride 2 along one spatial axis.
    conv2 = register_module(
        "conv2", nn::Conv2d(nn::Conv2dOptions(feature_dim, feature_dim, {3, 4})
                                .stride({1, 2})
                                .padding({1, 1})));
    torch::NoGradGuard no_grad;
    conv2->weight.zero_();
    conv2->bias.zero_();
}

torch::Tensor EnhancementExtractorImpl::forward(const torch::Tensor& residual) {
    torch::Tensor x = semnet::features_to_grid(residual, side_);
    x = torch::relu(conv1->forward(x));
    x = conv2->forward(x);  // [B, N, h, w/2]
    return semnet::grid_to_features(x);
}

EnhancementRestorerImpl::EnhancementRestorerImpl(int64_t feature_dim, int64_t side)
    : side_(side) {
    conv1 = register_module(
        "conv1", nn::Conv2d(nn::Conv2dOptions(feature_dim, feature_dim, 3).padding(1)));
    deconv = register_module(
        "deconv", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(feature_dim, feature_dim, {3, 4})
                                          .stride({1, 2})
                                          .padding({1, 1})));
    conv_out = register_module(
        "conv_out", nn::Conv2d(nn::Conv2dOptions(feature_dim, feature_dim, 3).padding(1)));
    torch::NoGradGuard no_grad;
    conv_out->weight.zero_();
    conv_out->bias.zero_();
}

torch::Tensor EnhancementRestorerImpl::forward(const torch::Tensor& enhancement) {
    if (enhancement.size(1) * 2 != side_ * side_) {
        throw std::invalid_argument("restore_enhancement: unexpected enhancement length");
    }
    torch::Tensor x = enhancement.reshape({enhancement.size(0), side_, side_ / 2, -1})
                          .permute({0, 3, 1, 2})
                          .contiguous();
    x = torch::relu(conv1->forward(x));
    x = torch::relu(deconv->forward(x));  // [B, N, h, w]
    x = conv_out->forward(x);
    return semnet::grid_to_features(x);
}

std::pair<torch::Tensor, channel::SymbolFrame> superpose_encode(
    const torch::Tensor& combined, const codebook::CommonOrthogonalCodebook& common,
    const semnet::Constellation& constellation) {
    if (combined.size(-1) != common->width()) {
        throw std::invalid_argument("superpose_encode: feature width does not match codebook");
    }
    torch::Tensor indices = codebook::vq_assign(combined, common->vectors);
    return {indices, semnet::modulate(indices, constellation)};
}

torch::Tensor split_semantics(const torch::Tensor& indices,
                              const codebook::CommonOrthogonalCodebook& common, int user,
                              int64_t feature_dim) {
    if (user != 1 && user != 2) throw std::invalid_argument("user must be 1 or 2");
    torch::Tensor sub = common->sub_codebook(user);
    torch::Tensor part = codebook::dequantize(indices, sub);
    const int64_t offset = user == 1 ? 0 : common->split_point;
    if (offset + sub.size(1) > feature_dim) {
        throw std::invalid_argument("split_semantics: sub-codebook exceeds the feature space");
    }
    auto shape = part.sizes().vec();
    shape.back() = feature_dim;
    torch::Tensor lifted = torch::zeros(shape, part.options());
    lifted.narrow(-1, offset, sub.size(1)) += part;
    return lifted;
}

torch::Tensor split_combined(const torch::Tensor& combined,
                             const codebook::CommonOrthogonalCodebook& common, int user,
                             int64_t feature_dim) {
    if (user != 1 && user != 2) throw std::invalid_argument("user must be 1 or 2");
    const int64_t offset = user == 1 ? 0 : common->split_point;
    const int64_t width = user == 1 ? common->split_point : common->width() - common->split_point;
    if (combined.size(-1) != common->width()) {
        throw std::invalid_argument("split_combined: combined width mismatch");
    }
    if (offset + width > feature_dim) {
        throw std::invalid_argument("split_combined: sub-codebook exceeds the feature space");
    }
    auto shape = combined.sizes().vec();
    shape.back() = feature_dim;
    torch::Tensor lifted = torch::zeros(shape, combined.options());
    lifted.narrow(-1, offset, width) += combined.narrow(-1, offset, width);
    return lifted;
}

torch::Tensor fuse(const torch::Tensor& split, const torch::Tensor& residual) {
    if (!split.sizes().equals(residual.sizes())) {
        throw std::invalid_argument("fuse: shape mismatch");
    }
    return split + residual;
}

SuperpositionDiagnostic diagnose_superposition(
    const std::function<torch::Tensor(const torch::Tensor&)>& decoder,
    const torch::Tensor& original_grid, const torch::Tensor& split_grid) {
    if (!original_grid.sizes().equals(split_grid.sizes())) {
        throw std::invalid_argument("diagnose_superposition: shape mismatch");
    }
    const int64_t batch = original_grid.size(0);

    torch::Tensor input = original_grid.detach().clone().set_requires_grad(true);
    torch::Tensor out = decoder(input);
    if (!out.requires_grad()) {
        throw std::runtime_error("diagnose_superposition: decoder is not differentiable");
    }
    torch::Tensor out_split;
    {
        torch::NoGradGuard no_grad;
        out_split = decoder(split_grid.detach());
    }
    torch::Tensor direct =
        (out.detach() - out_split).square().reshape({batch, -1}).sum(-1).mean();

    // Jacobian-vector product by double backward: g(v) = J^T v is linear in v,
    // so d(g . r)/dv = J r.
    torch::Tensor r = (split_grid - original_grid).detach();
    torch::Tensor v = torch::ones_like(out).set_requires_grad(true);
    torch::Tensor g = torch::autograd::grad({out}, {input}, {v}, /*retain_graph=*/true,
                                            /*create_graph=*/true)[0];
    torch::Tensor jvp = torch::autograd::grad({g}, {v}, {r})[0];
    torch::Tensor first_order = jvp.square().reshape({batch, -1}).sum(-1).mean();

    return {direct.item<double>(), first_order.item<double>()};
}

}  // namespace sfsc::mdma
