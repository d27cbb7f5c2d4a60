#include "sfsc/semnet.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sfsc::semnet {

namespace nn = torch::nn;

void NetworkConfig::validate() const {
    if (image_size < 4) throw std::invalid_argument("image_size too small");
    if (downsample_factor < 2 || (downsample_factor & (downsample_factor - 1)) != 0) {
        throw std::invalid_argument("downsample_factor must be a power of 2, >= 2");
    }
    if (image_size % downsample_factor != 0) {
        throw std::invalid_argument("image_size must be divisible by downsample_factor");
    }
    if (base_width < 1 || relay_width < 1 || film_width < 1 || feature_dim < 1 ||
        codebook_size < 2) {
        throw std::invalid_argument("network widths must be positive, codebook_size >= 2");
    }
}

NetworkConfig full_scale_config() {
    NetworkConfig cfg;
    cfg.image_size = 512;
    cfg.downsample_factor = 2;
    cfg.base_width = 128;
    cfg.relay_width = 64;
    cfg.film_width = 128;
    cfg.feature_dim = 256;
    cfg.codebook_size = 8;
    return cfg;
}

torch::Tensor frame_to_grid(const torch::Tensor& iq, int64_t h, int64_t w) {
    return iq.reshape({iq.size(0), h, w, 2}).permute({0, 3, 1, 2}).contiguous();
}

torch::Tensor grid_to_frame(const torch::Tensor& grid) {
    return grid.permute({0, 2, 3, 1}).reshape({grid.size(0), -1, 2});
}

torch::Tensor features_to_grid(const torch::Tensor& feat, int64_t side) {
    return feat.reshape({feat.size(0), side, side, feat.size(-1)})
        .permute({0, 3, 1, 2})
        .contiguous();
}

torch::Tensor grid_to_features(const torch::Tensor& grid) {
    return grid.permute({0, 2, 3, 1}).reshape({grid.size(0), -1, grid.size(1)});
}

std::pair<torch::Tensor, torch::Tensor> coordinate_grids(int64_t h, int64_t w) {
    torch::Tensor ys = h > 1 ? torch::linspace(-1.0, 1.0, h) : torch::zeros({1});
    torch::Tensor xs = w > 1 ? torch::linspace(-1.0, 1.0, w) : torch::zeros({1});
    torch::Tensor gy = ys.unsqueeze(1).expand({h, w});
    torch::Tensor gx = xs.unsqueeze(0).expand({h, w});
    return {gx.contiguous(), gy.contiguous()};
}

// ---- ResBlock -------------------------------------------------------------

ResBlockImpl::ResBlockImpl(int64_t channels) {
    conv1 = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(1)));
    conv2 = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(1)));
}

torch::Tensor ResBlockImpl::forward(torch::Tensor x) {
    torch::Tensor out = conv1->forward(torch::relu(x));
    out = conv2->forward(torch::relu(out));
    return x + out;
}

// ---- FiLM -----------------------------------------------------------------

FilmGeneratorImpl::FilmGeneratorImpl(int64_t hidden, int64_t modulated_channels)
    : modulated_(modulated_channels) {
    conv1 = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(3, hidden, 3).padding(1)));
    conv2 = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(hidden, hidden, 3).padding(1)));
    conv_out = register_module(
        "conv_out", nn::Conv2d(nn::Conv2dOptions(hidden, 2 * modulated_channels, 1)));
    // Identity start: gamma = 1, beta = 0 regardless of SNR.
    torch::NoGradGuard no_grad;
    conv_out->weight.zero_();
    conv_out->bias.zero_();
}

std::pair<torch::Tensor, torch::Tensor> FilmGeneratorImpl::forward(double snr_db, int64_t batch,
                                                                   int64_t h, int64_t w,
                                                                   torch::TensorOptions opts) {
    if (!std::isfinite(snr_db)) throw std::invalid_argument("snr_db must be finite");
    auto [gx, gy] = coordinate_grids(h, w);
    torch::Tensor snr_map = torch::full({h, w}, snr_db / 10.0);
    torch::Tensor cond = torch::stack({snr_map, gx, gy}, 0)
                             .unsqueeze(0)
                             .expand({batch, 3, h, w})
                             .to(opts);
    torch::Tensor x = torch::relu(conv1->forward(cond));
    x = torch::relu(conv2->forward(x));
    x = conv_out->forward(x);
    torch::Tensor gamma = 1.0 + x.narrow(1, 0, modulated_);
    torch::Tensor beta = x.narrow(1, modulated_, modulated_);
    return {gamma, beta};
}

torch::Tensor film_apply(const torch::Tensor& feature_map, const torch::Tensor& gamma,
                         const torch::Tensor& beta) {
    if (!feature_map.sizes().equals(gamma.sizes()) || !feature_map.sizes().equals(beta.sizes())) {
        throw std::invalid_argument("film_apply: shape mismatch");
    }
    return gamma * feature_map + beta;
}

// ---- RelayNet -------------------------------------------------------------

RelayNetImpl::RelayNetImpl(const NetworkConfig& cfg, int64_t width_divisor)
    : h_(cfg.latent_side()), w_(cfg.latent_side() / width_divisor) {
    if (width_divisor < 1 || cfg.latent_side() % width_divisor != 0) {
        throw std::invalid_argument("width_divisor must divide the latent side");
    }
    conv_in = register_module(
        "conv_in", nn::Conv2d(nn::Conv2dOptions(2, cfg.relay_width, 3).padding(1)));
    for (int i = 0; i < 3; ++i) {
        blocks->push_back(ResBlock(cfg.relay_width));
    }
    register_module("blocks", blocks);
    film_gen = register_module("film_gen", FilmGenerator(cfg.film_width, cfg.relay_width));
    conv_out = register_module(
        "conv_out", nn::Conv2d(nn::Conv2dOptions(cfg.relay_width, cfg.codebook_size, 1)));
}

torch::Tensor RelayNetImpl::forward(const torch::Tensor& received_iq, double snr_db) {
    if (received_iq.size(-2) != h_ * w_) {
        throw std::invalid_argument("received frame length does not match the latent grid");
    }
    torch::Tensor x = frame_to_grid(received_iq, h_, w_);
    auto [gamma, beta] = film_gen->forward(snr_db, x.size(0), h_, w_, x.options());
    x = conv_in->forward(x);
    for (const auto& block : *blocks) {
        x = block->as<ResBlockImpl>()->forward(x);
        x = film_apply(x, gamma, beta);
    }
    x = conv_out->forward(x);  // [B, K, h, w]
    return grid_to_features(x);
}

// ---- encoder / decoder ----------------------------------------------------

SemanticEncoderImpl::SemanticEncoderImpl(const NetworkConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    int64_t in = 3;
    for (int64_t d = cfg.downsample_factor; d > 1; d /= 2) {
        layers->push_back(nn::Conv2d(nn::Conv2dOptions(in, cfg.base_width, 4).stride(2).padding(1)));
        in = cfg.base_width;
    }
    for (int i = 0; i < 4; ++i) {
        layers->push_back(nn::Conv2d(nn::Conv2dOptions(cfg.base_width, cfg.base_width, 3).padding(1)));
    }
    layers->push_back(ResBlock(cfg.base_width));
    layers->push_back(ResBlock(cfg.base_width));
    layers->push_back(nn::Conv2d(nn::Conv2dOptions(cfg.base_width, cfg.feature_dim, 1)));
    register_module("layers", layers);
}

torch::Tensor SemanticEncoderImpl::forward(const torch::Tensor& image) {
    if (image.dim() != 4 || image.size(1) != 3 || image.size(2) != cfg_.image_size ||
        image.size(3) != cfg_.image_size) {
        throw std::invalid_argument("encoder expects [B, 3, S, S] input");
    }
    {
        torch::NoGradGuard no_grad;
        double lo = image.min().item<double>();
        double hi = image.max().item<double>();
        if (lo < -1e-6 || hi > 1.0 + 1e-6) {
            throw std::invalid_argument("encoder expects pixels in [0, 1]");
        }
    }
    torch::Tensor x = image;
    const int64_t n = (int64_t)layers->size();
    for (int64_t i = 0; i < n; ++i) {
        if (auto* conv = (*layers)[i]->as<nn::Conv2dImpl>()) {
            x = conv->forward(x);
            if (i + 1 < n) x = torch::relu(x);
        } else {
            x = (*layers)[i]->as<ResBlockImpl>()->forward(x);
        }
    }
    return grid_to_features(x);
}

SemanticDecoderImpl::SemanticDecoderImpl(const NetworkConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    layers->push_back(nn::Conv2d(nn::Conv2dOptions(cfg.feature_dim, cfg.base_width, 1)));
    layers->push_back(ResBlock(cfg.base_width));
    layers->push_back(ResBlock(cfg.base_width));
    for (int i = 0; i < 4; ++i) {
        layers->push_back(
            nn::ConvTranspose2d(nn::ConvTranspose2dOptions(cfg.base_width, cfg.base_width, 3).padding(1)));
    }
    for (int64_t d = cfg.downsample_factor; d > 2; d /= 2) {
        layers->push_back(
            nn::ConvTranspose2d(nn::ConvTranspose2dOptions(cfg.base_width, cfg.base_width, 4).stride(2).padding(1)));
    }
    layers->push_back(
        nn::ConvTranspose2d(nn::ConvTranspose2dOptions(cfg.base_width, 3, 4).stride(2).padding(1)));
    register_module("layers", layers);
}

torch::Tensor SemanticDecoderImpl::forward_grid(const torch::Tensor& grid) {
    if (grid.dim() != 4 || grid.size(1) != cfg_.feature_dim) {
        throw std::invalid_argument("decoder expects [B, N, h, w] input");
    }
    torch::Tensor x = grid;
    const int64_t n = (int64_t)layers->size();
    for (int64_t i = 0; i < n; ++i) {
        if (auto* res = (*layers)[i]->as<ResBlockImpl>()) {
            x = res->forward(x);
        } else if (auto* conv = (*layers)[i]->as<nn::Conv2dImpl>()) {
            x = torch::relu(conv->forward(x));
        } else {
            x = (*layers)[i]->as<nn::ConvTranspose2dImpl>()->forward(x);
            if (i + 1 < n) x = torch::relu(x);
        }
    }
    return torch::sigmoid(x);
}

torch::Tensor SemanticDecoderImpl::forward(const torch::Tensor& features) {
    return forward_grid(features_to_grid(features, cfg_.latent_side()));
}

// ---- model ----------------------------------------------------------------

SfscModelImpl::SfscModelImpl(const NetworkConfig& config, uint64_t seed) : cfg(config) {
    cfg.validate();
    encoder = register_module("encoder", SemanticEncoder(cfg));
    decoder = register_module("decoder", SemanticDecoder(cfg));
    book = register_module("book", codebook::Codebook(cfg.codebook_size, cfg.feature_dim, seed));
    forwarder = register_module("forwarder", RelayNet(cfg));
    restorer = register_module("restorer", RelayNet(cfg));
    constellation = Constellation::qam(cfg.codebook_size);
}

torch::Tensor SfscModelImpl::vq_scores(const torch::Tensor& features) {
    torch::Tensor diff = features.unsqueeze(-2) - book->vectors;  // [..., M, K, N]
    return -diff.square().sum(-1);
}

int64_t count_parameters(const torch::nn::Module& model) {
    int64_t total = 0;
    for (const auto& p : model.parameters()) {
        if (p.requires_grad()) total += p.numel();
    }
    return total;
}

std::string parameter_report(const torch::nn::Module& model) {
    std::ostringstream os;
    int64_t total = 0;
    for (const auto& item : model.named_parameters()) {
        if (!item.value().requires_grad()) continue;
        os << item.key() << "  ";
        os << "[";
        const auto sizes = item.value().sizes();
        for (size_t i = 0; i < sizes.size(); ++i) os << (i ? "x" : "") << sizes[i];
        os << "]  " << item.value().numel() << "\n";
        total += item.value().numel();
    }
    os << "total trainable parameters: " << total << "\n";
    return os.str();
}

}  // namespace sfsc::semnet
