#include "sfsc/harness/baseline.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "sfsc/losses.hpp"

namespace sfsc::harness {

namespace {

uint64_t derive_seed(uint64_t seed, uint64_t stage) {
    uint64_t z = seed + stage * 0x9e3779b97f4a7c15ULL + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Per-batch-element rescale to unit average symbol power.
torch::Tensor normalize_frame(const torch::Tensor& iq) {
    torch::Tensor power = iq.square().sum(-1).mean(-1, true).unsqueeze(-1);  // [B,1,1]
    return iq / torch::sqrt(power.clamp_min(1e-20));
}

void mark(StepTrace* trace, const char* stage) {
    if (trace != nullptr) trace->mark(stage);
}

}  // namespace

DeepJsccModelImpl::DeepJsccModelImpl(const semnet::NetworkConfig& network) : cfg(network) {
    cfg.validate();
    const int64_t w = cfg.relay_width;
    int64_t steps = 0;
    for (int64_t f = cfg.downsample_factor; f > 1; f /= 2) ++steps;

    enc_layers = register_module("enc_layers", torch::nn::ModuleList());
    int64_t in = 3;
    for (int64_t s = 0; s < steps; ++s) {
        enc_layers->push_back(
            torch::nn::Conv2d(torch::nn::Conv2dOptions(in, w, 4).stride(2).padding(1)));
        in = w;
    }
    enc_layers->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, w, 3).padding(1)));
    enc_layers->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(w, 2, 1)));

    dec_layers = register_module("dec_layers", torch::nn::ModuleList());
    dec_layers->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(2, w, 3).padding(1)));
    dec_layers->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(w, w, 3).padding(1)));
    for (int64_t s = 0; s < steps; ++s) {
        dec_layers->push_back(torch::nn::ConvTranspose2d(
            torch::nn::ConvTranspose2dOptions(w, w, 4).stride(2).padding(1)));
    }
    dec_layers->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(w, 3, 3).padding(1)));
}

channel::SymbolFrame DeepJsccModelImpl::encode(const torch::Tensor& images) {
    torch::Tensor x = images;
    const size_t last = enc_layers->size() - 1;
    for (size_t i = 0; i < enc_layers->size(); ++i) {
        x = enc_layers[i]->as<torch::nn::Conv2d>()->forward(x);
        if (i + 1 < last) x = torch::relu(x);
    }
    return {normalize_frame(semnet::grid_to_frame(x))};
}

torch::Tensor DeepJsccModelImpl::decode(const channel::SymbolFrame& frame) {
    const int64_t side = cfg.latent_side();
    torch::Tensor x = semnet::frame_to_grid(frame.iq, side, side);
    const size_t last = dec_layers->size() - 1;
    for (size_t i = 0; i < dec_layers->size(); ++i) {
        if (auto* conv = dec_layers[i]->as<torch::nn::Conv2d>()) {
            x = conv->forward(x);
        } else {
            x = dec_layers[i]->as<torch::nn::ConvTranspose2d>()->forward(x);
        }
        if (i < last) x = torch::relu(x);
    }
    return torch::sigmoid(x);
}

BaselineStepResult tm_deepjscc_forward(DeepJsccModel& model, const torch::Tensor& images,
                                       const channel::ChannelConfig& ul,
                                       const channel::ChannelConfig& dl, uint64_t seed,
                                       StepTrace* trace) {
    mark(trace, "encode");
    channel::SymbolFrame tx = model->encode(images);
    mark(trace, "uplink_channel");
    channel::ChannelRealization h_ul = channel::sample_realization(ul, derive_seed(seed, 1));
    channel::SymbolFrame rx_relay = channel::apply_channel(tx, h_ul, derive_seed(seed, 2));
    mark(trace, "transparent_forward");
    channel::SymbolFrame fwd = channel::transparent_forward(rx_relay);
    mark(trace, "downlink_channel");
    channel::ChannelRealization h_dl = channel::sample_realization(dl, derive_seed(seed, 3));
    channel::SymbolFrame rx = channel::apply_channel(fwd, h_dl, derive_seed(seed, 4));
    // Receiver-side CSI of the cascaded channel at the gateway.
    rx = channel::equalize(channel::equalize(rx, h_dl), h_ul);
    mark(trace, "decode");
    BaselineStepResult out;
    out.reconstruction = model->decode(rx);
    out.mse = losses::recon_loss(images, out.reconstruction);
    return out;
}

BaselineStepResult rm_deepjscc_forward(DeepJsccModel& model, const torch::Tensor& images,
                                       const channel::ChannelConfig& ul,
                                       const channel::ChannelConfig& dl, uint64_t seed,
                                       StepTrace* trace) {
    mark(trace, "encode");
    channel::SymbolFrame tx = model->encode(images);
    mark(trace, "uplink_channel");
    channel::ChannelRealization h_ul = channel::sample_realization(ul, derive_seed(seed, 1));
    channel::SymbolFrame rx_relay = channel::apply_channel(tx, h_ul, derive_seed(seed, 2));
    rx_relay = channel::equalize(rx_relay, h_ul);
    mark(trace, "onboard_decode");
    torch::Tensor onboard = model->decode(rx_relay);
    mark(trace, "onboard_encode");
    channel::SymbolFrame retx = model->encode(onboard);
    mark(trace, "downlink_channel");
    channel::ChannelRealization h_dl = channel::sample_realization(dl, derive_seed(seed, 3));
    channel::SymbolFrame rx = channel::apply_channel(retx, h_dl, derive_seed(seed, 4));
    rx = channel::equalize(rx, h_dl);
    mark(trace, "decode");
    BaselineStepResult out;
    out.reconstruction = model->decode(rx);
    out.mse = losses::recon_loss(images, out.reconstruction);
    return out;
}

TrainResult train_deepjscc(DeepJsccModel& model, const RunConfig& cfg, const Dataset& data,
                           std::ostream* log) {
    if (cfg.mode != Mode::kTmDeepJscc && cfg.mode != Mode::kRmDeepJscc) {
        throw std::invalid_argument("train_deepjscc expects a deepjscc mode");
    }
    model->train();
    torch::optim::Adam opt(model->parameters(), torch::optim::AdamOptions(cfg.learning_rate));
    std::mt19937_64 rng(cfg.seed);
    const int64_t n = data.train.size(0);

    TrainResult result;
    uint64_t step = 0;
    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = cfg.learning_rate;
        if (cfg.cosine_decay && cfg.epochs > 1) {
            lr *= 0.5 * (1.0 + std::cos(M_PI * double(epoch) / double(cfg.epochs)));
        }
        for (auto& group : opt.param_groups()) {
            static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
        }
        std::vector<int64_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        EpochLog elog;
        elog.epoch = epoch;
        elog.lr = lr;
        int64_t batches = 0;
        for (int64_t begin = 0; begin + cfg.batch_size <= n; begin += cfg.batch_size) {
            channel::ChannelConfig ul = cfg.channel_ul;
            channel::ChannelConfig dl = cfg.channel_dl;
            if (cfg.snr_policy.uniform) {
                ul.snr_db = cfg.snr_policy.draw(rng);
                dl.snr_db = cfg.snr_policy.draw(rng);
            }
            torch::Tensor idx = torch::empty({cfg.batch_size}, torch::kLong);
            auto acc = idx.accessor<int64_t, 1>();
            for (int64_t i = 0; i < cfg.batch_size; ++i) acc[i] = order[begin + i];
            torch::Tensor batch = data.train.index_select(0, idx);

            opt.zero_grad();
            BaselineStepResult r = cfg.mode == Mode::kTmDeepJscc
                                       ? tm_deepjscc_forward(model, batch, ul, dl,
                                                             cfg.seed * 7919 + step, nullptr)
                                       : rm_deepjscc_forward(model, batch, ul, dl,
                                                             cfg.seed * 7919 + step, nullptr);
            ++step;
            const double mse = r.mse.item<double>();
            if (!std::isfinite(mse)) {
                result.diverged = true;
                if (log != nullptr) (*log) << "training diverged at epoch " << epoch << "\n";
                return result;
            }
            r.mse.backward();
            opt.step();
            elog.rec += mse;
            elog.total += mse;
            ++batches;
        }
        if (batches > 0) {
            elog.rec /= batches;
            elog.total /= batches;
        }
        if (log != nullptr) {
            (*log) << "epoch " << elog.epoch << " mse " << elog.rec << " lr " << elog.lr << "\n";
        }
        result.history.push_back(elog);
    }
    return result;
}

}  // namespace sfsc::harness
