#include "sfsc/harness/pipeline.hpp"

#include <stdexcept>

namespace sfsc::harness {

namespace {

// splitmix64: decorrelates the per-stage seeds derived from one step seed.
uint64_t derive_seed(uint64_t seed, uint64_t stage) {
    uint64_t z = seed + stage * 0x9e3779b97f4a7c15ULL + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// -||l - e||^2 scores of features [B, M, N] against vectors [K, W].
torch::Tensor neg_sq_dist(const torch::Tensor& features, const torch::Tensor& vectors) {
    return -(features.unsqueeze(-2) - vectors).square().sum(-1);
}

/// Per-position affine standardization of the scores. Preserves the argmax
/// and the gradient path but removes the raw -d^2 scale, which otherwise
/// makes the sampling softmax near-uniform whenever the codewords are almost
/// equidistant (the encoder cold start), regardless of temperature.
torch::Tensor standardize(const torch::Tensor& scores) {
    torch::Tensor mean = scores.mean(-1, true);
    torch::Tensor sd = scores.std(-1, /*unbiased=*/false, /*keepdim=*/true).clamp_min(1e-12);
    return (scores - mean) / sd;
}

/// Strict one-hots from scores, ties toward the lowest index.
torch::Tensor hard_onehot(const torch::Tensor& scores) {
    const int64_t k = scores.size(-1);
    torch::Tensor maxima = std::get<0>(scores.max(-1, true));
    torch::Tensor candidates =
        torch::where(scores >= maxima, torch::arange(k, scores.options()).expand_as(scores),
                     torch::full_like(scores, double(k)));
    torch::Tensor idx = std::get<0>(candidates.min(-1)).to(torch::kLong);
    return torch::one_hot(idx, k).to(scores.dtype());
}

torch::Tensor select_onehot(const torch::Tensor& scores, const SfscStepOptions& opts,
                            uint64_t stage) {
    switch (opts.index_mode) {
        case IndexMode::kSample:
            return codebook::differentiable_onehot(scores, opts.temperature,
                                                   derive_seed(opts.seed, stage), opts.estimator);
        case IndexMode::kSoft:
            return torch::softmax(scores / opts.temperature, -1);
        case IndexMode::kHard:
            return hard_onehot(scores);
    }
    throw std::logic_error("unreachable");
}

/// Transmitter-side quantization: commits to the nearest codeword. Sampling
/// here instead would transmit near-uniform noise while the raw -d^2 scores
/// are still almost tied (encoder cold start), and the decoder then converges
/// onto the dataset mean. Encoder gradients travel through the
/// straight-through copy on the reconstruction path, codebook gradients
/// through the quantization loss; a softmax surrogate on these scores only
/// accelerates feature collapse onto the codewords.
torch::Tensor vq_onehot(const torch::Tensor& scores, const SfscStepOptions& opts) {
    if (opts.index_mode == IndexMode::kSoft) {
        return torch::softmax(standardize(scores) / opts.temperature, -1);
    }
    return hard_onehot(scores);
}

void mark(StepTrace* trace, const char* stage) {
    if (trace != nullptr) trace->mark(stage);
}

}  // namespace

SfscStepResult sfsc_forward(semnet::SfscModel& model, const torch::Tensor& images,
                            const channel::ChannelConfig& ul, const channel::ChannelConfig& dl,
                            const losses::LossWeights& weights, const SfscStepOptions& opts) {
    const bool strict = opts.index_mode == IndexMode::kHard;

    mark(opts.trace, "encode");
    torch::Tensor features = model->encoder->forward(images);

    mark(opts.trace, "vq_csg");
    torch::Tensor scores = neg_sq_dist(features, model->book->vectors);
    torch::Tensor onehots = vq_onehot(scores, opts);
    torch::Tensor quantized = codebook::dequantize(onehots, model->book->vectors);
    // In training the transmitted frame is detached: the CE terms train the
    // forwarder/restorer only, otherwise their gradients (orders of magnitude
    // larger than the reconstruction term) swamp the encoder's updates.
    channel::SymbolFrame tx = semnet::modulate(
        opts.index_mode == IndexMode::kSample ? onehots.detach() : onehots,
        model->constellation, strict);

    mark(opts.trace, "uplink_channel");
    channel::ChannelRealization h_ul = channel::sample_realization(ul, derive_seed(opts.seed, 2));
    channel::SymbolFrame rx_relay = channel::apply_channel(tx, h_ul, derive_seed(opts.seed, 3));
    // Receiver-side CSI: coherent equalization ahead of the learned receiver.
    rx_relay = channel::equalize(rx_relay, h_ul);

    mark(opts.trace, "semantic_forward");
    torch::Tensor relay_logits = model->forwarder->forward(rx_relay.iq, ul.snr_db);
    torch::Tensor relay_probs = torch::softmax(relay_logits, -1);
    torch::Tensor relay_onehots = select_onehot(relay_logits, opts, 4);

    mark(opts.trace, "csg_relay");
    channel::SymbolFrame tx_relay = semnet::modulate(relay_onehots, model->constellation, strict);

    mark(opts.trace, "downlink_channel");
    channel::ChannelRealization h_dl = channel::sample_realization(dl, derive_seed(opts.seed, 5));
    channel::SymbolFrame rx_gw = channel::apply_channel(tx_relay, h_dl, derive_seed(opts.seed, 6));
    rx_gw = channel::equalize(rx_gw, h_dl);

    mark(opts.trace, "index_restore");
    torch::Tensor gw_logits = model->restorer->forward(rx_gw.iq, dl.snr_db);
    torch::Tensor gw_probs = torch::softmax(gw_logits, -1);
    torch::Tensor gw_onehots = select_onehot(gw_logits, opts, 7);

    mark(opts.trace, "dequantize_decode");
    torch::Tensor gw_features = codebook::dequantize(gw_onehots, model->book->vectors);
    if (opts.index_mode == IndexMode::kSample) {
        // Training decodes the transmitter-side quantized features with the
        // straight-through copy; the restorer chain is trained by the CE
        // terms and only replaces the decoder input at evaluation. Feeding
        // the restored indices here instead deadlocks the cold start: the
        // decoder learns to ignore its (initially random) input, after which
        // no reconstruction gradient ever reaches the encoder.
        gw_features = features + (quantized - features).detach();
    }
    torch::Tensor reconstruction = model->decoder->forward(gw_features);

    mark(opts.trace, "loss");
    torch::Tensor target = opts.index_mode == IndexMode::kSoft
                               ? hard_onehot(scores).detach()
                               : onehots.detach();
    torch::Tensor rec = losses::recon_loss(images, reconstruction);
    torch::Tensor trans =
        losses::trans_loss(target, relay_probs) + losses::trans_loss(target, gw_probs);
    torch::Tensor quant = codebook::quantization_loss(features, quantized, weights.beta_q);

    SfscStepResult out;
    out.loss = losses::composite_loss(rec, trans, quant, weights);
    out.reconstruction = reconstruction;
    out.true_indices = target;
    out.restored_probs = gw_probs;
    return out;
}

CsmdmaModelImpl::CsmdmaModelImpl(const semnet::NetworkConfig& network, int64_t p1, int64_t p2,
                                 uint64_t seed)
    : cfg(network), constellation(semnet::Constellation::qam(network.codebook_size)) {
    cfg.validate();
    if (p1 < 1 || p2 < 1) throw std::invalid_argument("sub-codebook widths must be >= 1");
    if (p1 + p2 > cfg.feature_dim) {
        throw std::invalid_argument("p1 + p2 must not exceed the feature dimension");
    }
    if (cfg.latent_side() % 2 != 0) {
        throw std::invalid_argument("latent side must be even for the enhancement stream");
    }
    encoder = register_module("encoder", semnet::SemanticEncoder(cfg));
    decoder = register_module("decoder", semnet::SemanticDecoder(cfg));
    forwarder = register_module("forwarder", semnet::RelayNet(cfg));
    book1 = register_module("book1", codebook::Codebook(cfg.codebook_size, cfg.feature_dim, seed));
    book2 = register_module("book2",
                            codebook::Codebook(cfg.codebook_size, cfg.feature_dim, seed + 101));
    common = register_module(
        "common", codebook::CommonOrthogonalCodebook(cfg.codebook_size, p1, p2, seed + 202));
    cfe = register_module(
        "cfe", mdma::CombinedFeatureExtractor(cfg.feature_dim, p1 + p2, cfg.latent_side()));
    efe = register_module("efe", mdma::EnhancementExtractor(cfg.feature_dim, cfg.latent_side()));
    efr = register_module("efr", mdma::EnhancementRestorer(cfg.feature_dim, cfg.latent_side()));
    common_restorer = register_module("common_restorer", semnet::RelayNet(cfg));
    enh_restorer = register_module("enh_restorer", semnet::RelayNet(cfg, 2));
}

CsmdmaStepResult csmdma_forward(CsmdmaModel& model,
                                const std::array<torch::Tensor, 2>& user_images,
                                const channel::ChannelConfig& ul,
                                const channel::ChannelConfig& dl,
                                const losses::LossWeights& weights,
                                const CsmdmaStepOptions& opts) {
    const bool strict = opts.index_mode == IndexMode::kHard;
    // Same training split as the single-user pipeline: the reconstruction
    // path decodes transmitter-side quantized values through straight-through
    // copies, while the CE terms train the receiving networks on detached
    // frames. Evaluation replaces every ST value with the restored stream.
    const bool train_st = opts.index_mode == IndexMode::kSample;
    CsmdmaStepResult out;
    torch::Tensor trans = torch::zeros({}, user_images[0].options());
    torch::Tensor quant = torch::zeros({}, user_images[0].options());

    // Uplink: each user encodes, quantizes against its private codebook and
    // transmits; the relay re-estimates the indices.
    std::array<torch::Tensor, 2> recovered;  // [B, M, N] at the relay
    for (int u = 0; u < 2; ++u) {
        const uint64_t base = opts.seed + uint64_t(u) * 1000;
        mark(opts.trace, u == 0 ? "encode_user1" : "encode_user2");
        const codebook::Codebook& book = u == 0 ? model->book1 : model->book2;
        torch::Tensor features = model->encoder->forward(user_images[u]);
        torch::Tensor scores = neg_sq_dist(features, book->vectors);
        torch::Tensor onehots = vq_onehot(scores, opts);
        out.user_onehots[u] = onehots.detach();
        quant = quant + codebook::quantization_loss(
                            features, codebook::dequantize(onehots, book->vectors), weights.beta_q);

        torch::Tensor quantized_st =
            train_st ? features + (codebook::dequantize(onehots, book->vectors) - features).detach()
                     : torch::Tensor();
        if (opts.ideal_uplink) {
            mark(opts.trace, "ideal_uplink");
            recovered[u] = train_st ? quantized_st : codebook::dequantize(onehots, book->vectors);
            continue;
        }
        mark(opts.trace, "uplink_channel");
        channel::SymbolFrame tx = semnet::modulate(train_st ? onehots.detach() : onehots,
                                                   model->constellation, strict);
        channel::ChannelRealization h = channel::sample_realization(ul, derive_seed(base, 2));
        channel::SymbolFrame rx = channel::apply_channel(tx, h, derive_seed(base, 3));
        rx = channel::equalize(rx, h);

        mark(opts.trace, "semantic_forward");
        torch::Tensor logits = model->forwarder->forward(rx.iq, ul.snr_db);
        trans = trans + losses::trans_loss(onehots.detach(), torch::softmax(logits, -1));
        torch::Tensor relay_onehots = select_onehot(logits, opts, base + 4);
        recovered[u] = train_st ? quantized_st
                                : codebook::dequantize(relay_onehots, u == 0
                                                           ? model->book1->vectors
                                                           : model->book2->vectors);
    }

    // Common stream: combine, quantize against the shared codebook, transmit.
    mark(opts.trace, "combine");
    torch::Tensor combined = model->cfe->forward(recovered[0], recovered[1]);
    torch::Tensor common_scores = neg_sq_dist(combined, model->common->vectors);
    torch::Tensor common_onehots = vq_onehot(common_scores, opts);
    out.common_onehots = common_onehots.detach();
    torch::Tensor common_q = codebook::dequantize(common_onehots, model->common->vectors);
    quant = quant + codebook::quantization_loss(combined, common_q, weights.beta_q);
    torch::Tensor common_q_st =
        train_st ? combined + (common_q - combined).detach() : torch::Tensor();

    mark(opts.trace, "superpose_encode");
    channel::SymbolFrame tx_common = semnet::modulate(
        train_st ? common_onehots.detach() : common_onehots, model->constellation, strict);

    mark(opts.trace, "downlink_common");
    channel::ChannelRealization h_dlc =
        channel::sample_realization(dl, derive_seed(opts.seed, 12));
    channel::SymbolFrame rx_common =
        channel::apply_channel(tx_common, h_dlc, derive_seed(opts.seed, 13));
    rx_common = channel::equalize(rx_common, h_dlc);
    torch::Tensor common_logits = model->common_restorer->forward(rx_common.iq, dl.snr_db);
    trans = trans + losses::trans_loss(common_onehots.detach(), torch::softmax(common_logits, -1));
    torch::Tensor common_rx_onehots = select_onehot(common_logits, opts, opts.seed + 14);

    // Enhancement streams: per-user residual relative to the split component,
    // compressed to half the symbol budget and quantized against the private
    // codebook.
    torch::Tensor rec = torch::zeros({}, user_images[0].options());
    for (int u = 0; u < 2; ++u) {
        const uint64_t base = opts.seed + uint64_t(u) * 1000;
        mark(opts.trace, "enhancement_extract");
        const torch::Tensor& book = u == 0 ? model->book1->vectors : model->book2->vectors;
        torch::Tensor split_tx =
            mdma::split_semantics(common_onehots, model->common, u + 1, model->cfg.feature_dim);
        torch::Tensor residual = recovered[u] - split_tx;
        torch::Tensor enh = model->efe->forward(residual);
        torch::Tensor enh_scores = neg_sq_dist(enh, book);
        torch::Tensor enh_onehots = vq_onehot(enh_scores, opts);
        out.enh_onehots[u] = enh_onehots.detach();
        quant = quant + codebook::quantization_loss(enh, codebook::dequantize(enh_onehots, book),
                                                    weights.beta_q);

        mark(opts.trace, "downlink_enhancement");
        channel::SymbolFrame tx_enh = semnet::modulate(
            train_st ? enh_onehots.detach() : enh_onehots, model->constellation, strict);
        channel::ChannelRealization h =
            channel::sample_realization(dl, derive_seed(base, 22));
        channel::SymbolFrame rx_enh = channel::apply_channel(tx_enh, h, derive_seed(base, 23));
        rx_enh = channel::equalize(rx_enh, h);
        torch::Tensor enh_logits = model->enh_restorer->forward(rx_enh.iq, dl.snr_db);
        trans = trans + losses::trans_loss(enh_onehots.detach(), torch::softmax(enh_logits, -1));
        torch::Tensor enh_rx_onehots = select_onehot(enh_logits, opts, base + 24);

        mark(opts.trace, "split_fuse_decode");
        torch::Tensor split_rx =
            train_st
                ? mdma::split_combined(common_q_st, model->common, u + 1, model->cfg.feature_dim)
                : mdma::split_semantics(common_rx_onehots, model->common, u + 1,
                                        model->cfg.feature_dim);
        torch::Tensor residual_rx = model->efr->forward(
            train_st ? enh + (codebook::dequantize(enh_onehots, book) - enh).detach()
                     : codebook::dequantize(enh_rx_onehots, book));
        if (opts.disable_enhancement) residual_rx = torch::zeros_like(residual_rx);
        torch::Tensor fused = mdma::fuse(split_rx, residual_rx);
        out.reconstructions[u] = model->decoder->forward(fused);
        torch::Tensor mse = losses::recon_loss(user_images[u], out.reconstructions[u]);
        out.per_user_mse[u] = mse.detach();
        rec = rec + 0.5 * mse;
    }

    mark(opts.trace, "loss");
    out.loss = losses::composite_loss(rec, trans, quant, weights);
    return out;
}

}  // namespace sfsc::harness
