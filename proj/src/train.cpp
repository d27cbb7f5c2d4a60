#include "sfsc/harness/train.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace sfsc::harness {

namespace {

double cosine_lr(const RunConfig& cfg, int64_t epoch) {
    if (!cfg.cosine_decay || cfg.epochs <= 1) return cfg.learning_rate;
    const double t = double(epoch) / double(cfg.epochs);
    return cfg.learning_rate * 0.5 * (1.0 + std::cos(M_PI * t));
}

void set_lr(torch::optim::Optimizer& opt, double lr) {
    for (auto& group : opt.param_groups()) {
        static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    }
}

std::vector<int64_t> shuffled_order(int64_t n, std::mt19937_64& rng) {
    std::vector<int64_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

torch::Tensor take(const torch::Tensor& data, const std::vector<int64_t>& order, int64_t begin,
                   int64_t count) {
    torch::Tensor idx = torch::empty({count}, torch::kLong);
    auto acc = idx.accessor<int64_t, 1>();
    for (int64_t i = 0; i < count; ++i) acc[i] = order[begin + i];
    return data.index_select(0, idx);
}

void log_epoch(std::ostream* log, const EpochLog& e) {
    if (log == nullptr) return;
    (*log) << "epoch " << e.epoch << " total " << e.total << " rec " << e.rec << " trans "
           << e.trans << " quant " << e.quant << " lr " << e.lr << "\n";
}

codebook::EstimatorKind estimator_kind(const RunConfig& cfg) {
    return cfg.estimator == "straight_through" ? codebook::EstimatorKind::kStraightThrough
                                               : codebook::EstimatorKind::kReinMax;
}

/// Overwrites the listed codeword rows with random rows of `pool` [X, N].
/// Seeding codewords from the feature distribution keeps every codeword in
/// range of the encoder output; a spread-mismatched random init lets one
/// codeword capture all assignments from the first step onward.
void reseed_rows(torch::Tensor& vectors, const torch::Tensor& pool,
                 const std::vector<int64_t>& rows, std::mt19937_64& rng) {
    torch::NoGradGuard no_grad;
    std::uniform_int_distribution<int64_t> pick(0, pool.size(0) - 1);
    for (int64_t row : rows) {
        vectors[row].copy_(pool[pick(rng)]);
    }
}

void bootstrap_codebook(torch::Tensor& vectors, const torch::Tensor& pool, std::mt19937_64& rng) {
    std::vector<int64_t> all(vectors.size(0));
    std::iota(all.begin(), all.end(), 0);
    reseed_rows(vectors, pool, all, rng);
}

/// Tracks per-epoch codeword usage and re-seeds codewords that went a whole
/// epoch without a single assignment (dead-codeword revival).
struct UsageTracker {
    std::vector<int64_t> counts;

    explicit UsageTracker(int64_t k) : counts(k, 0) {}

    void add(const torch::Tensor& onehots) {
        torch::NoGradGuard no_grad;
        torch::Tensor idx = onehots.argmax(-1).reshape({-1});
        auto acc = idx.accessor<int64_t, 1>();
        for (int64_t i = 0; i < idx.size(0); ++i) ++counts[acc[i]];
    }

    std::vector<int64_t> drain_dead() {
        std::vector<int64_t> dead;
        bool any = false;
        for (size_t k = 0; k < counts.size(); ++k) {
            any = any || counts[k] > 0;
            if (counts[k] == 0) dead.push_back(int64_t(k));
        }
        std::fill(counts.begin(), counts.end(), 0);
        return any ? dead : std::vector<int64_t>{};
    }
};

/// Autoencoder-only warmup on the direct feature path. The cold-started
/// encoder maps every image to a nearly identical feature grid; bootstrapping
/// the codebook from those features glues the quantizer onto a content-blind
/// encoder, and the quantized system then sits at the dataset-mean
/// equilibrium for thousands of steps before symmetry breaks. A few direct
/// encode-decode epochs make the features image-dependent before the
/// codebook ever sees them.
void autoencoder_warmup(semnet::SemanticEncoder& encoder, semnet::SemanticDecoder& decoder,
                        const std::vector<torch::Tensor>& streams, const RunConfig& cfg,
                        std::ostream* log) {
    if (cfg.warmup_epochs == 0) return;
    std::vector<torch::Tensor> params;
    for (auto& p : encoder->parameters()) params.push_back(p);
    for (auto& p : decoder->parameters()) params.push_back(p);
    torch::optim::Adam opt(params, torch::optim::AdamOptions(cfg.learning_rate));
    std::mt19937_64 rng(cfg.seed ^ 0x3aec0de5ULL);
    for (int64_t epoch = 0; epoch < cfg.warmup_epochs; ++epoch) {
        double total = 0.0;
        int64_t batches = 0;
        for (const torch::Tensor& train : streams) {
            std::vector<int64_t> order = shuffled_order(train.size(0), rng);
            for (int64_t begin = 0; begin + cfg.batch_size <= train.size(0);
                 begin += cfg.batch_size) {
                torch::Tensor batch = take(train, order, begin, cfg.batch_size);
                opt.zero_grad();
                torch::Tensor rec =
                    losses::recon_loss(batch, decoder->forward(encoder->forward(batch)));
                rec.backward();
                opt.step();
                total += rec.item<double>();
                ++batches;
            }
        }
        if (log != nullptr) {
            (*log) << "warmup epoch " << epoch << " rec "
                   << (batches > 0 ? total / batches : 0.0) << "\n";
        }
    }
}

/// Continuous-path warmup for the two-user system: the exact split-plus-
/// restored-residual decode structure with quantization and channels removed.
/// Warming only the plain autoencoder is not enough here; the decoder input
/// layout has to be learned before the codebook commit terms anchor the
/// combined features.
void csmdma_warmup(CsmdmaModel& model, const torch::Tensor& u1, const torch::Tensor& u2,
                   const RunConfig& cfg, std::ostream* log) {
    if (cfg.warmup_epochs == 0) return;
    torch::optim::Adam opt(model->parameters(), torch::optim::AdamOptions(cfg.learning_rate));
    std::mt19937_64 rng(cfg.seed ^ 0x3aec0de5ULL);
    const int64_t n = std::min(u1.size(0), u2.size(0));
    for (int64_t epoch = 0; epoch < cfg.warmup_epochs; ++epoch) {
        std::vector<int64_t> o1 = shuffled_order(u1.size(0), rng);
        std::vector<int64_t> o2 = shuffled_order(u2.size(0), rng);
        double total = 0.0;
        int64_t batches = 0;
        for (int64_t begin = 0; begin + cfg.batch_size <= n; begin += cfg.batch_size) {
            std::array<torch::Tensor, 2> imgs = {take(u1, o1, begin, cfg.batch_size),
                                                 take(u2, o2, begin, cfg.batch_size)};
            opt.zero_grad();
            torch::Tensor f1 = model->encoder->forward(imgs[0]);
            torch::Tensor f2 = model->encoder->forward(imgs[1]);
            torch::Tensor combined = model->cfe->forward(f1, f2);
            torch::Tensor loss = torch::zeros({}, imgs[0].options());
            for (int u = 0; u < 2; ++u) {
                const torch::Tensor& f = u == 0 ? f1 : f2;
                torch::Tensor split = mdma::split_combined(combined, model->common, u + 1,
                                                           model->cfg.feature_dim);
                torch::Tensor residual = model->efr->forward(model->efe->forward(f - split));
                torch::Tensor rec = model->decoder->forward(mdma::fuse(split, residual));
                loss = loss + 0.5 * losses::recon_loss(imgs[u], rec);
            }
            loss.backward();
            opt.step();
            total += loss.item<double>();
            ++batches;
        }
        if (log != nullptr) {
            (*log) << "warmup epoch " << epoch << " rec "
                   << (batches > 0 ? total / batches : 0.0) << "\n";
        }
    }
}

/// Shared loop driver: `step` maps (batch index range, channel configs, seed)
/// to a loss breakdown and runs backward bookkeeping here.
template <typename StepFn>
TrainResult run_training(torch::nn::Module& module, const RunConfig& cfg, const Dataset& data,
                         std::ostream* log, StepFn&& step) {
    torch::optim::Adam opt(module.parameters(), torch::optim::AdamOptions(cfg.learning_rate));
    std::mt19937_64 rng(cfg.seed);
    const int64_t n = data.train.size(0);

    TrainResult result;
    uint64_t step_counter = 0;
    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(cfg, epoch);
        set_lr(opt, lr);
        std::vector<int64_t> order = shuffled_order(n, rng);

        EpochLog elog;
        elog.epoch = epoch;
        elog.lr = lr;
        int64_t batches = 0;
        for (int64_t begin = 0; begin + cfg.batch_size <= n; begin += cfg.batch_size) {
            channel::ChannelConfig ul = cfg.channel_ul;
            channel::ChannelConfig dl = cfg.channel_dl;
            ul.snr_db = cfg.snr_policy.uniform ? cfg.snr_policy.draw(rng) : ul.snr_db;
            dl.snr_db = cfg.snr_policy.uniform ? cfg.snr_policy.draw(rng) : dl.snr_db;

            opt.zero_grad();
            losses::LossBreakdown loss =
                step(order, begin, ul, dl, cfg.seed * 7919 + step_counter, rng);
            if (step_counter == 0) result.initial_total = loss.total.item<double>();
            ++step_counter;
            if (!std::isfinite(loss.total.item<double>())) {
                result.diverged = true;
                if (log != nullptr) (*log) << "training diverged at epoch " << epoch << "\n";
                return result;
            }
            loss.total.backward();
            opt.step();

            elog.rec += loss.rec.item<double>();
            elog.trans += loss.trans.item<double>();
            elog.quant += loss.quant.item<double>();
            elog.total += loss.total.item<double>();
            ++batches;
        }
        if (batches > 0) {
            elog.rec /= batches;
            elog.trans /= batches;
            elog.quant /= batches;
            elog.total /= batches;
        }
        log_epoch(log, elog);
        result.history.push_back(elog);
    }
    return result;
}

}  // namespace

TrainResult train_sfsc(semnet::SfscModel& model, const RunConfig& cfg, const Dataset& data,
                       std::ostream* log) {
    model->train();
    autoencoder_warmup(model->encoder, model->decoder, {data.train}, cfg, log);
    RunConfig main_cfg = cfg;
    main_cfg.epochs = cfg.epochs - cfg.warmup_epochs;
    std::mt19937_64 book_rng(cfg.seed ^ 0x5eedb00cULL);
    {
        torch::NoGradGuard no_grad;
        const int64_t n = std::min<int64_t>(data.train.size(0), 2 * cfg.batch_size);
        torch::Tensor pool = model->encoder->forward(data.train.narrow(0, 0, n))
                                 .reshape({-1, model->cfg.feature_dim});
        bootstrap_codebook(model->book->vectors, pool, book_rng);
    }
    UsageTracker usage(model->cfg.codebook_size);
    return run_training(
        *model, main_cfg, data, log,
        [&](const std::vector<int64_t>& order, int64_t begin, const channel::ChannelConfig& ul,
            const channel::ChannelConfig& dl, uint64_t seed, std::mt19937_64&) {
            torch::Tensor batch = take(data.train, order, begin, cfg.batch_size);
            if (begin == 0) {
                std::vector<int64_t> dead = usage.drain_dead();
                if (!dead.empty()) {
                    torch::NoGradGuard no_grad;
                    torch::Tensor pool = model->encoder->forward(batch).reshape(
                        {-1, model->cfg.feature_dim});
                    reseed_rows(model->book->vectors, pool, dead, book_rng);
                }
            }
            SfscStepOptions opts;
            opts.temperature = cfg.temperature;
            opts.estimator = estimator_kind(cfg);
            opts.index_mode = IndexMode::kSample;
            opts.seed = seed;
            SfscStepResult r = sfsc_forward(model, batch, ul, dl, cfg.weights, opts);
            usage.add(r.true_indices);
            return r.loss;
        });
}

TrainResult train_csmdma(CsmdmaModel& model, const RunConfig& cfg, const Dataset& data,
                         std::ostream* log) {
    model->train();
    // Disjoint user streams: user 1 owns the first half of the training
    // tensor, user 2 the second half.
    const int64_t half = data.train.size(0) / 2;
    if (half < cfg.batch_size) throw std::invalid_argument("training set too small for two users");
    Dataset halved = data;
    halved.train = data.train.narrow(0, 0, half);
    torch::Tensor user2_pool = data.train.narrow(0, half, half);
    csmdma_warmup(model, halved.train, user2_pool, cfg, log);
    RunConfig main_cfg = cfg;
    main_cfg.epochs = cfg.epochs - cfg.warmup_epochs;
    std::mt19937_64 book_rng(cfg.seed ^ 0x5eedb00cULL);
    {
        torch::NoGradGuard no_grad;
        const int64_t n = std::min<int64_t>(half, 2 * cfg.batch_size);
        torch::Tensor f1 = model->encoder->forward(halved.train.narrow(0, 0, n));
        torch::Tensor f2 = model->encoder->forward(user2_pool.narrow(0, 0, n));
        torch::Tensor p1 = f1.reshape({-1, model->cfg.feature_dim});
        torch::Tensor p2 = f2.reshape({-1, model->cfg.feature_dim});
        bootstrap_codebook(model->book1->vectors, p1, book_rng);
        bootstrap_codebook(model->book2->vectors, p2, book_rng);
        torch::Tensor combined = model->cfe->forward(f1, f2).reshape({-1, model->common->width()});
        bootstrap_codebook(model->common->vectors, combined, book_rng);
    }
    UsageTracker usage1(model->cfg.codebook_size);
    UsageTracker usage2(model->cfg.codebook_size);
    UsageTracker usage_c(model->cfg.codebook_size);
    return run_training(
        *model, main_cfg, halved, log,
        [&, user2_pool](const std::vector<int64_t>& order, int64_t begin,
                        const channel::ChannelConfig& ul, const channel::ChannelConfig& dl,
                        uint64_t seed, std::mt19937_64& rng) {
            std::vector<int64_t> order2 = shuffled_order(user2_pool.size(0), rng);
            std::array<torch::Tensor, 2> users = {
                take(halved.train, order, begin, cfg.batch_size),
                take(user2_pool, order2, begin, cfg.batch_size)};
            if (begin == 0) {
                std::vector<int64_t> dead1 = usage1.drain_dead();
                std::vector<int64_t> dead2 = usage2.drain_dead();
                std::vector<int64_t> dead_c = usage_c.drain_dead();
                if (!dead1.empty() || !dead2.empty() || !dead_c.empty()) {
                    torch::NoGradGuard no_grad;
                    torch::Tensor f1 = model->encoder->forward(users[0]);
                    torch::Tensor f2 = model->encoder->forward(users[1]);
                    torch::Tensor p1 = f1.reshape({-1, model->cfg.feature_dim});
                    torch::Tensor p2 = f2.reshape({-1, model->cfg.feature_dim});
                    reseed_rows(model->book1->vectors, p1, dead1, book_rng);
                    reseed_rows(model->book2->vectors, p2, dead2, book_rng);
                    torch::Tensor combined =
                        model->cfe->forward(f1, f2).reshape({-1, model->common->width()});
                    reseed_rows(model->common->vectors, combined, dead_c, book_rng);
                }
            }
            CsmdmaStepOptions opts;
            opts.temperature = cfg.temperature;
            opts.estimator = estimator_kind(cfg);
            opts.index_mode = IndexMode::kSample;
            opts.seed = seed;
            opts.ideal_uplink = cfg.mdma.ideal_uplink;
            CsmdmaStepResult r = csmdma_forward(model, users, ul, dl, cfg.weights, opts);
            usage1.add(r.user_onehots[0]);
            usage1.add(r.enh_onehots[0]);
            usage2.add(r.user_onehots[1]);
            usage2.add(r.enh_onehots[1]);
            usage_c.add(r.common_onehots);
            return r.loss;
        });
}

}  // namespace sfsc::harness
