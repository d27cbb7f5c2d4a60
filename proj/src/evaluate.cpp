#include "sfsc/harness/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "sfsc/metrics.hpp"

namespace sfsc::harness {

namespace {

constexpr double kPsnrCap = 100.0;

struct Accumulator {
    double psnr_sum = 0.0;
    double ssim_sum = 0.0;
    int64_t count = 0;

    void add(const torch::Tensor& original, const torch::Tensor& reconstruction) {
        const int64_t b = original.size(0);
        for (int64_t i = 0; i < b; ++i) {
            double p = metrics::psnr(original[i], reconstruction[i], 1.0);
            psnr_sum += std::min(p, kPsnrCap);
            ssim_sum += metrics::ms_ssim(original[i], reconstruction[i]);
            ++count;
        }
    }
};

}  // namespace

EvalSummary evaluate_sfsc(semnet::SfscModel& model, const torch::Tensor& images,
                          const channel::ChannelConfig& ul, const channel::ChannelConfig& dl,
                          uint64_t seed, int64_t batch_size) {
    torch::NoGradGuard no_grad;
    model->eval();
    Accumulator acc;
    const int64_t n = images.size(0);
    for (int64_t begin = 0; begin < n; begin += batch_size) {
        const int64_t count = std::min(batch_size, n - begin);
        torch::Tensor batch = images.narrow(0, begin, count);
        SfscStepOptions opts;
        opts.index_mode = IndexMode::kHard;
        opts.seed = seed + uint64_t(begin);
        SfscStepResult r = sfsc_forward(model, batch, ul, dl, losses::LossWeights{}, opts);
        acc.add(batch, r.reconstruction);
    }
    const auto& cfg = model->cfg;
    return {acc.psnr_sum / acc.count, acc.ssim_sum / acc.count,
            metrics::rate(cfg.positions(), cfg.image_size, cfg.image_size)};
}

EvalSummary evaluate_csmdma(CsmdmaModel& model, const torch::Tensor& images,
                            const channel::ChannelConfig& ul, const channel::ChannelConfig& dl,
                            uint64_t seed, bool disable_enhancement, int64_t batch_size) {
    torch::NoGradGuard no_grad;
    model->eval();
    Accumulator acc;
    // Disjoint user streams, matching training: first half vs second half.
    const int64_t n = images.size(0) / 2;
    if (n < 1) throw std::invalid_argument("need at least 2 test images for two users");
    torch::Tensor pool1 = images.narrow(0, 0, n);
    torch::Tensor pool2 = images.narrow(0, n, n);
    for (int64_t begin = 0; begin < n; begin += batch_size) {
        const int64_t count = std::min(batch_size, n - begin);
        std::array<torch::Tensor, 2> users = {pool1.narrow(0, begin, count),
                                              pool2.narrow(0, begin, count)};
        CsmdmaStepOptions opts;
        opts.index_mode = IndexMode::kHard;
        opts.seed = seed + uint64_t(begin);
        opts.ideal_uplink = false;
        opts.disable_enhancement = disable_enhancement;
        CsmdmaStepResult r = csmdma_forward(model, users, ul, dl, losses::LossWeights{}, opts);
        acc.add(users[0], r.reconstructions[0]);
        acc.add(users[1], r.reconstructions[1]);
    }
    // Per user: the common stream is shared, plus one half-length private
    // enhancement stream.
    const auto& cfg = model->cfg;
    const int64_t uses = cfg.positions() + cfg.positions() / 2;
    return {acc.psnr_sum / acc.count, acc.ssim_sum / acc.count,
            metrics::rate(uses, cfg.image_size, cfg.image_size)};
}

EvalSummary evaluate_deepjscc(DeepJsccModel& model, Mode mode, const torch::Tensor& images,
                              const channel::ChannelConfig& ul, const channel::ChannelConfig& dl,
                              uint64_t seed, int64_t batch_size) {
    torch::NoGradGuard no_grad;
    model->eval();
    Accumulator acc;
    const int64_t n = images.size(0);
    for (int64_t begin = 0; begin < n; begin += batch_size) {
        const int64_t count = std::min(batch_size, n - begin);
        torch::Tensor batch = images.narrow(0, begin, count);
        BaselineStepResult r =
            mode == Mode::kTmDeepJscc
                ? tm_deepjscc_forward(model, batch, ul, dl, seed + uint64_t(begin))
                : rm_deepjscc_forward(model, batch, ul, dl, seed + uint64_t(begin));
        acc.add(batch, r.reconstruction);
    }
    const auto& cfg = model->cfg;
    return {acc.psnr_sum / acc.count, acc.ssim_sum / acc.count,
            metrics::rate(cfg.positions(), cfg.image_size, cfg.image_size)};
}

std::vector<SweepRow> sweep_snr(
    const std::function<EvalSummary(const channel::ChannelConfig&, const channel::ChannelConfig&,
                                    uint64_t)>& eval_fn,
    const RunConfig& cfg, const std::vector<double>& ul_grid, const std::vector<double>& dl_grid,
    const std::string& run_id) {
    std::vector<SweepRow> rows;
    uint64_t point = 0;
    for (double ul_db : ul_grid) {
        for (double dl_db : dl_grid) {
            channel::ChannelConfig ul = cfg.channel_ul;
            channel::ChannelConfig dl = cfg.channel_dl;
            ul.snr_db = ul_db;
            dl.snr_db = dl_db;
            EvalSummary s = eval_fn(ul, dl, cfg.seed * 100003 + point);
            ++point;
            rows.push_back({run_id, mode_to_string(cfg.mode), ul_db, dl_db, s.psnr_db, s.ms_ssim,
                            s.rate});
        }
    }
    return rows;
}

}  // namespace sfsc::harness
