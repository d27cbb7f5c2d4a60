#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sfsc/harness/baseline.hpp"
#include "sfsc/harness/config.hpp"
#include "sfsc/harness/pipeline.hpp"

namespace sfsc::harness {

struct SweepRow {
    std::string run_id;
    std::string mode;
    double ul_snr_db = 0.0;
    double dl_snr_db = 0.0;
    double psnr_db = 0.0;
    double ms_ssim = 0.0;
    double rate = 0.0;
};

struct EvalSummary {
    double psnr_db = 0.0;   // per-image mean, capped at 100 dB
    double ms_ssim = 0.0;
    double rate = 0.0;      // channel uses per source dimension
};

/// Hard-index evaluation over a test tensor, deterministic given seed.
EvalSummary evaluate_sfsc(semnet::SfscModel& model, const torch::Tensor& images,
                          const channel::ChannelConfig& ul, const channel::ChannelConfig& dl,
                          uint64_t seed, int64_t batch_size = 8);

/// Metrics averaged over both users; user 2 sees a rotated pairing of the
/// same test tensor. disable_enhancement zeroes the restored residual.
EvalSummary evaluate_csmdma(CsmdmaModel& model, const torch::Tensor& images,
                            const channel::ChannelConfig& ul, const channel::ChannelConfig& dl,
                            uint64_t seed, bool disable_enhancement = false,
                            int64_t batch_size = 8);

EvalSummary evaluate_deepjscc(DeepJsccModel& model, Mode mode, const torch::Tensor& images,
                              const channel::ChannelConfig& ul, const channel::ChannelConfig& dl,
                              uint64_t seed, int64_t batch_size = 8);

/// Runs `eval_fn` over the cartesian SNR grid with a distinct deterministic
/// seed per grid point.
std::vector<SweepRow> sweep_snr(
    const std::function<EvalSummary(const channel::ChannelConfig&, const channel::ChannelConfig&,
                                    uint64_t)>& eval_fn,
    const RunConfig& cfg, const std::vector<double>& ul_grid, const std::vector<double>& dl_grid,
    const std::string& run_id);

}  // namespace sfsc::harness
