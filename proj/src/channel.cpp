#include "sfsc/channel.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace sfsc::channel {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_frame(const SymbolFrame& frame) {
    if (!frame.iq.defined() || frame.iq.dim() < 2 || frame.iq.size(-1) != 2 ||
        frame.iq.size(-2) == 0) {
        throw std::invalid_argument("SymbolFrame must have shape [..., n, 2] with n > 0");
    }
}

}  // namespace

void ChannelConfig::validate() const {
    if (rician_k < 0.0) throw std::invalid_argument("rician_k must be >= 0");
    if (gain_power <= 0.0) throw std::invalid_argument("gain_power must be > 0");
    if (symbol_period_s <= 0.0) throw std::invalid_argument("symbol_period_s must be > 0");
    if (!std::isfinite(snr_db)) throw std::invalid_argument("snr_db must be finite");
    if (!std::isfinite(rician_k) || !std::isfinite(gain_power) || !std::isfinite(doppler_hz) ||
        !std::isfinite(delay_s) || !std::isfinite(carrier_offset_hz)) {
        throw std::invalid_argument("channel parameters must be finite");
    }
}

double SymbolFrame::average_power() const {
    check_frame(*this);
    return iq.detach().to(torch::kFloat64).square().sum(-1).mean().item<double>();
}

ChannelRealization sample_realization(const ChannelConfig& config, uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double re = normal(rng);
    const double im = normal(rng);
    const std::complex<double> w(re / std::sqrt(2.0), im / std::sqrt(2.0));
    const double k = config.rician_k;
    const std::complex<double> gain =
        std::sqrt(config.gain_power) *
        (std::sqrt(k / (k + 1.0)) + std::sqrt(1.0 / (k + 1.0)) * w);
    return ChannelRealization{gain, config};
}

SymbolFrame apply_channel(const SymbolFrame& frame, const ChannelRealization& realization,
                          uint64_t seed) {
    check_frame(frame);
    const auto& cfg = realization.config;
    const int64_t n = frame.length();
    const auto real_opts =
        torch::TensorOptions().dtype(frame.iq.scalar_type()).device(frame.iq.device());

    // Deterministic per-symbol factor h_n = exp(j*2*pi*(n*Ts*nu - f*tau)) * g.
    torch::Tensor idx = torch::arange(n, torch::kFloat64);
    torch::Tensor phase =
        kTwoPi * (idx * (cfg.symbol_period_s * cfg.doppler_hz) - cfg.carrier_offset_hz * cfg.delay_s);
    torch::Tensor h_re =
        (phase.cos() * realization.gain.real() - phase.sin() * realization.gain.imag()).to(real_opts);
    torch::Tensor h_im =
        (phase.sin() * realization.gain.real() + phase.cos() * realization.gain.imag()).to(real_opts);

    torch::Tensor x_re = frame.iq.select(-1, 0);
    torch::Tensor x_im = frame.iq.select(-1, 1);
    torch::Tensor y_re = h_re * x_re - h_im * x_im;
    torch::Tensor y_im = h_re * x_im + h_im * x_re;
    torch::Tensor faded = torch::stack({y_re, y_im}, -1);

    // Noise calibrated to the empirical frame power, per batch element.
    torch::Tensor power = frame.iq.detach()
                              .to(torch::kFloat64)
                              .square()
                              .sum(-1)
                              .mean(-1, /*keepdim=*/true)
                              .unsqueeze(-1);
    torch::Tensor noise_var = power / std::pow(10.0, cfg.snr_db / 10.0);
    torch::Tensor noise_std = (noise_var / 2.0).sqrt();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    torch::Tensor z = torch::empty(frame.iq.sizes(), torch::kFloat64);
    auto* zp = z.data_ptr<double>();
    for (int64_t i = 0; i < z.numel(); ++i) zp[i] = normal(rng);
    z = (z * noise_std).to(real_opts);

    return SymbolFrame{faded + z};
}

SymbolFrame equalize(const SymbolFrame& frame, const ChannelRealization& realization) {
    check_frame(frame);
    const auto& cfg = realization.config;
    if (std::abs(realization.gain) <= 0.0) {
        throw std::domain_error("cannot equalize a zero-gain channel");
    }
    const int64_t n = frame.length();
    const auto real_opts =
        torch::TensorOptions().dtype(frame.iq.scalar_type()).device(frame.iq.device());

    torch::Tensor idx = torch::arange(n, torch::kFloat64);
    torch::Tensor phase =
        kTwoPi * (idx * (cfg.symbol_period_s * cfg.doppler_hz) - cfg.carrier_offset_hz * cfg.delay_s);
    torch::Tensor h_re = phase.cos() * realization.gain.real() - phase.sin() * realization.gain.imag();
    torch::Tensor h_im = phase.sin() * realization.gain.real() + phase.cos() * realization.gain.imag();
    torch::Tensor mag2 = h_re.square() + h_im.square();
    torch::Tensor e_re = (h_re / mag2).to(real_opts);
    torch::Tensor e_im = (-h_im / mag2).to(real_opts);

    torch::Tensor y_re = frame.iq.select(-1, 0);
    torch::Tensor y_im = frame.iq.select(-1, 1);
    torch::Tensor x_re = e_re * y_re - e_im * y_im;
    torch::Tensor x_im = e_re * y_im + e_im * y_re;
    return SymbolFrame{torch::stack({x_re, x_im}, -1)};
}

SymbolFrame transparent_forward(const SymbolFrame& frame) {
    check_frame(frame);
    torch::Tensor power =
        frame.iq.detach().square().sum(-1).mean(-1, /*keepdim=*/true).unsqueeze(-1);
    if (!(power.min().item<double>() > 0.0)) {
        throw std::domain_error("cannot renormalize an all-zero frame");
    }
    return SymbolFrame{frame.iq / power.sqrt()};
}

}  // namespace sfsc::channel
