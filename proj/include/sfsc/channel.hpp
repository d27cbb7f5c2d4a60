#pragma once

#include <complex>
#include <cstdint>

#include <torch/torch.h>

namespace sfsc::channel {

/// One hop of the satellite link: Rician block fading with a Doppler phase
/// ramp, a constant delay phase and AWGN calibrated against the empirical
/// frame power. All randomness comes from explicit seeds.
struct ChannelConfig {
    double rician_k = 5.0;          // LoS-to-scatter power ratio, linear
    double gain_power = 1.0;        // E[|g|^2]
    double doppler_hz = 0.0;
    double delay_s = 0.0;
    double carrier_offset_hz = 0.0; // f in the f*tau phase term
    double symbol_period_s = 1e-6;
    double snr_db = 10.0;           // Es/N0 per complex symbol

    void validate() const;          // throws std::invalid_argument
};

struct ChannelRealization {
    std::complex<double> gain;
    ChannelConfig config;
};

/// A frame of complex baseband symbols stored as interleaved I/Q:
/// tensor of shape [..., n, 2], float32 or float64.
struct SymbolFrame {
    torch::Tensor iq;

    int64_t length() const { return iq.size(-2); }
    /// Empirical mean of |x|^2 over every symbol in the frame.
    double average_power() const;
};

/// Draws the fading gain g = sqrt(gain_power) * (sqrt(k/(k+1)) + sqrt(1/(k+1)) w)
/// for one coherence block, w circularly-symmetric standard complex normal.
ChannelRealization sample_realization(const ChannelConfig& config, uint64_t seed);

/// y_n = exp(j*2*pi*(n*Ts*doppler - f*tau)) * g * x_n + z_n, with the noise
/// variance set so that the per-symbol SNR matches config.snr_db against the
/// frame's empirical power (measured per batch element). Differentiable in x.
SymbolFrame apply_channel(const SymbolFrame& frame, const ChannelRealization& realization,
                          uint64_t seed);

/// Coherent equalization y * conj(h_n) / |h_n|^2, receiver-side CSI. The
/// pipelines equalize ahead of each learned receiver.
SymbolFrame equalize(const SymbolFrame& frame, const ChannelRealization& realization);

/// Amplify-and-forward: rescale to unit average power, no decoding.
SymbolFrame transparent_forward(const SymbolFrame& frame);

}  // namespace sfsc::channel
