#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "sfsc/channel.hpp"
#include "sfsc/losses.hpp"
#include "sfsc/semnet.hpp"

namespace sfsc::harness {

enum class Mode { kSfsc, kCsmdma, kTmDeepJscc, kRmDeepJscc };

Mode mode_from_string(const std::string& s);
std::string mode_to_string(Mode m);

/// Train-time SNR curriculum: a fixed operating point or uniform sampling
/// over [lo_db, hi_db] per batch.
struct SnrPolicy {
    bool uniform = false;
    double lo_db = 10.0;
    double hi_db = 10.0;

    void validate() const;
    double draw(std::mt19937_64& rng) const;
};

struct MdmaConfig {
    int64_t p1 = 0;  // 0 -> feature_dim / 2
    int64_t p2 = 0;
    bool ideal_uplink = false;
};

struct RunConfig {
    Mode mode = Mode::kSfsc;
    semnet::NetworkConfig network;
    channel::ChannelConfig channel_ul;
    channel::ChannelConfig channel_dl;
    losses::LossWeights weights;
    SnrPolicy snr_policy;
    MdmaConfig mdma;

    int64_t epochs = 30;
    int64_t warmup_epochs = 0;  // autoencoder-only epochs, taken out of `epochs`
    int64_t batch_size = 8;
    double learning_rate = 2e-4;
    bool cosine_decay = true;
    double temperature = 1.0;
    std::string estimator = "reinmax";  // or "straight_through"
    uint64_t seed = 1;

    std::string dataset_path = "synthetic";
    int64_t synthetic_count = 64;
    double train_ratio = 0.8, val_ratio = 0.1, test_ratio = 0.1;

    void validate() const;
    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_file(const std::string& path);
    void save(const std::string& path) const;
};

}  // namespace sfsc::harness
