#include "sfsc/harness/config.hpp"

#include <fstream>
#include <random>
#include <stdexcept>

namespace sfsc::harness {

using nlohmann::json;

Mode mode_from_string(const std::string& s) {
    if (s == "sfsc") return Mode::kSfsc;
    if (s == "csmdma") return Mode::kCsmdma;
    if (s == "tm_deepjscc") return Mode::kTmDeepJscc;
    if (s == "rm_deepjscc") return Mode::kRmDeepJscc;
    throw std::invalid_argument("unknown mode: " + s);
}

std::string mode_to_string(Mode m) {
    switch (m) {
        case Mode::kSfsc: return "sfsc";
        case Mode::kCsmdma: return "csmdma";
        case Mode::kTmDeepJscc: return "tm_deepjscc";
        case Mode::kRmDeepJscc: return "rm_deepjscc";
    }
    throw std::logic_error("unreachable");
}

void SnrPolicy::validate() const {
    if (lo_db > hi_db) throw std::invalid_argument("snr policy: lo_db must be <= hi_db");
}

double SnrPolicy::draw(std::mt19937_64& rng) const {
    if (!uniform) return lo_db;
    return std::uniform_real_distribution<double>(lo_db, hi_db)(rng);
}

void RunConfig::validate() const {
    network.validate();
    channel_ul.validate();
    channel_dl.validate();
    weights.validate();
    snr_policy.validate();
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (warmup_epochs < 0 || warmup_epochs >= epochs) {
        throw std::invalid_argument("warmup_epochs must be in [0, epochs)");
    }
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
    if (estimator != "reinmax" && estimator != "straight_through") {
        throw std::invalid_argument("estimator must be reinmax or straight_through");
    }
    const double sum = train_ratio + val_ratio + test_ratio;
    if (train_ratio < 0 || val_ratio < 0 || test_ratio < 0 || std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("split ratios must be non-negative and sum to 1");
    }
}

json RunConfig::to_json() const {
    json j;
    j["mode"] = mode_to_string(mode);
    j["network"] = {{"image_size", network.image_size},
                    {"downsample_factor", network.downsample_factor},
                    {"base_width", network.base_width},
                    {"relay_width", network.relay_width},
                    {"film_width", network.film_width},
                    {"feature_dim", network.feature_dim},
                    {"codebook_size", network.codebook_size}};
    j["channel"] = {{"rician_k", channel_ul.rician_k},
                    {"gain_power", channel_ul.gain_power},
                    {"doppler_hz", channel_ul.doppler_hz},
                    {"delay_s", channel_ul.delay_s},
                    {"carrier_offset_hz", channel_ul.carrier_offset_hz},
                    {"symbol_period_s", channel_ul.symbol_period_s},
                    {"ul_snr_db", channel_ul.snr_db},
                    {"dl_snr_db", channel_dl.snr_db}};
    j["weights"] = {{"lambda_trans", weights.lambda_trans},
                    {"lambda_quant", weights.lambda_quant},
                    {"beta_q", weights.beta_q}};
    j["snr_policy"] = {{"kind", snr_policy.uniform ? "uniform" : "fixed"},
                       {"lo_db", snr_policy.lo_db},
                       {"hi_db", snr_policy.hi_db}};
    j["mdma"] = {{"p1", mdma.p1}, {"p2", mdma.p2}, {"ideal_uplink", mdma.ideal_uplink}};
    j["train"] = {{"epochs", epochs},
                  {"warmup_epochs", warmup_epochs},
                  {"batch_size", batch_size},
                  {"learning_rate", learning_rate},
                  {"cosine_decay", cosine_decay},
                  {"temperature", temperature},
                  {"estimator", estimator},
                  {"seed", seed}};
    j["dataset"] = {{"path", dataset_path},
                    {"synthetic_count", synthetic_count},
                    {"train_ratio", train_ratio},
                    {"val_ratio", val_ratio},
                    {"test_ratio", test_ratio}};
    return j;
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("network")) {
        const auto& n = j.at("network");
        auto get = [&](const char* k, int64_t& field) {
            if (n.contains(k)) field = n.at(k).get<int64_t>();
        };
        get("image_size", c.network.image_size);
        get("downsample_factor", c.network.downsample_factor);
        get("base_width", c.network.base_width);
        get("relay_width", c.network.relay_width);
        get("film_width", c.network.film_width);
        get("feature_dim", c.network.feature_dim);
        get("codebook_size", c.network.codebook_size);
    }
    if (j.contains("channel")) {
        const auto& ch = j.at("channel");
        auto get = [&](const char* k, double& field) {
            if (ch.contains(k)) field = ch.at(k).get<double>();
        };
        get("rician_k", c.channel_ul.rician_k);
        get("gain_power", c.channel_ul.gain_power);
        get("doppler_hz", c.channel_ul.doppler_hz);
        get("delay_s", c.channel_ul.delay_s);
        get("carrier_offset_hz", c.channel_ul.carrier_offset_hz);
        get("symbol_period_s", c.channel_ul.symbol_period_s);
        c.channel_dl = c.channel_ul;
        if (ch.contains("ul_snr_db")) c.channel_ul.snr_db = ch.at("ul_snr_db").get<double>();
        if (ch.contains("dl_snr_db")) c.channel_dl.snr_db = ch.at("dl_snr_db").get<double>();
    }
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        if (w.contains("lambda_trans")) c.weights.lambda_trans = w.at("lambda_trans").get<double>();
        if (w.contains("lambda_quant")) c.weights.lambda_quant = w.at("lambda_quant").get<double>();
        if (w.contains("beta_q")) c.weights.beta_q = w.at("beta_q").get<double>();
    }
    if (j.contains("snr_policy")) {
        const auto& p = j.at("snr_policy");
        if (p.contains("kind")) c.snr_policy.uniform = p.at("kind").get<std::string>() == "uniform";
        if (p.contains("lo_db")) c.snr_policy.lo_db = p.at("lo_db").get<double>();
        if (p.contains("hi_db")) c.snr_policy.hi_db = p.at("hi_db").get<double>();
        if (!c.snr_policy.uniform && !p.contains("hi_db")) c.snr_policy.hi_db = c.snr_policy.lo_db;
    }
    if (j.contains("mdma")) {
        const auto& m = j.at("mdma");
        if (m.contains("p1")) c.mdma.p1 = m.at("p1").get<int64_t>();
        if (m.contains("p2")) c.mdma.p2 = m.at("p2").get<int64_t>();
        if (m.contains("ideal_uplink")) c.mdma.ideal_uplink = m.at("ideal_uplink").get<bool>();
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        if (t.contains("epochs")) c.epochs = t.at("epochs").get<int64_t>();
        if (t.contains("warmup_epochs")) c.warmup_epochs = t.at("warmup_epochs").get<int64_t>();
        if (t.contains("batch_size")) c.batch_size = t.at("batch_size").get<int64_t>();
        if (t.contains("learning_rate")) c.learning_rate = t.at("learning_rate").get<double>();
        if (t.contains("cosine_decay")) c.cosine_decay = t.at("cosine_decay").get<bool>();
        if (t.contains("temperature")) c.temperature = t.at("temperature").get<double>();
        if (t.contains("estimator")) c.estimator = t.at("estimator").get<std::string>();
        if (t.contains("seed")) c.seed = t.at("seed").get<uint64_t>();
    }
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        if (d.contains("path")) c.dataset_path = d.at("path").get<std::string>();
        if (d.contains("synthetic_count")) c.synthetic_count = d.at("synthetic_count").get<int64_t>();
        if (d.contains("train_ratio")) c.train_ratio = d.at("train_ratio").get<double>();
        if (d.contains("val_ratio")) c.val_ratio = d.at("val_ratio").get<double>();
        if (d.contains("test_ratio")) c.test_ratio = d.at("test_ratio").get<double>();
    }
    c.validate();
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json j;
    in >> j;
    return from_json(j);
}

void RunConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config file: " + path);
    out << to_json().dump(2) << "\n";
}

}  // namespace sfsc::harness
