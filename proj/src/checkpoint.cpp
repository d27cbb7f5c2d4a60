#include "sfsc/harness/checkpoint.hpp"

#include <sstream>
#include <stdexcept>

namespace sfsc::harness {

void save_checkpoint(const std::string& path, torch::nn::Module& model,
                     torch::optim::Optimizer* optimizer, const RunConfig& config, int64_t epoch) {
    torch::serialize::OutputArchive root;
    root.write("config_json", c10::IValue(config.to_json().dump()));
    root.write("epoch", c10::IValue(epoch));
    root.write("has_optimizer", c10::IValue(optimizer != nullptr));

    torch::serialize::OutputArchive model_archive;
    model.save(model_archive);
    root.write("model", model_archive);

    if (optimizer != nullptr) {
        torch::serialize::OutputArchive opt_archive;
        optimizer->save(opt_archive);
        root.write("optimizer", opt_archive);
    }
    root.save_to(path);
}

namespace {

CheckpointMeta read_meta(torch::serialize::InputArchive& root) {
    c10::IValue config_json, epoch;
    root.read("config_json", config_json);
    root.read("epoch", epoch);
    CheckpointMeta meta;
    meta.config = RunConfig::from_json(nlohmann::json::parse(config_json.toStringRef()));
    meta.epoch = epoch.toInt();
    return meta;
}

void require_same_network(const semnet::NetworkConfig& a, const semnet::NetworkConfig& b) {
    const bool same = a.image_size == b.image_size && a.downsample_factor == b.downsample_factor &&
                      a.base_width == b.base_width && a.relay_width == b.relay_width &&
                      a.film_width == b.film_width && a.feature_dim == b.feature_dim &&
                      a.codebook_size == b.codebook_size;
    if (!same) {
        std::ostringstream msg;
        msg << "checkpoint network configuration mismatch: stored " << a.image_size << "px/N="
            << a.feature_dim << "/K=" << a.codebook_size << " vs expected " << b.image_size
            << "px/N=" << b.feature_dim << "/K=" << b.codebook_size;
        throw std::runtime_error(msg.str());
    }
}

}  // namespace

CheckpointMeta load_checkpoint(const std::string& path, torch::nn::Module& model,
                               torch::optim::Optimizer* optimizer,
                               const semnet::NetworkConfig& expected_network) {
    torch::serialize::InputArchive root;
    root.load_from(path);
    CheckpointMeta meta = read_meta(root);
    require_same_network(meta.config.network, expected_network);

    torch::serialize::InputArchive model_archive;
    root.read("model", model_archive);
    model.load(model_archive);

    if (optimizer != nullptr) {
        c10::IValue has_opt;
        root.read("has_optimizer", has_opt);
        if (!has_opt.toBool()) {
            throw std::runtime_error("checkpoint has no optimizer state: " + path);
        }
        torch::serialize::InputArchive opt_archive;
        root.read("optimizer", opt_archive);
        optimizer->load(opt_archive);
    }
    return meta;
}

CheckpointMeta peek_checkpoint(const std::string& path) {
    torch::serialize::InputArchive root;
    root.load_from(path);
    return read_meta(root);
}

}  // namespace sfsc::harness
