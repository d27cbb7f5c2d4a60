#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sfsc/harness/baseline.hpp"
#include "sfsc/harness/checkpoint.hpp"
#include "sfsc/harness/config.hpp"
#include "sfsc/harness/dataset.hpp"
#include "sfsc/harness/evaluate.hpp"
#include "sfsc/harness/pipeline.hpp"
#include "sfsc/harness/report.hpp"
#include "sfsc/harness/train.hpp"

namespace {

using namespace sfsc;
using namespace sfsc::harness;

struct CommonArgs {
    std::string config_path;
    int64_t seed = -1;  // -1: keep the config's seed
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "run configuration file (json)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", args.seed, "override the configured seed");
}

RunConfig load_config(const CommonArgs& args) {
    RunConfig cfg = args.config_path.empty() ? RunConfig{} : RunConfig::from_file(args.config_path);
    if (args.seed >= 0) cfg.seed = uint64_t(args.seed);
    cfg.validate();
    return cfg;
}

Dataset load_data(const RunConfig& cfg) {
    return ingest_dataset(cfg.dataset_path, cfg.network.image_size, cfg.train_ratio, cfg.val_ratio,
                          cfg.test_ratio, cfg.seed, cfg.synthetic_count);
}

std::pair<int64_t, int64_t> mdma_split(const RunConfig& cfg) {
    int64_t p1 = cfg.mdma.p1 > 0 ? cfg.mdma.p1 : cfg.network.feature_dim / 2;
    int64_t p2 = cfg.mdma.p2 > 0 ? cfg.mdma.p2 : cfg.network.feature_dim / 2;
    return {p1, p2};
}

std::vector<double> parse_grid(const std::string& csv) {
    std::vector<double> grid;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) grid.push_back(std::stod(tok));
    if (grid.empty()) throw CLI::ValidationError("empty SNR grid");
    return grid;
}

void ensure_parent(const std::string& path) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

int cmd_train(const CommonArgs& args, const std::string& out) {
    RunConfig cfg = load_config(args);
    Dataset data = load_data(cfg);
    semnet::SfscModel model(cfg.network, cfg.seed);
    TrainResult result = train_sfsc(model, cfg, data, &std::cout);
    if (result.diverged) {
        std::cerr << "training diverged, not saving\n";
        return 1;
    }
    ensure_parent(out);
    save_checkpoint(out, *model, nullptr, cfg, cfg.epochs);
    EvalSummary s = evaluate_sfsc(model, data.test, cfg.channel_ul, cfg.channel_dl, cfg.seed + 77);
    std::cout << "saved " << out << "\ntest psnr_db " << s.psnr_db << " ms_ssim " << s.ms_ssim
              << " rate " << s.rate << "\n";
    return 0;
}

int cmd_train_mdma(const CommonArgs& args, const std::string& out) {
    RunConfig cfg = load_config(args);
    cfg.mode = Mode::kCsmdma;
    Dataset data = load_data(cfg);
    auto [p1, p2] = mdma_split(cfg);
    CsmdmaModel model(cfg.network, p1, p2, cfg.seed);
    TrainResult result = train_csmdma(model, cfg, data, &std::cout);
    if (result.diverged) {
        std::cerr << "training diverged, not saving\n";
        return 1;
    }
    ensure_parent(out);
    save_checkpoint(out, *model, nullptr, cfg, cfg.epochs);
    EvalSummary s =
        evaluate_csmdma(model, data.test, cfg.channel_ul, cfg.channel_dl, cfg.seed + 77);
    std::cout << "saved " << out << "\ntest psnr_db " << s.psnr_db << " ms_ssim " << s.ms_ssim
              << " rate " << s.rate << "\n";
    return 0;
}

EvalSummary eval_checkpoint(const std::string& ckpt, const RunConfig& cfg, const Dataset& data,
                            const channel::ChannelConfig& ul, const channel::ChannelConfig& dl,
                            uint64_t seed) {
    switch (cfg.mode) {
        case Mode::kSfsc: {
            semnet::SfscModel model(cfg.network);
            load_checkpoint(ckpt, *model, nullptr, cfg.network);
            return evaluate_sfsc(model, data.test, ul, dl, seed);
        }
        case Mode::kCsmdma: {
            RunConfig with_split = cfg;
            auto [p1, p2] = mdma_split(with_split);
            CsmdmaModel model(cfg.network, p1, p2);
            load_checkpoint(ckpt, *model, nullptr, cfg.network);
            return evaluate_csmdma(model, data.test, ul, dl, seed);
        }
        case Mode::kTmDeepJscc:
        case Mode::kRmDeepJscc: {
            DeepJsccModel model(cfg.network);
            load_checkpoint(ckpt, *model, nullptr, cfg.network);
            return evaluate_deepjscc(model, cfg.mode, data.test, ul, dl, seed);
        }
    }
    throw std::logic_error("unreachable");
}

int cmd_eval(const CommonArgs& args, const std::string& ckpt) {
    RunConfig stored = peek_checkpoint(ckpt).config;
    if (args.seed >= 0) stored.seed = uint64_t(args.seed);
    if (!args.config_path.empty()) {
        RunConfig overlay = load_config(args);
        stored.channel_ul = overlay.channel_ul;
        stored.channel_dl = overlay.channel_dl;
        stored.dataset_path = overlay.dataset_path;
        stored.synthetic_count = overlay.synthetic_count;
    }
    Dataset data = load_data(stored);
    EvalSummary s = eval_checkpoint(ckpt, stored, data, stored.channel_ul, stored.channel_dl,
                                    stored.seed + 77);
    std::cout << mode_to_string(stored.mode) << " psnr_db " << s.psnr_db << " ms_ssim "
              << s.ms_ssim << " rate " << s.rate << "\n";
    return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& ckpt, const std::string& ul_csv,
              const std::string& dl_csv, const std::string& out, const std::string& run_id) {
    RunConfig stored = peek_checkpoint(ckpt).config;
    if (args.seed >= 0) stored.seed = uint64_t(args.seed);
    if (!args.config_path.empty()) {
        RunConfig overlay = load_config(args);
        stored.dataset_path = overlay.dataset_path;
        stored.synthetic_count = overlay.synthetic_count;
    }
    Dataset data = load_data(stored);
    std::vector<SweepRow> rows = sweep_snr(
        [&](const channel::ChannelConfig& ul, const channel::ChannelConfig& dl, uint64_t seed) {
            return eval_checkpoint(ckpt, stored, data, ul, dl, seed);
        },
        stored, parse_grid(ul_csv), parse_grid(dl_csv), run_id);
    ensure_parent(out);
    write_csv(out, rows);
    std::cout << "wrote " << rows.size() << " rows to " << out << "\n";
    return 0;
}

int cmd_baseline(const CommonArgs& args, const std::string& mode_name, const std::string& out) {
    RunConfig cfg = load_config(args);
    cfg.mode = mode_from_string(mode_name);
    if (cfg.mode != Mode::kTmDeepJscc && cfg.mode != Mode::kRmDeepJscc) {
        std::cerr << "baseline expects tm_deepjscc or rm_deepjscc\n";
        return 1;
    }
    Dataset data = load_data(cfg);
    DeepJsccModel model(cfg.network);
    TrainResult result = train_deepjscc(model, cfg, data, &std::cout);
    if (result.diverged) {
        std::cerr << "training diverged, not saving\n";
        return 1;
    }
    ensure_parent(out);
    save_checkpoint(out, *model, nullptr, cfg, cfg.epochs);
    EvalSummary s = evaluate_deepjscc(model, cfg.mode, data.test, cfg.channel_ul, cfg.channel_dl,
                                      cfg.seed + 77);
    std::cout << "saved " << out << "\ntest psnr_db " << s.psnr_db << " ms_ssim " << s.ms_ssim
              << " rate " << s.rate << "\n";
    return 0;
}

int cmd_diagnose(const CommonArgs& args, const std::string& ckpt) {
    RunConfig stored = peek_checkpoint(ckpt).config;
    if (args.seed >= 0) stored.seed = uint64_t(args.seed);
    if (stored.mode != Mode::kCsmdma) {
        std::cerr << "diagnose-superposition expects a csmdma checkpoint\n";
        return 1;
    }
    auto [p1, p2] = mdma_split(stored);
    CsmdmaModel model(stored.network, p1, p2);
    load_checkpoint(ckpt, *model, nullptr, stored.network);
    model->eval();

    Dataset data = load_data(stored);
    const int64_t count = std::min<int64_t>(8, data.test.size(0));
    torch::Tensor batch = data.test.narrow(0, 0, count);
    torch::Tensor features = model->encoder->forward(batch);
    // Quantize the image features through user 1's view of the common book.
    torch::Tensor combined = model->cfe->forward(features, features);
    torch::Tensor hard = codebook::vq_assign(combined.detach(), model->common->vectors.detach());
    torch::Tensor split1 =
        mdma::split_semantics(hard, model->common, 1, model->cfg.feature_dim);

    const int64_t side = model->cfg.latent_side();
    torch::Tensor grid = semnet::features_to_grid(features.detach(), side);
    torch::Tensor split_grid = semnet::features_to_grid(split1.detach(), side);
    mdma::SuperpositionDiagnostic d = mdma::diagnose_superposition(
        [&](const torch::Tensor& g) { return model->decoder->forward_grid(g); }, grid, split_grid);
    std::cout << "direct " << d.direct << " first_order " << d.first_order << " ratio "
              << (d.direct != 0.0 ? d.first_order / d.direct : 0.0) << "\n";
    return 0;
}

int cmd_report(const std::string& in, const std::string& out_prefix, const std::string& metric) {
    std::vector<SweepRow> rows = read_csv(in);
    ensure_parent(out_prefix + "_lines.svg");
    write_line_plot_svg(out_prefix + "_lines.svg", rows, metric);
    write_heatmap_svg(out_prefix + "_heatmap.svg", rows);
    std::cout << "wrote " << out_prefix << "_lines.svg and " << out_prefix << "_heatmap.svg\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    torch::set_num_threads(1);
    CLI::App app{"semantic relay link simulator"};
    app.require_subcommand(1);

    CommonArgs train_args, mdma_args, eval_args, sweep_args, base_args, diag_args, report_args;
    std::string train_out = "checkpoints/sfsc.ckpt";
    std::string mdma_out = "checkpoints/csmdma.ckpt";
    std::string eval_ckpt, sweep_ckpt, diag_ckpt;
    std::string sweep_ul = "5,10,15", sweep_dl = "5,10,15";
    std::string sweep_out = "results/sweep.csv", sweep_run = "run0";
    std::string base_mode = "tm_deepjscc", base_out = "checkpoints/deepjscc.ckpt";
    std::string report_in = "results/sweep.csv", report_prefix = "results/sweep";
    std::string report_metric = "psnr_db";

    CLI::App* train = app.add_subcommand("train", "train the single-user relay system");
    add_common(train, train_args);
    train->add_option("--out", train_out, "checkpoint output path");

    CLI::App* mdma = app.add_subcommand("train-mdma", "train the two-user downlink system");
    add_common(mdma, mdma_args);
    mdma->add_option("--out", mdma_out, "checkpoint output path");

    CLI::App* evalc = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    add_common(evalc, eval_args);
    evalc->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate")
        ->required()
        ->check(CLI::ExistingFile);

    CLI::App* sweep = app.add_subcommand("sweep", "evaluate over an SNR grid, write csv");
    add_common(sweep, sweep_args);
    sweep->add_option("--checkpoint", sweep_ckpt)->required()->check(CLI::ExistingFile);
    sweep->add_option("--ul-snrs", sweep_ul, "comma-separated uplink SNRs (dB)");
    sweep->add_option("--dl-snrs", sweep_dl, "comma-separated downlink SNRs (dB)");
    sweep->add_option("--out", sweep_out, "csv output path");
    sweep->add_option("--run-id", sweep_run);

    CLI::App* baseline = app.add_subcommand("baseline", "train and evaluate a deepjscc baseline");
    add_common(baseline, base_args);
    baseline->add_option("--mode", base_mode, "tm_deepjscc or rm_deepjscc");
    baseline->add_option("--out", base_out, "checkpoint output path");

    CLI::App* diag = app.add_subcommand("diagnose-superposition",
                                        "compare the split loss with its first-order expansion");
    add_common(diag, diag_args);
    diag->add_option("--checkpoint", diag_ckpt)->required()->check(CLI::ExistingFile);

    CLI::App* report = app.add_subcommand("report", "render csv results as svg plots");
    add_common(report, report_args);
    report->add_option("--in", report_in, "csv input path");
    report->add_option("--out-prefix", report_prefix);
    report->add_option("--metric", report_metric, "psnr_db, ms_ssim or rate");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(train_args, train_out);
        if (mdma->parsed()) return cmd_train_mdma(mdma_args, mdma_out);
        if (evalc->parsed()) return cmd_eval(eval_args, eval_ckpt);
        if (sweep->parsed()) {
            return cmd_sweep(sweep_args, sweep_ckpt, sweep_ul, sweep_dl, sweep_out, sweep_run);
        }
        if (baseline->parsed()) return cmd_baseline(base_args, base_mode, base_out);
        if (diag->parsed()) return cmd_diagnose(diag_args, diag_ckpt);
        if (report->parsed()) return cmd_report(report_in, report_prefix, report_metric);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
