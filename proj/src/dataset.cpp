#include "sfsc/harness/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <random>
#include <stdexcept>
#include <vector>

#ifdef SFSC_HAVE_OPENCV
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#endif

namespace sfsc::harness {

namespace fs = std::filesystem;

torch::Tensor synthetic_images(int64_t count, int64_t size, uint64_t seed) {
    if (count < 1 || size < 4) throw std::invalid_argument("synthetic_images: bad arguments");
    torch::Tensor out = torch::empty({count, 3, size, size}, torch::kFloat32);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    torch::Tensor ys = torch::linspace(0.0, 1.0, size).unsqueeze(1).expand({size, size});
    torch::Tensor xs = torch::linspace(0.0, 1.0, size).unsqueeze(0).expand({size, size});

    for (int64_t i = 0; i < count; ++i) {
        // Smooth two-color gradient background at a random orientation.
        double angle = uni(rng) * 2.0 * M_PI;
        torch::Tensor ramp = (xs * std::cos(angle) + ys * std::sin(angle));
        ramp = (ramp - ramp.min()) / (ramp.max() - ramp.min() + 1e-12);
        torch::Tensor img = torch::empty({3, size, size}, torch::kFloat32);
        for (int c = 0; c < 3; ++c) {
            double a = uni(rng), b = uni(rng);
            img[c] = a + (b - a) * ramp;
        }
        // Sinusoidal texture.
        double fx = 1.0 + uni(rng) * 6.0, fy = 1.0 + uni(rng) * 6.0, ph = uni(rng) * 2.0 * M_PI;
        img += 0.08 * torch::sin(2.0 * M_PI * (fx * xs + fy * ys) + ph).unsqueeze(0);

        // A few solid shapes.
        int shapes = 2 + int(uni(rng) * 3.0);
        for (int s = 0; s < shapes; ++s) {
            double cx = uni(rng), cy = uni(rng), r = 0.08 + uni(rng) * 0.2;
            torch::Tensor mask;
            if (uni(rng) < 0.5) {
                mask = ((xs - cx).abs() < r) & ((ys - cy).abs() < r * (0.5 + uni(rng)));
            } else {
                mask = ((xs - cx).square() + (ys - cy).square()) < r * r;
            }
            torch::Tensor m = mask.to(torch::kFloat32);
            for (int c = 0; c < 3; ++c) {
                double color = uni(rng);
                img[c] = img[c] * (1.0 - m) + color * m;
            }
        }
        out[i] = img.clamp(0.0, 1.0);
    }
    return out;
}

namespace {

#ifdef SFSC_HAVE_OPENCV
bool load_image(const fs::path& p, int64_t size, torch::Tensor& out) {
    cv::Mat bgr = cv::imread(p.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) return false;
    cv::Mat resized;
    cv::resize(bgr, resized, cv::Size((int)size, (int)size), 0, 0, cv::INTER_AREA);
    cv::Mat rgb;
    cv::cvtColor(resized, rgb, cv::COLOR_BGR2RGB);
    torch::Tensor t = torch::from_blob(rgb.data, {size, size, 3}, torch::kUInt8).clone();
    out = t.permute({2, 0, 1}).to(torch::kFloat32) / 255.0;
    return true;
}
#endif

}  // namespace

Dataset ingest_dataset(const std::string& path, int64_t image_size, double train_ratio,
                       double val_ratio, double test_ratio, uint64_t seed,
                       int64_t synthetic_count) {
    if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9) {
        throw std::invalid_argument("split ratios must sum to 1");
    }
    torch::Tensor all;
    int64_t skipped = 0;
    if (path == "synthetic") {
        all = synthetic_images(synthetic_count, image_size, seed ^ 0x9e3779b97f4a7c15ULL);
    } else {
#ifndef SFSC_HAVE_OPENCV
        throw std::runtime_error("folder ingestion requires OpenCV; use dataset_path=synthetic");
#else
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(path)) {
            if (e.is_regular_file()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        std::vector<torch::Tensor> images;
        for (const auto& f : files) {
            torch::Tensor img;
            if (load_image(f, image_size, img)) {
                images.push_back(img);
            } else {
                ++skipped;
            }
        }
        if (skipped > 0) {
            std::cerr << "ingest_dataset: skipped " << skipped << " unreadable files\n";
        }
        if (images.empty()) throw std::runtime_error("no readable images in " + path);
        all = torch::stack(images);
#endif
    }

    const int64_t n = all.size(0);
    std::vector<int64_t> order(n);
    for (int64_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    torch::Tensor perm = torch::from_blob(order.data(), {n}, torch::kLong).clone();
    all = all.index_select(0, perm);

    const int64_t n_train = (int64_t)std::llround(train_ratio * n);
    const int64_t n_val = (int64_t)std::llround(val_ratio * n);
    const int64_t n_test = n - n_train - n_val;
    if (n_train < 1 || n_test < 1) throw std::runtime_error("dataset too small for the splits");

    Dataset d;
    d.train = all.narrow(0, 0, n_train).contiguous();
    d.val = n_val > 0 ? all.narrow(0, n_train, n_val).contiguous()
                      : torch::empty({0, 3, image_size, image_size});
    d.test = all.narrow(0, n_train + n_val, n_test).contiguous();
    d.skipped = skipped;
    return d;
}

}  // namespace sfsc::harness
