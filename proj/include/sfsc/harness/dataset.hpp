#pragma once

#include <cstdint>
#include <string>

#include <torch/torch.h>

namespace sfsc::harness {

struct Dataset {
    torch::Tensor train;  // [n, 3, S, S] float32 in [0, 1]
    torch::Tensor val;
    torch::Tensor test;
    int64_t skipped = 0;  // unreadable files
};

/// Seeded synthetic images: smooth color gradients plus random rectangles,
/// discs and sinusoidal texture.
torch::Tensor synthetic_images(int64_t count, int64_t size, uint64_t seed);

/// path == "synthetic" uses the built-in generator; otherwise the directory
/// is scanned for raster images, which are resized to image_size. Unreadable
/// files are skipped and counted. Splits are deterministic given seed.
Dataset ingest_dataset(const std::string& path, int64_t image_size, double train_ratio,
                       double val_ratio, double test_ratio, uint64_t seed,
                       int64_t synthetic_count = 1000);

}  // namespace sfsc::harness
