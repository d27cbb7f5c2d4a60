#include <cmath>
#include <vector>

#include "sfsc/losses.hpp"
#include "sfsc/metrics.hpp"
#include "sfsc/semnet.hpp"

// Included after torch so doctest's CHECK shadows the c10 logging macro.
#undef CHECK
#undef CHECK_EQ
#undef CHECK_NE
#undef CHECK_LT
#undef CHECK_LE
#undef CHECK_GT
#undef CHECK_GE
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

using namespace sfsc;

namespace {

// Independent MS-SSIM reference: direct (non-separable) valid convolution and
// explicit loops, sharing no code with the library implementation.
namespace reference {

std::vector<double> kernel2d() {
    std::vector<double> g1(11);
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        double x = i - 5.0;
        g1[i] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
        sum += g1[i];
    }
    for (double& v : g1) v /= sum;
    std::vector<double> k(121);
    for (int r = 0; r < 11; ++r)
        for (int c = 0; c < 11; ++c) k[r * 11 + c] = g1[r] * g1[c];
    return k;
}

using Image = std::vector<std::vector<std::vector<double>>>;  // [C][H][W]

Image from_tensor(const torch::Tensor& t) {
    torch::Tensor x = t.to(torch::kFloat64).contiguous();
    auto acc = x.accessor<double, 3>();
    Image img(x.size(0));
    for (int64_t c = 0; c < x.size(0); ++c) {
        img[c].resize(x.size(1));
        for (int64_t r = 0; r < x.size(1); ++r) {
            img[c][r].resize(x.size(2));
            for (int64_t w = 0; w < x.size(2); ++w) img[c][r][w] = acc[c][r][w];
        }
    }
    return img;
}

Image downsample(const Image& img) {
    Image out(img.size());
    for (size_t c = 0; c < img.size(); ++c) {
        size_t h = img[c].size() / 2, w = img[c][0].size() / 2;
        out[c].assign(h, std::vector<double>(w));
        for (size_t r = 0; r < h; ++r)
            for (size_t q = 0; q < w; ++q)
                out[c][r][q] = (img[c][2 * r][2 * q] + img[c][2 * r][2 * q + 1] +
                                img[c][2 * r + 1][2 * q] + img[c][2 * r + 1][2 * q + 1]) /
                               4.0;
    }
    return out;
}

/// {mean ssim, mean cs} over all channels and valid windows.
std::pair<double, double> ssim_pass(const Image& a, const Image& b) {
    const std::vector<double> k = kernel2d();
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double ssim_sum = 0.0, cs_sum = 0.0;
    int64_t count = 0;
    for (size_t ch = 0; ch < a.size(); ++ch) {
        const int h = (int)a[ch].size(), w = (int)a[ch][0].size();
        for (int r = 0; r + 11 <= h; ++r) {
            for (int q = 0; q + 11 <= w; ++q) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int i = 0; i < 11; ++i)
                    for (int j = 0; j < 11; ++j) {
                        double wt = k[i * 11 + j];
                        double va = a[ch][r + i][q + j], vb = b[ch][r + i][q + j];
                        ma += wt * va;
                        mb += wt * vb;
                        saa += wt * va * va;
                        sbb += wt * vb * vb;
                        sab += wt * va * vb;
                    }
                saa -= ma * ma;
                sbb -= mb * mb;
                sab -= ma * mb;
                double cs = (2 * sab + c2) / (saa + sbb + c2);
                double lum = (2 * ma * mb + c1) / (ma * ma + mb * mb + c1);
                ssim_sum += lum * cs;
                cs_sum += cs;
                ++count;
            }
        }
    }
    return {ssim_sum / count, cs_sum / count};
}

double ms_ssim(const torch::Tensor& ta, const torch::Tensor& tb, int levels) {
    const double weights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    double wsum = 0.0;
    for (int j = 0; j < levels; ++j) wsum += weights[j];
    Image a = from_tensor(ta), b = from_tensor(tb);
    double score = 1.0;
    for (int j = 0; j < levels; ++j) {
        auto [ssim_j, cs_j] = ssim_pass(a, b);
        double component = j + 1 < levels ? cs_j : ssim_j;
        score *= std::pow(std::max(component, 0.0), weights[j] / wsum);
        if (j + 1 < levels) {
            a = downsample(a);
            b = downsample(b);
        }
    }
    return score;
}

}  // namespace reference

}  // namespace

TEST_CASE("psnr closed forms") {
    torch::Tensor zeros = torch::zeros({3, 8, 8});
    SUBCASE("identical images report +infinity") {
        CHECK(std::isinf(metrics::psnr(zeros, zeros, 1.0)));
    }
    SUBCASE("MSE equal to MAX^2 gives 0 dB") {
        CHECK(metrics::psnr(zeros, torch::ones({3, 8, 8}), 1.0) == doctest::Approx(0.0));
    }
    SUBCASE("8-bit convention: MSE 1 gives 48.1308 dB") {
        CHECK(metrics::psnr(zeros, torch::ones({3, 8, 8}), 255.0) ==
              doctest::Approx(48.130803609).epsilon(1e-9));
    }
    SUBCASE("monotone in the noise amplitude") {
        torch::manual_seed(21);
        torch::Tensor img = torch::rand({3, 16, 16});
        torch::Tensor noise = torch::randn({3, 16, 16});
        double prev = std::numeric_limits<double>::infinity();
        for (double amp : {0.01, 0.05, 0.2}) {
            double p = metrics::psnr(img, img + amp * noise, 1.0);
            CHECK(p < prev);
            prev = p;
        }
    }
    SUBCASE("validation") {
        CHECK_THROWS_AS(metrics::psnr(zeros, torch::zeros({3, 8, 9}), 1.0),
                        std::invalid_argument);
        CHECK_THROWS_AS(metrics::psnr(zeros, zeros, 0.0), std::invalid_argument);
    }
}

TEST_CASE("ms_ssim basic properties") {
    torch::manual_seed(22);
    torch::Tensor img = torch::rand({3, 32, 32});

    SUBCASE("identity scores 1") {
        CHECK(metrics::ms_ssim(img, img.clone()) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("bounded and symmetric") {
        torch::Tensor other = (img + 0.3 * torch::randn({3, 32, 32})).clamp(0.0, 1.0);
        double s = metrics::ms_ssim(img, other);
        CHECK(s > 0.0);
        CHECK(s < 1.0);
        CHECK(metrics::ms_ssim(other, img) == doctest::Approx(s).epsilon(1e-12));
    }
    SUBCASE("degradation ordering") {
        torch::Tensor noise = torch::randn({3, 32, 32});
        double mild = metrics::ms_ssim(img, (img + 0.05 * noise).clamp(0.0, 1.0));
        double heavy = metrics::ms_ssim(img, (img + 0.4 * noise).clamp(0.0, 1.0));
        CHECK(mild > heavy);
    }
    SUBCASE("level budget") {
        CHECK(metrics::ms_ssim_max_levels(512) == 5);
        CHECK(metrics::ms_ssim_max_levels(64) == 3);
        CHECK(metrics::ms_ssim_max_levels(32) == 2);
        CHECK(metrics::ms_ssim_max_levels(8) == 0);
        CHECK_THROWS_AS(metrics::ms_ssim(img, img, 3), std::invalid_argument);
        CHECK_THROWS_AS(metrics::ms_ssim(torch::rand({3, 8, 8}), torch::rand({3, 8, 8})),
                        std::invalid_argument);
    }
}

TEST_CASE("ms_ssim agrees with the independent reference within 1e-4") {
    torch::manual_seed(23);
    torch::Tensor base = torch::rand({3, 32, 32});
    torch::Tensor noisy = (base + 0.15 * torch::randn({3, 32, 32})).clamp(0.0, 1.0);
    auto [gx, gy] = semnet::coordinate_grids(32, 32);
    torch::Tensor ramp = ((gx + gy) / 4.0 + 0.5).unsqueeze(0).expand({3, 32, 32});
    torch::Tensor ramp_shift = (ramp + 0.1).clamp(0.0, 1.0);

    const std::pair<torch::Tensor, torch::Tensor> pairs[3] = {
        {base, noisy},
        {ramp.contiguous(), ramp_shift.contiguous()},
        {base, (0.7 * base + 0.3 * ramp).contiguous()},
    };
    for (const auto& [a, b] : pairs) {
        for (int levels : {1, 2}) {
            CHECK(metrics::ms_ssim(a, b, levels) ==
                  doctest::Approx(reference::ms_ssim(a, b, levels)).epsilon(1e-4));
        }
    }
}

TEST_CASE("rate closed forms") {
    CHECK(metrics::rate(32768, 512, 512) == doctest::Approx(1.0 / 24.0));
    CHECK(metrics::rate(1024, 64, 64) == doctest::Approx(1.0 / 12.0));
    CHECK(metrics::rate(10, 5, 2, 1) == doctest::Approx(1.0));
    CHECK_THROWS_AS(metrics::rate(0, 4, 4), std::invalid_argument);
}

TEST_CASE("recon_loss is the global mean squared error") {
    torch::Tensor a = torch::tensor({{1.0f, 2.0f}, {3.0f, 4.0f}});
    torch::Tensor b = torch::tensor({{1.0f, 0.0f}, {6.0f, 4.0f}});
    // Squared errors 0, 4, 9, 0 over 4 entries.
    CHECK(losses::recon_loss(a, b).item<double>() == doctest::Approx(13.0 / 4.0));
    CHECK(losses::recon_loss(a, a).item<double>() == 0.0);
}

TEST_CASE("trans_loss oracles") {
    SUBCASE("uniform prediction costs log K per position") {
        const int64_t batch = 2, positions = 5, k = 16;
        torch::Tensor truth =
            torch::one_hot(torch::randint(k, {batch, positions}), k).to(torch::kFloat32);
        torch::Tensor probs = torch::full({batch, positions, k}, 1.0f / k);
        CHECK(losses::trans_loss(truth, probs).item<double>() ==
              doctest::Approx(positions * std::log(16.0)).epsilon(1e-6));
        CHECK(std::log(16.0) == doctest::Approx(2.7725887).epsilon(1e-6));
    }
    SUBCASE("two-sample hand computation") {
        torch::Tensor truth = torch::tensor({{{1.0f, 0.0f}}, {{0.0f, 1.0f}}});
        torch::Tensor probs = torch::tensor({{{0.8f, 0.2f}}, {{0.3f, 0.7f}}});
        const double expected = (-std::log(0.8) - std::log(0.7)) / 2.0;
        CHECK(losses::trans_loss(truth, probs).item<double>() ==
              doctest::Approx(expected).epsilon(1e-6));
    }
    SUBCASE("zero probability at the truth stays finite via the log floor") {
        torch::Tensor truth = torch::tensor({{{1.0f, 0.0f}}});
        torch::Tensor probs = torch::tensor({{{0.0f, 1.0f}}});
        double v = losses::trans_loss(truth, probs).item<double>();
        CHECK(std::isfinite(v));
        CHECK(v == doctest::Approx(-std::log(1e-12)).epsilon(1e-6));
    }
    SUBCASE("perfect prediction costs zero") {
        torch::Tensor truth = torch::one_hot(torch::randint(4, {2, 3}), 4).to(torch::kFloat32);
        CHECK(losses::trans_loss(truth, truth).item<double>() == doctest::Approx(0.0));
    }
}

TEST_CASE("composite_loss recombination") {
    torch::Tensor rec = torch::tensor(1.0);
    torch::Tensor trans = torch::tensor(1.0);
    torch::Tensor quant = torch::tensor(1.0);
    SUBCASE("unit weights sum the components") {
        losses::LossWeights w;
        w.lambda_trans = 1.0;
        w.lambda_quant = 1.0;
        CHECK(losses::composite_loss(rec, trans, quant, w).total.item<double>() ==
              doctest::Approx(3.0));
    }
    SUBCASE("weights scale their own components") {
        losses::LossWeights w;
        w.lambda_trans = 3.0;
        w.lambda_quant = 4.0;
        losses::LossBreakdown b =
            losses::composite_loss(torch::tensor(2.0), trans, quant, w);
        CHECK(b.total.item<double>() == doctest::Approx(2.0 + 3.0 + 4.0));
        CHECK(b.rec.item<double>() == doctest::Approx(2.0));
        CHECK(b.trans.item<double>() == doctest::Approx(1.0));
        CHECK(b.quant.item<double>() == doctest::Approx(1.0));
    }
    SUBCASE("negative weights rejected") {
        losses::LossWeights w;
        w.lambda_trans = -1.0;
        CHECK_THROWS_AS(w.validate(), std::invalid_argument);
    }
}
