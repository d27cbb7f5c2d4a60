#include <cmath>
#include <random>
#include <vector>

#include "sfsc/codebook.hpp"

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

using namespace sfsc::codebook;

namespace {

/// Brute-force nearest-codeword oracle, lowest index on ties.
int64_t nearest_oracle(const torch::Tensor& feature, const torch::Tensor& vectors) {
    int64_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int64_t k = 0; k < vectors.size(0); ++k) {
        double d = (feature - vectors[k]).to(torch::kFloat64).square().sum().item<double>();
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("codebook construction contracts") {
    CHECK_NOTHROW(Codebook(8, 16, 1));
    CHECK_THROWS_AS(Codebook(1, 16, 1), std::invalid_argument);
    CHECK_THROWS_AS(Codebook(8, 0, 1), std::invalid_argument);

    Codebook book(8, 16, 3);
    CHECK(book->size() == 8);
    CHECK(book->dim() == 16);
    // Init range is [-1/K, 1/K].
    CHECK(book->vectors.abs().max().item<double>() <= 1.0 / 8.0 + 1e-7);
    // Seeded: same seed reproduces, different seed differs.
    Codebook again(8, 16, 3);
    CHECK(torch::equal(book->vectors, again->vectors));
    Codebook other(8, 16, 4);
    CHECK(!torch::equal(book->vectors, other->vectors));
}

TEST_CASE("vq_assign: zero-distance match and brute-force example") {
    torch::Tensor vectors = torch::tensor({{0.0f, 0.0f}, {1.0f, 1.0f}, {0.4f, -0.2f}});

    SUBCASE("feature equal to a codeword selects it") {
        torch::Tensor f = torch::tensor({{0.4f, -0.2f}});
        torch::Tensor onehot = vq_assign(f, vectors);
        CHECK(onehot[0][2].item<float>() == 1.0f);
        CHECK(onehot.sum().item<float>() == 1.0f);
    }

    SUBCASE("closer of two codewords wins: 0.05 < 1.45") {
        torch::Tensor two = torch::tensor({{0.0f, 0.0f}, {1.0f, 1.0f}});
        torch::Tensor f = torch::tensor({{0.2f, 0.1f}});
        torch::Tensor onehot = vq_assign(f, two);
        CHECK(onehot[0][0].item<float>() == 1.0f);
    }

    SUBCASE("equidistant feature breaks toward the lowest index") {
        torch::Tensor two = torch::tensor({{0.0f, 0.0f}, {1.0f, 0.0f}});
        torch::Tensor f = torch::tensor({{0.5f, 0.0f}});
        torch::Tensor onehot = vq_assign(f, two);
        CHECK(onehot[0][0].item<float>() == 1.0f);
        CHECK(onehot[0][1].item<float>() == 0.0f);
    }

    SUBCASE("dimension mismatch rejected") {
        CHECK_THROWS_AS(vq_assign(torch::zeros({1, 3}), vectors), std::invalid_argument);
    }
}

TEST_CASE("vq_assign agrees with the brute-force scan on random features") {
    torch::manual_seed(5);
    torch::Tensor vectors = torch::randn({16, 8});
    torch::Tensor features = torch::randn({4, 100, 8});
    torch::Tensor onehots = vq_assign(features, vectors);
    CHECK(onehots.sizes() == torch::IntArrayRef({4, 100, 16}));
    torch::Tensor idx = onehots.argmax(-1);
    for (int64_t b = 0; b < 4; ++b) {
        for (int64_t m = 0; m < 100; ++m) {
            CHECK(idx[b][m].item<int64_t>() == nearest_oracle(features[b][m], vectors));
        }
    }
    // One-hot validity.
    CHECK(((onehots == 0) | (onehots == 1)).all().item<bool>());
    CHECK((onehots.sum(-1) == 1).all().item<bool>());
}

TEST_CASE("dequantize") {
    torch::manual_seed(6);
    torch::Tensor vectors = torch::randn({5, 7});

    SUBCASE("identity pattern reproduces the codebook") {
        torch::Tensor eye = torch::eye(5);
        CHECK(torch::equal(dequantize(eye, vectors), vectors));
    }
    SUBCASE("round-trip on codewords") {
        torch::Tensor onehot = vq_assign(vectors, vectors);
        CHECK(torch::equal(dequantize(onehot, vectors), vectors));
    }
    SUBCASE("random one-hots match the gather oracle exactly") {
        torch::Tensor idx = torch::randint(5, {3, 20});
        torch::Tensor onehots = torch::one_hot(idx, 5).to(torch::kFloat32);
        torch::Tensor out = dequantize(onehots, vectors);
        for (int64_t b = 0; b < 3; ++b) {
            for (int64_t m = 0; m < 20; ++m) {
                CHECK(torch::equal(out[b][m], vectors[idx[b][m].item<int64_t>()]));
            }
        }
    }
    SUBCASE("K mismatch rejected") {
        CHECK_THROWS_AS(dequantize(torch::eye(4), vectors), std::invalid_argument);
    }
}

TEST_CASE("differentiable_onehot forward contracts") {
    SUBCASE("near-deterministic category") {
        torch::Tensor scores = torch::tensor({{40.0f, -40.0f, -40.0f, -40.0f}});
        for (uint64_t s = 0; s < 32; ++s) {
            torch::Tensor d = differentiable_onehot(scores, 1.0, s);
            CHECK(d[0][0].item<float>() == 1.0f);
        }
    }
    SUBCASE("non-finite scores rejected") {
        torch::Tensor bad = torch::tensor({{1.0f, std::nanf("")}});
        CHECK_THROWS_AS(differentiable_onehot(bad, 1.0, 0), std::invalid_argument);
        CHECK_THROWS_AS(differentiable_onehot(torch::zeros({1, 3}), 0.0, 0),
                        std::invalid_argument);
    }
    SUBCASE("one-hot validity of samples") {
        torch::manual_seed(8);
        torch::Tensor scores = torch::randn({6, 10, 7});
        torch::Tensor d = differentiable_onehot(scores, 0.7, 123).detach();
        CHECK(((d == 0) | (d == 1)).all().item<bool>());
        CHECK((d.sum(-1) == 1).all().item<bool>());
    }
}

TEST_CASE("sample frequencies: uniform scores hit 1/K within 2%") {
    const int64_t k = 5;
    const int64_t n = 100000;
    torch::Tensor scores = torch::zeros({n, k});
    torch::Tensor d = differentiable_onehot(scores, 1.0, 77).detach();
    torch::Tensor counts = d.sum(0);
    for (int64_t c = 0; c < k; ++c) {
        CHECK(counts[c].item<double>() / n == doctest::Approx(1.0 / k).epsilon(0.02));
    }
}

TEST_CASE("sample frequencies: chi-squared vs softmax(scores/temperature) at 1%") {
    // K = 8, df = 7, critical value at the 1% level.
    const double chi2_crit = 18.4753;
    const int64_t k = 8;
    const int64_t n = 100000;
    torch::manual_seed(17);
    torch::Tensor base = torch::randn({k});
    const double temperature = 0.8;
    torch::Tensor probs = torch::softmax(base / temperature, -1).to(torch::kFloat64);

    torch::Tensor scores = base.unsqueeze(0).expand({n, k});
    torch::Tensor d = differentiable_onehot(scores, temperature, 901).detach();
    torch::Tensor counts = d.sum(0).to(torch::kFloat64);
    double chi2 = 0.0;
    for (int64_t c = 0; c < k; ++c) {
        const double expected = probs[c].item<double>() * n;
        const double observed = counts[c].item<double>();
        chi2 += (observed - expected) * (observed - expected) / expected;
    }
    CHECK(chi2 < chi2_crit);
}

TEST_CASE("linear objective: surrogate matches the enumeration gradient oracle") {
    // f(D) = <c, D>. True gradient of E[f] = d/dtheta sum_k softmax(theta)_k c_k.
    for (auto kind : {EstimatorKind::kReinMax, EstimatorKind::kStraightThrough}) {
        const int64_t k = 3;
        torch::manual_seed(21);
        torch::Tensor theta0 = torch::randn({k});
        torch::Tensor c = torch::tensor({0.3f, -1.1f, 0.7f});

        // Exact gradient by autograd on the closed-form expectation.
        torch::Tensor theta_exact = theta0.clone().set_requires_grad(true);
        (torch::softmax(theta_exact, -1) * c).sum().backward();
        torch::Tensor g_true = theta_exact.grad();

        // Monte-Carlo expected surrogate gradient over many seeded draws,
        // batched as S identical rows.
        const int64_t s = 60000;
        torch::Tensor theta = theta0.clone().set_requires_grad(true);
        torch::Tensor scores = theta.unsqueeze(0).expand({s, k});
        torch::Tensor d = differentiable_onehot(scores, 1.0, 333, kind);
        ((d * c).sum() / double(s)).backward();
        torch::Tensor g_est = theta.grad();

        const double cosine =
            (g_true * g_est).sum().item<double>() /
            (g_true.norm().item<double>() * g_est.norm().item<double>());
        CHECK(cosine >= 0.99);
    }
}

TEST_CASE("nonlinear objective: second-order surrogate bias <= straight-through bias") {
    // f(D) = <c, D>^2 evaluates to c_k^2 on outcome k, so the true gradient is
    // d/dtheta sum_k p_k c_k^2. The straight-through surrogate is biased here;
    // the second-order surrogate should not be worse.
    for (int64_t k : {3LL, 8LL}) {
        torch::manual_seed(31 + k);
        torch::Tensor theta0 = torch::randn({k}, torch::kFloat64);
        torch::Tensor c = (torch::randn({k}, torch::kFloat64) * 1.5);

        torch::Tensor theta_exact = theta0.clone().set_requires_grad(true);
        (torch::softmax(theta_exact, -1) * c.square()).sum().backward();
        torch::Tensor g_true = theta_exact.grad();

        const int64_t s = 200000;
        std::vector<double> bias;
        for (auto kind : {EstimatorKind::kReinMax, EstimatorKind::kStraightThrough}) {
            torch::Tensor theta = theta0.clone().set_requires_grad(true);
            torch::Tensor scores = theta.unsqueeze(0).expand({s, k});
            torch::Tensor d = differentiable_onehot(scores, 1.0, 5150 + k, kind);
            ((d * c).sum(-1).square().sum() / double(s)).backward();
            bias.push_back((theta.grad() - g_true).norm().item<double>());
        }
        // Margin absorbs Monte-Carlo error in the ReinMax estimate.
        CHECK(bias[0] <= bias[1] + 0.02);
        CHECK(bias[0] < 0.1);
    }
}

TEST_CASE("quantization_loss values and gradient routing") {
    SUBCASE("zero at L = L_vq") {
        torch::Tensor l = torch::randn({2, 3, 4});
        CHECK(quantization_loss(l, l.clone(), 0.25).item<double>() == doctest::Approx(0.0));
    }
    SUBCASE("hand case: beta 0, L=(1,0), L_vq=(0,0), no encoder gradient") {
        torch::Tensor l = torch::tensor({{1.0f, 0.0f}}).set_requires_grad(true);
        torch::Tensor lvq = torch::tensor({{0.0f, 0.0f}}).set_requires_grad(true);
        torch::Tensor loss = quantization_loss(l, lvq, 0.0);
        CHECK(loss.item<double>() == doctest::Approx(1.0));
        loss.backward();
        CHECK(l.grad().abs().sum().item<double>() == doctest::Approx(0.0));
        CHECK(lvq.grad().abs().sum().item<double>() > 0.0);
    }
    SUBCASE("beta scales only the commitment term") {
        torch::manual_seed(41);
        torch::Tensor l = torch::randn({4, 6});
        torch::Tensor lvq = torch::randn({4, 6});
        const double l0 = quantization_loss(l, lvq, 0.0).item<double>();
        const double l1 = quantization_loss(l, lvq, 1.0).item<double>();
        const double l025 = quantization_loss(l, lvq, 0.25).item<double>();
        CHECK(l025 == doctest::Approx(l0 + 0.25 * (l1 - l0)).epsilon(1e-6));
    }
    SUBCASE("commitment term routes gradient only to the encoder side") {
        torch::Tensor l = torch::randn({3, 5}).set_requires_grad(true);
        torch::Tensor lvq = torch::randn({3, 5}).set_requires_grad(true);
        // Subtract the codebook term by using beta-only weighting: evaluate
        // the difference of two losses so only the commitment term remains.
        torch::Tensor loss = quantization_loss(l, lvq, 1.0) - quantization_loss(l, lvq, 0.0);
        loss.backward();
        CHECK(l.grad().abs().sum().item<double>() > 0.0);
        CHECK(lvq.grad().abs().sum().item<double>() == doctest::Approx(0.0));
    }
    SUBCASE("shape mismatch rejected") {
        CHECK_THROWS_AS(quantization_loss(torch::zeros({1, 2}), torch::zeros({1, 3}), 0.25),
                        std::invalid_argument);
    }
}

TEST_CASE("common orthogonal codebook and split") {
    CHECK_THROWS_AS(CommonOrthogonalCodebook(8, 2, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(CommonOrthogonalCodebook(8, 0, 2, 1), std::invalid_argument);

    CommonOrthogonalCodebook common(8, 2, 4, 9);
    CHECK(common->width() == 6);
    CHECK(common->split_point == 2);

    SUBCASE("recomposition is bit-exact") {
        auto [sub1, sub2] = split_codebook(common);
        CHECK(sub1.sizes() == torch::IntArrayRef({8, 2}));
        CHECK(sub2.sizes() == torch::IntArrayRef({8, 4}));
        CHECK(torch::equal(torch::cat({sub1, sub2}, 1), common->vectors));
    }
    SUBCASE("dequantize splits linearly") {
        torch::manual_seed(10);
        torch::Tensor idx = torch::randint(8, {30});
        torch::Tensor onehots = torch::one_hot(idx, 8).to(torch::kFloat32);
        torch::Tensor full = dequantize(onehots, common->vectors);
        torch::Tensor part1 = dequantize(onehots, common->sub_codebook(1));
        torch::Tensor part2 = dequantize(onehots, common->sub_codebook(2));
        CHECK(torch::equal(torch::cat({part1, part2}, -1), full));
    }
    SUBCASE("invalid user rejected") {
        CHECK_THROWS_AS(common->sub_codebook(3), std::invalid_argument);
    }
}
