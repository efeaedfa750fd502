#include <catch2/catch_amalgamated.hpp>

#include "mmbridge/metrics.hpp"
#include "mmbridge/rng.hpp"

using namespace mmbridge;
using namespace mmbridge::metrics;

namespace {

Heatmap random_heatmap(int rows, int cols, std::uint64_t seed) {
    Rng rng(seed);
    Heatmap h(rows, cols);
    for (auto& v : h.v) v = static_cast<float>(rng.uniform());
    return h;
}

}  // namespace

TEST_CASE("ssim of an image with itself is 1") {
    auto h = random_heatmap(16, 16, 1);
    CHECK(ssim(h, h) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("ssim of constant images matches the closed form") {
    // mu_a = 0.5, mu_b = 0.25, zero variances: the contrast/structure factor
    // is exactly 1, so SSIM = (2 * 0.125 + C1) / (0.25^2 + 0.5^2 + C1).
    Heatmap a(8, 8, 0.5f), b(8, 8, 0.25f);
    SsimConfig cfg;
    const double c1 = cfg.c1();
    CHECK(c1 == Catch::Approx(1e-4));
    const double expected = (2 * 0.5 * 0.25 + c1) / (0.25 * 0.25 + 0.5 * 0.5 + c1);
    CHECK(expected == Catch::Approx(0.8001).margin(5e-4));
    CHECK(ssim(a, b, cfg) == Catch::Approx(expected).margin(1e-9));
}

TEST_CASE("ssim is symmetric") {
    for (int trial = 0; trial < 50; ++trial) {
        auto a = random_heatmap(12, 12, 100 + trial);
        auto b = random_heatmap(12, 12, 200 + trial);
        CHECK(ssim(a, b) == Catch::Approx(ssim(b, a)).margin(1e-12));
    }
}

TEST_CASE("ssim below 1 for different images") {
    auto a = random_heatmap(16, 16, 5);
    auto b = random_heatmap(16, 16, 6);
    CHECK(ssim(a, b) < 1.0 - 1e-6);
}

TEST_CASE("ssim rejects shape mismatches and oversized windows") {
    Heatmap a(8, 8, 0.5f), b(8, 9, 0.5f);
    CHECK_THROWS_AS(ssim(a, b), std::invalid_argument);
    Heatmap c(4, 4, 0.5f), d(4, 4, 0.5f);
    SsimConfig cfg;
    cfg.window = 8;
    CHECK_THROWS_AS(ssim(c, d, cfg), std::invalid_argument);
}

TEST_CASE("pearson basics") {
    std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> neg{-1, -2, -3, -4, -5};
    CHECK(pearson(x, x) == Catch::Approx(1.0).margin(1e-12));
    CHECK(pearson(x, neg) == Catch::Approx(-1.0).margin(1e-12));
}

TEST_CASE("pearson matches hand arithmetic") {
    // a = (1,2,3), b = (2,4,6.5): means 2 and 25/6; compute from definition.
    const std::vector<double> a{1, 2, 3}, b{2, 4, 6.5};
    const double ma = 2.0, mb = 25.0 / 6.0;
    double saa = 0, sbb = 0, sab = 0;
    for (int i = 0; i < 3; ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    CHECK(pearson(a, b) == Catch::Approx(sab / std::sqrt(saa * sbb)).margin(1e-12));
}

TEST_CASE("pearson is invariant under positive affine transforms") {
    Rng rng(9);
    std::vector<double> a(32), b(32);
    for (auto& v : a) v = rng.gaussian();
    for (auto& v : b) v = rng.gaussian();
    std::vector<double> a2(32);
    for (std::size_t i = 0; i < a.size(); ++i) a2[i] = 3.5 * a[i] + 1.25;
    CHECK(pearson(a2, b) == Catch::Approx(pearson(a, b)).margin(1e-12));
}

TEST_CASE("pearson rejects zero-variance input") {
    std::vector<double> a{1, 1, 1}, b{1, 2, 3};
    CHECK_THROWS_AS(pearson(a, b), std::invalid_argument);
    CHECK_THROWS_AS(pearson(b, std::vector<double>{2, 2, 2}), std::invalid_argument);
}

TEST_CASE("topk accuracy enumerated cases") {
    // 3 samples, correct label at ranks 1, 2, 4.
    std::vector<std::vector<int>> preds{{0, 1, 2, 3}, {1, 0, 2, 3}, {1, 2, 3, 0}};
    std::vector<int> labels{0, 0, 0};
    CHECK(topk_accuracy(preds, labels, 1) == Catch::Approx(1.0 / 3.0));
    CHECK(topk_accuracy(preds, labels, 2) == Catch::Approx(2.0 / 3.0));
    CHECK(topk_accuracy(preds, labels, 3) == Catch::Approx(2.0 / 3.0));
    CHECK(topk_accuracy(preds, labels, 4) == Catch::Approx(1.0));
}

TEST_CASE("topk is 1 when every top choice is right and 0 when labels never appear") {
    std::vector<std::vector<int>> preds{{2, 0, 1}, {1, 0, 2}};
    CHECK(topk_accuracy(preds, {2, 1}, 1) == 1.0);
    std::vector<std::vector<int>> miss{{0, 1}, {1, 0}};
    CHECK(topk_accuracy(miss, {2, 2}, 1) == 0.0);
    CHECK(topk_accuracy(miss, {2, 2}, 2) == 0.0);
}

TEST_CASE("topk accuracy is monotone in k") {
    Rng rng(77);
    const int classes = 6;
    std::vector<std::vector<int>> preds;
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) {
        std::vector<int> order{0, 1, 2, 3, 4, 5};
        for (int j = classes - 1; j > 0; --j)
            std::swap(order[j], order[rng.below(static_cast<std::uint64_t>(j + 1))]);
        preds.push_back(order);
        labels.push_back(static_cast<int>(rng.below(classes)));
    }
    double prev = 0;
    for (int k = 1; k <= classes; ++k) {
        const double acc = topk_accuracy(preds, labels, k);
        CHECK(acc >= prev);
        prev = acc;
    }
}

TEST_CASE("topk rejects invalid k") {
    std::vector<std::vector<int>> preds{{0, 1}};
    CHECK_THROWS_AS(topk_accuracy(preds, {0}, 0), std::invalid_argument);
    CHECK_THROWS_AS(topk_accuracy(preds, {0}, 3), std::invalid_argument);
}

TEST_CASE("eval report aggregates per-class accuracies") {
    std::vector<std::vector<int>> preds{{0, 1, 2}, {1, 0, 2}, {2, 1, 0}, {1, 2, 0}};
    std::vector<int> labels{0, 0, 2, 2};
    auto rep = make_report(preds, labels, 3);
    CHECK(rep.samples == 4);
    CHECK(rep.top1 == Catch::Approx(0.5));
    CHECK(rep.top1 <= rep.top2);
    CHECK(rep.top2 <= rep.top3);
    CHECK(rep.per_class_top1[0] == Catch::Approx(0.5));
    CHECK(rep.per_class_top1[2] == Catch::Approx(0.5));
    CHECK(rep.per_class_count[1] == 0);
}
