#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mmbridge/common.hpp"
#include "mmbridge/types.hpp"

namespace mmbridge::metrics {

/// Uniform-window SSIM over unit dynamic range: K1 = 0.01, K2 = 0.03, L = 1.
struct SsimConfig {
    int window = 8;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;

    double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
    double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

/// Mean of local SSIM over all sliding windows (stride 1, uniform weights).
inline double ssim(const Heatmap& a, const Heatmap& b, const SsimConfig& cfg = {}) {
    require(a.same_shape(b), "ssim: shape mismatch");
    require(cfg.window >= 1 && cfg.window <= a.rows && cfg.window <= a.cols,
            "ssim: window exceeds image dims");
    const int w = cfg.window;
    const double c1 = cfg.c1(), c2 = cfg.c2();
    const double inv_n = 1.0 / (w * w);

    double total = 0;
    std::size_t windows = 0;
    for (int r = 0; r + w <= a.rows; ++r) {
        for (int c = 0; c + w <= a.cols; ++c) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (int i = 0; i < w; ++i)
                for (int j = 0; j < w; ++j) {
                    const double x = a.at(r + i, c + j), y = b.at(r + i, c + j);
                    sa += x;
                    sb += y;
                    saa += x * x;
                    sbb += y * y;
                    sab += x * y;
                }
            const double mu_a = sa * inv_n, mu_b = sb * inv_n;
            const double var_a = saa * inv_n - mu_a * mu_a;
            const double var_b = sbb * inv_n - mu_b * mu_b;
            const double cov = sab * inv_n - mu_a * mu_b;
            total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                     ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            ++windows;
        }
    }
    return total / static_cast<double>(windows);
}

/// Pearson correlation coefficient.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() == b.size(), "pearson: length mismatch");
    require(a.size() >= 2, "pearson: need at least 2 samples");
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa <= 0 || sbb <= 0) throw std::invalid_argument("pearson: zero-variance input");
    return sab / std::sqrt(saa * sbb);
}

/// Fraction of samples whose label appears in the first k ranked classes.
inline double topk_accuracy(const std::vector<std::vector<int>>& predictions,
                            const std::vector<int>& labels, int k) {
    require(predictions.size() == labels.size(), "topk: prediction/label count mismatch");
    require(!predictions.empty(), "topk: empty inputs");
    require(k >= 1, "topk: k must be >= 1");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        require(static_cast<int>(predictions[i].size()) >= k,
                "topk: k exceeds prediction list length");
        for (int j = 0; j < k; ++j)
            if (predictions[i][j] == labels[i]) {
                ++hits;
                break;
            }
    }
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

struct EvalReport {
    int classes = 0;
    std::size_t samples = 0;
    double top1 = 0, top2 = 0, top3 = 0;
    std::vector<double> per_class_top1, per_class_top2, per_class_top3;
    std::vector<std::size_t> per_class_count;
    double ssim_mean = 0, ssim_std = 0;
    double pearson_mean = 0;
    bool has_generative = false;
};

inline EvalReport make_report(const std::vector<std::vector<int>>& predictions,
                              const std::vector<int>& labels, int classes) {
    require(classes >= 1, "report: need at least one class");
    EvalReport rep;
    rep.classes = classes;
    rep.samples = labels.size();
    const int kmax = std::min(3, classes);
    rep.top1 = topk_accuracy(predictions, labels, 1);
    rep.top2 = kmax >= 2 ? topk_accuracy(predictions, labels, 2) : rep.top1;
    rep.top3 = kmax >= 3 ? topk_accuracy(predictions, labels, 3) : rep.top2;
    rep.per_class_top1.assign(classes, 0);
    rep.per_class_top2.assign(classes, 0);
    rep.per_class_top3.assign(classes, 0);
    rep.per_class_count.assign(classes, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        require(y >= 0 && y < classes, "report: label out of range");
        ++rep.per_class_count[y];
        for (int k = 0; k < std::min<int>(3, static_cast<int>(predictions[i].size())); ++k) {
            if (predictions[i][k] == y) {
                if (k < 1) rep.per_class_top1[y] += 1;
                if (k < 2) rep.per_class_top2[y] += 1;
                if (k < 3) rep.per_class_top3[y] += 1;
                break;
            }
        }
    }
    for (int c = 0; c < classes; ++c) {
        if (!rep.per_class_count[c]) continue;
        const double n = static_cast<double>(rep.per_class_count[c]);
        rep.per_class_top1[c] /= n;
        rep.per_class_top2[c] /= n;
        rep.per_class_top3[c] /= n;
    }
    return rep;
}

}  // namespace mmbridge::metrics
