#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mmbridge/diffusion.hpp"
#include "mmbridge/enhance.hpp"
#include "mmbridge/fmcw.hpp"
#include "mmbridge/imu.hpp"
#include "mmbridge/metrics.hpp"
#include "mmbridge/nn/grad_check.hpp"
#include "mmbridge/radar_dsp.hpp"

// Fast oracle sweep behind the CLI selfcheck command: analytic FFT bins,
// gradient checks, schedule identities, wavelet reconstruction, clustering
// and morphology properties. Each check is small enough to finish in
// milliseconds and fails loudly with a detail string.
namespace mmbridge::selfcheck {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace detail {

inline CheckResult range_bins() {
    Rng rng(101);
    fmcw::ChirpConfig cfg;
    cfg.adc_samples = 64;
    cfg.adc_rate = 2e6;
    cfg.chirps_per_frame = 8;
    cfg.frames = 1;
    int worst = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const double d = 0.5 + rng.uniform() * (cfg.max_distance() * 0.9 - 0.5);
        auto x = fmcw::if_chirp(cfg, {{d, 1.0, 1.0}});
        auto spec = fft::forward(x);
        std::size_t best = 0;
        for (std::size_t k = 1; k < spec.size(); ++k)
            if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
        const int expect = static_cast<int>(
            std::lround(2.0 * d * cfg.slope / kSpeedOfLight * cfg.adc_samples / cfg.adc_rate));
        worst = std::max(worst, std::abs(static_cast<int>(best) - expect));
    }
    return {"range-fft bins", worst <= 1, "max bin error " + std::to_string(worst)};
}

inline CheckResult doppler_bins() {
    fmcw::ChirpConfig cfg;
    cfg.frames = 1;
    Rng rng(102);
    int worst = 0;
    for (int trial = 0; trial < 3; ++trial) {
        const double v = 0.4 + 1.2 * rng.uniform();
        const double span = cfg.frames * cfg.frame_period() + 0.01;
        const int n = static_cast<int>(span * 1000) + 1;
        kin::KinematicTrace trace;
        trace.sample_rate = 1000;
        trace.duration = span;
        trace.segment_names = {"hand"};
        trace.rcs_weight = {1.0};
        trace.position.resize(1);
        trace.acceleration.assign(1, std::vector<Vec3>(n, Vec3{}));
        for (int i = 0; i < n; ++i)
            trace.position[0].push_back(Vec3{2.0 + v * i / 1000.0, 0, 0});
        fmcw::SceneConfig scene;
        scene.dynamic_paths.push_back({fmcw::PathKind::Dynamic, 1.0, 1.0, 0.0, 0});
        kin::RadarPose pose;
        pose.origin = {0, 0, 0};
        pose.boresight = {1, 0, 0};
        auto cube = fmcw::synthesize_cube(cfg, scene, trace, pose, trial);
        std::vector<cdouble> slow(cfg.chirps_per_frame);
        for (int k = 0; k < cfg.chirps_per_frame; ++k) slow[k] = cdouble(cube.at(0, k, 0));
        auto spec = fft::forward(slow);
        std::size_t best = 0;
        for (std::size_t k = 1; k < spec.size(); ++k)
            if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
        const int expect = static_cast<int>(std::lround(
            2.0 * v / cfg.wavelength() * cfg.chirps_per_frame * cfg.chirp_period()));
        worst = std::max(worst, std::abs(static_cast<int>(best) - expect));
    }
    return {"doppler-fft bins", worst <= 1, "max bin error " + std::to_string(worst)};
}

inline CheckResult clutter_removal() {
    dsp::Frame f(8, 16);
    Rng rng(103);
    for (int s = 0; s < 16; ++s) {
        const cdouble v(rng.uniform(-1, 1), rng.uniform(-1, 1));
        for (int c = 0; c < 8; ++c) f.at(c, s) = v;
    }
    auto out = dsp::remove_static_clutter(f);
    double worst = 0;
    for (const auto& v : out.v) worst = std::max(worst, std::abs(v));
    return {"static clutter removal", worst <= 1e-10, "residual " + std::to_string(worst)};
}

inline CheckResult modwt_reconstruction() {
    Rng rng(104);
    std::vector<double> x(128);
    for (auto& v : x) v = rng.uniform(-1, 1);
    auto rec = imu::imodwt_full(imu::modwt(x));
    double num = 0, den = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (rec[i] - x[i]) * (rec[i] - x[i]);
        den += x[i] * x[i];
    }
    const double rel = std::sqrt(num / den);
    bool shift_ok = true;
    std::vector<double> shifted(x.size());
    const std::size_t k = 13;
    for (std::size_t i = 0; i < x.size(); ++i) shifted[(i + k) % x.size()] = x[i];
    auto a = imu::modwt(x);
    auto b = imu::modwt(shifted);
    for (int j = 0; j < a.levels; ++j)
        for (std::size_t i = 0; i < x.size(); ++i)
            shift_ok = shift_ok && b.detail[j][(i + k) % x.size()] == a.detail[j][i];
    return {"modwt reconstruction + shift", rel <= 1e-9 && shift_ok,
            "rel err " + std::to_string(rel) + (shift_ok ? "" : ", shift mismatch")};
}

inline CheckResult schedule_identities() {
    auto s = diff::build_schedule(200, 1.0);
    double worst = std::abs(s.m[0]) + std::abs(s.m[200] - 1.0) + std::abs(s.delta[0]) +
                   std::abs(s.delta[200]);
    for (int t = 1; t <= 200; ++t) {
        const auto c = diff::transition_coeffs(t, s);
        worst = std::max(worst, std::abs(c.on_prev * (1.0 - s.m[t - 1]) - (1.0 - s.m[t])));
        worst = std::max(worst,
                         std::abs(c.variance + c.on_prev * c.on_prev * s.delta[t - 1] - s.delta[t]));
    }
    return {"bridge schedule identities", worst <= 1e-12, "max residual " + std::to_string(worst)};
}

inline CheckResult gradient_checks() {
    namespace op = nn::ops;
    double worst = 0;

    {
        nn::Param<double> x("x", {1, 6, 6}), w("w", {2, 1, 3, 3}), b("b", {2});
        Rng rng(105);
        for (auto& v : x.value.v) v = rng.uniform(-1, 1);
        for (auto& v : w.value.v) v = rng.uniform(-1, 1);
        auto build = [&](nn::Tape<double>& t) {
            auto* y = op::conv2d(t, t.param(x), t.param(w), t.param(b));
            return op::mean_all(t, op::mul(t, y, y));
        };
        worst = std::max(worst, nn::grad_check(build, {&x, &w, &b}, 1e-4).max_rel_err);
    }
    {
        nn::Param<double> x("x", {1, 5, 5}), w("w", {1, 1, 4}), pos("pos", {4, 2});
        Rng rng(106);
        for (auto& v : x.value.v) v = rng.uniform(-1, 1);
        for (auto& v : w.value.v) v = rng.uniform(-1, 1);
        for (auto& v : pos.value.v) v = rng.uniform(-1.2, 1.2) + 0.37;
        auto build = [&](nn::Tape<double>& t) {
            auto* y = op::ldconv2d(t, t.param(x), t.param(w), t.param(pos), 3.0);
            return op::mean_all(t, op::mul(t, y, y));
        };
        worst = std::max(worst, nn::grad_check(build, {&x, &w, &pos}, 1e-4).max_rel_err);
    }
    {
        nn::Param<double> q("q", {3, 4}), k("k", {3, 4}), v("v", {3, 4});
        Rng rng(107);
        for (auto* p : {&q, &k, &v})
            for (auto& x : p->value.v) x = rng.uniform(-1, 1);
        auto build = [&](nn::Tape<double>& t) {
            auto* y = op::attention(t, t.param(q), t.param(k), t.param(v));
            return op::mean_all(t, op::mul(t, y, y));
        };
        worst = std::max(worst, nn::grad_check(build, {&q, &k, &v}).max_rel_err);
    }
    return {"gradient checks (conv/ldconv/attention)", worst <= 1e-4,
            "max rel err " + std::to_string(worst)};
}

inline CheckResult kmeans_optimal() {
    Rng rng(108);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 4 + static_cast<int>(rng.below(6));
        std::vector<double> v(n);
        for (auto& x : v) x = rng.uniform();
        auto res = mwhe::kmeans2(v, trial);
        // Exhaustive optimum over all 2-partitions.
        double best = 1e300;
        std::vector<int> best_labels;
        for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
            double s0 = 0, s1 = 0;
            int n0 = 0, n1 = 0;
            for (int i = 0; i < n; ++i)
                if (mask & (1u << i)) { s1 += v[i]; ++n1; }
                else                  { s0 += v[i]; ++n0; }
            const double m0 = s0 / n0, m1 = s1 / n1;
            double w = 0;
            for (int i = 0; i < n; ++i) {
                const double m = (mask & (1u << i)) ? m1 : m0;
                w += (v[i] - m) * (v[i] - m);
            }
            if (w < best) {
                best = w;
                best_labels.assign(n, 0);
                const int one = m1 >= m0 ? 1 : 0;
                for (int i = 0; i < n; ++i) best_labels[i] = (mask & (1u << i)) ? one : 1 - one;
            }
        }
        if (res.labels != best_labels)
            return {"k-means vs exhaustive optimum", false, "mismatch at trial " + std::to_string(trial)};
    }
    return {"k-means vs exhaustive optimum", true, "20 instances"};
}

inline CheckResult closing_properties() {
    mwhe::StructuringElement se;
    Rng rng(109);
    for (int trial = 0; trial < 50; ++trial) {
        BinaryMap m(8, 8);
        for (auto& v : m.v) v = rng.uniform() < 0.35 ? 1 : 0;
        auto once = mwhe::morph_close(m, se);
        for (std::size_t i = 0; i < m.v.size(); ++i)
            if (m.v[i] && !once.v[i])
                return {"closing extensive + idempotent", false, "not extensive"};
        auto twice = mwhe::morph_close(once, se);
        if (twice.v != once.v) return {"closing extensive + idempotent", false, "not idempotent"};
    }
    return {"closing extensive + idempotent", true, "50 maps"};
}

inline CheckResult metric_sanity() {
    Heatmap h(8, 8);
    Rng rng(110);
    for (auto& v : h.v) v = static_cast<float>(rng.uniform());
    const double self = metrics::ssim(h, h);
    const bool ssim_ok = std::abs(self - 1.0) <= 1e-9;
    std::vector<std::vector<int>> preds{{0, 1, 2}, {2, 1, 0}, {1, 0, 2}};
    std::vector<int> labels{0, 0, 2};
    double prev = 0;
    bool mono = true;
    for (int k = 1; k <= 3; ++k) {
        const double acc = metrics::topk_accuracy(preds, labels, k);
        mono = mono && acc >= prev;
        prev = acc;
    }
    return {"metric sanity (ssim self, top-k monotone)", ssim_ok && mono,
            "ssim(x,x) = " + std::to_string(self)};
}

}  // namespace detail

inline std::vector<CheckResult> run_all() {
    return {detail::range_bins(),        detail::doppler_bins(),   detail::clutter_removal(),
            detail::modwt_reconstruction(), detail::schedule_identities(), detail::gradient_checks(),
            detail::kmeans_optimal(),    detail::closing_properties(), detail::metric_sanity()};
}

}  // namespace mmbridge::selfcheck
