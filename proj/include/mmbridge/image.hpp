#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "mmbridge/common.hpp"
#include "mmbridge/types.hpp"

namespace mmbridge::img {

/// Bilinear resize with edge-aligned sampling. Convex interpolation only, so
/// a [0,1] map stays in [0,1].
inline Heatmap resize_bilinear(const Heatmap& in, int out_rows, int out_cols) {
    require(in.rows >= 1 && in.cols >= 1, "resize: empty input");
    require(out_rows >= 1 && out_cols >= 1, "resize: empty output");
    Heatmap out(out_rows, out_cols);
    out.norm_min = in.norm_min;
    out.norm_max = in.norm_max;
    const double sr = out_rows > 1 ? static_cast<double>(in.rows - 1) / (out_rows - 1) : 0.0;
    const double sc = out_cols > 1 ? static_cast<double>(in.cols - 1) / (out_cols - 1) : 0.0;
    for (int r = 0; r < out_rows; ++r) {
        const double fr = r * sr;
        const int r0 = std::min(static_cast<int>(fr), in.rows - 1);
        const int r1 = std::min(r0 + 1, in.rows - 1);
        const double wr = fr - r0;
        for (int c = 0; c < out_cols; ++c) {
            const double fc = c * sc;
            const int c0 = std::min(static_cast<int>(fc), in.cols - 1);
            const int c1 = std::min(c0 + 1, in.cols - 1);
            const double wc = fc - c0;
            const double top = (1 - wc) * in.at(r0, c0) + wc * in.at(r0, c1);
            const double bot = (1 - wc) * in.at(r1, c0) + wc * in.at(r1, c1);
            out.at(r, c) = static_cast<float>((1 - wr) * top + wr * bot);
        }
    }
    return out;
}

/// Separable Gaussian blur, replicate border. kernel_size must be odd >= 3.
inline Heatmap gaussian_blur(const Heatmap& in, double sigma, int kernel_size) {
    require(kernel_size >= 3 && kernel_size % 2 == 1, "blur: kernel size must be odd and >= 3");
    require(sigma > 0, "blur: sigma must be positive");
    const int radius = kernel_size / 2;
    std::vector<double> k(kernel_size);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& w : k) w /= sum;

    auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi); };
    Heatmap tmp(in.rows, in.cols), out(in.rows, in.cols);
    for (int r = 0; r < in.rows; ++r)
        for (int c = 0; c < in.cols; ++c) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[i + radius] * in.at(r, clampi(c + i, in.cols - 1));
            tmp.at(r, c) = static_cast<float>(acc);
        }
    for (int r = 0; r < in.rows; ++r)
        for (int c = 0; c < in.cols; ++c) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[i + radius] * tmp.at(clampi(r + i, in.rows - 1), c);
            out.at(r, c) = static_cast<float>(acc);
        }
    out.norm_min = in.norm_min;
    out.norm_max = in.norm_max;
    return out;
}

/// 8-bit binary PGM (P5), min-max scaled.
inline void write_pgm(const std::string& path, const Heatmap& h) {
    require(h.rows > 0 && h.cols > 0, "pgm: empty map");
    float lo = h.v[0], hi = h.v[0];
    for (float x : h.v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("pgm: cannot open " + path);
    f << "P5\n" << h.cols << " " << h.rows << "\n255\n";
    for (float x : h.v) {
        const int q = static_cast<int>(std::lround((x - lo) * scale));
        f.put(static_cast<char>(std::clamp(q, 0, 255)));
    }
    if (!f) throw std::runtime_error("pgm: write failed for " + path);
}

inline void write_pgm(const std::string& path, const BinaryMap& m) {
    Heatmap h(m.rows, m.cols);
    for (std::size_t i = 0; i < m.v.size(); ++i) h.v[i] = m.v[i] ? 1.f : 0.f;
    write_pgm(path, h);
}

}  // namespace mmbridge::img
