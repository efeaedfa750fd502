// Independent reference implementations used only by tests. Each one trades
// speed for being obviously correct: direct definitions, no shared code with
// the library paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "mmbridge/common.hpp"
#include "mmbridge/types.hpp"

namespace oracles {

using mmbridge::cdouble;
using mmbridge::kPi;

// O(n^2) DFT straight from the definition.
inline std::vector<cdouble> naive_dft(const std::vector<cdouble>& x, bool inverse = false) {
    const std::size_t n = x.size();
    std::vector<cdouble> out(n, cdouble(0, 0));
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = sign * 2.0 * kPi * static_cast<double>(k * t % n) / static_cast<double>(n);
            out[k] += x[t] * cdouble(std::cos(ang), std::sin(ang));
        }
    if (inverse)
        for (auto& v : out) v /= static_cast<double>(n);
    return out;
}

inline std::size_t argmax_abs(const std::vector<cdouble>& x) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < x.size(); ++i)
        if (std::abs(x[i]) > std::abs(x[best])) best = i;
    return best;
}

// Range bin a single reflector should land in: f_IF = 2 d S / c, bin spacing
// adc_rate / adc_samples.
inline int expected_range_bin(double d, double slope, double adc_rate, int adc_samples) {
    const double beat = 2.0 * d * slope / mmbridge::kSpeedOfLight;
    return static_cast<int>(std::lround(beat * adc_samples / adc_rate));
}

// Doppler bin offset from the zero-velocity row: f_d = 2 v / lambda, bin
// spacing 1 / (chirps * chirp_period).
inline int expected_doppler_offset(double v, double wavelength, int chirps, double chirp_period) {
    const double fd = 2.0 * v / wavelength;
    return static_cast<int>(std::lround(fd * chirps * chirp_period));
}

// Brute-force binary dilation/erosion from the set definition.
inline mmbridge::BinaryMap brute_dilate(const mmbridge::BinaryMap& m, const std::vector<std::pair<int, int>>& se_offsets) {
    mmbridge::BinaryMap out(m.rows, m.cols, 0);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) {
            bool hit = false;
            // out(r,c) set iff some se offset maps a set input pixel onto (r,c)
            for (auto [dr, dc] : se_offsets) {
                const int rr = r - dr, cc = c - dc;
                if (rr >= 0 && rr < m.rows && cc >= 0 && cc < m.cols && m.at(rr, cc)) hit = true;
            }
            out.at(r, c) = hit ? 1 : 0;
        }
    return out;
}

inline mmbridge::BinaryMap brute_erode(const mmbridge::BinaryMap& m, const std::vector<std::pair<int, int>>& se_offsets) {
    mmbridge::BinaryMap out(m.rows, m.cols, 0);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) {
            bool all = true;
            for (auto [dr, dc] : se_offsets) {
                const int rr = r + dr, cc = c + dc;
                all = all && rr >= 0 && rr < m.rows && cc < m.cols && cc >= 0 && m.at(rr, cc);
            }
            out.at(r, c) = all ? 1 : 0;
        }
    return out;
}

// Closing by the plane set definition: embed the map in a grid padded well
// past the structuring element reach, dilate, erode, crop.
inline mmbridge::BinaryMap brute_close(const mmbridge::BinaryMap& m,
                                       const std::vector<std::pair<int, int>>& se_offsets) {
    int reach = 1;
    for (auto [dr, dc] : se_offsets) reach = std::max({reach, std::abs(dr), std::abs(dc)});
    const int pad = 2 * reach + 1;
    mmbridge::BinaryMap big(m.rows + 2 * pad, m.cols + 2 * pad, 0);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) big.at(r + pad, c + pad) = m.at(r, c);
    auto closed = brute_erode(brute_dilate(big, se_offsets), se_offsets);
    mmbridge::BinaryMap out(m.rows, m.cols);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) out.at(r, c) = closed.at(r + pad, c + pad);
    return out;
}

// Exhaustive optimal 2-partition of scalars by within-cluster sum of squares.
struct BestPartition {
    std::vector<int> labels;  // 1 = higher-mean side
    double wcss = 0;
};

inline BestPartition exhaustive_kmeans2(const std::vector<double>& v) {
    const std::size_t n = v.size();
    BestPartition best;
    best.wcss = std::numeric_limits<double>::infinity();
    // All 2^n assignments with both clusters non-empty.
    for (std::size_t mask = 1; mask + 1 < (1u << n); ++mask) {
        double s0 = 0, s1 = 0;
        std::size_t n0 = 0, n1 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) { s1 += v[i]; ++n1; }
            else                  { s0 += v[i]; ++n0; }
        }
        const double m0 = s0 / n0, m1 = s1 / n1;
        double w = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double m = (mask & (1u << i)) ? m1 : m0;
            w += (v[i] - m) * (v[i] - m);
        }
        if (w < best.wcss) {
            best.wcss = w;
            best.labels.assign(n, 0);
            const int one = m1 >= m0 ? 1 : 0;
            for (std::size_t i = 0; i < n; ++i)
                best.labels[i] = (mask & (1u << i)) ? one : 1 - one;
        }
    }
    return best;
}

// Radix-2 FFT for the reference path only (n is a power of two). Separate
// from the library FFT so the reference stays independent.
inline std::vector<cdouble> naive_dft_fast(std::vector<cdouble> a, bool inverse = false) {
    const std::size_t n = a.size();
    if (n <= 1) return a;
    std::vector<cdouble> even(n / 2), odd(n / 2);
    for (std::size_t i = 0; i < n / 2; ++i) {
        even[i] = a[2 * i];
        odd[i] = a[2 * i + 1];
    }
    even = naive_dft_fast(std::move(even), inverse);
    odd = naive_dft_fast(std::move(odd), inverse);
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < n / 2; ++k) {
        const double ang = sign * 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
        const cdouble w = cdouble(std::cos(ang), std::sin(ang)) * odd[k];
        a[k] = even[k] + w;
        a[k + n / 2] = even[k] - w;
    }
    if (inverse && n > 1)
        for (auto& v : a) v *= 0.5;  // each level halves; net 1/n overall
    return a;
}

// Eqs. 1-3 reference: sample the real transmitted and received chirps at a
// scaled-down carrier, mix them, low-pass by zeroing FFT bins above cutoff,
// and decimate to the ADC rate. Returns the real IF series.
inline std::vector<double> mixed_if_reference(double f_c, double slope, double alpha, double d,
                                              double rf_rate, double adc_rate, int adc_samples,
                                              double lpf_cutoff) {
    const double tau = 2.0 * d / mmbridge::kSpeedOfLight;
    const int decim = static_cast<int>(std::lround(rf_rate / adc_rate));
    std::size_t n_rf = static_cast<std::size_t>(adc_samples) * decim;
    // Round up to a power of two for the filtering FFT.
    std::size_t n_fft = 1;
    while (n_fft < n_rf) n_fft <<= 1;

    std::vector<cdouble> prod(n_fft, cdouble(0, 0));
    for (std::size_t i = 0; i < n_fft; ++i) {
        const double t = static_cast<double>(i) / rf_rate;
        const double tx = std::cos(2.0 * kPi * (f_c * t + 0.5 * slope * t * t));
        const double tr = t - tau;
        const double rx = alpha * std::cos(2.0 * kPi * (f_c * tr + 0.5 * slope * tr * tr));
        prod[i] = cdouble(tx * rx, 0.0);
    }
    auto spec = naive_dft_fast(prod);
    const double bin_hz = rf_rate / static_cast<double>(n_fft);
    for (std::size_t k = 0; k < n_fft; ++k) {
        const double freq = k <= n_fft / 2 ? k * bin_hz : (static_cast<double>(n_fft) - k) * bin_hz;
        if (freq > lpf_cutoff) spec[k] = cdouble(0, 0);
    }
    auto filtered = naive_dft_fast(spec, true);
    std::vector<double> out(adc_samples);
    for (int i = 0; i < adc_samples; ++i) out[i] = filtered[static_cast<std::size_t>(i) * decim].real();
    return out;
}

}  // namespace oracles
