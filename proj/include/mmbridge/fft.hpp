#pragma once

#include <complex>
#include <vector>

#include "mmbridge/common.hpp"

namespace mmbridge::fft {

inline bool is_pow2(std::size_t n) { return n && (n & (n - 1)) == 0; }

namespace detail {

// Iterative radix-2 Cooley-Tukey, in place. n must be a power of two.
inline void fft_pow2(std::vector<cdouble>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
        const cdouble wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cdouble w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                cdouble u = a[i + k];
                cdouble v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (auto& x : a) x *= inv;
    }
}

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Bluestein chirp-z transform for arbitrary n, built on the pow2 kernel.
inline void fft_bluestein(std::vector<cdouble>& a, bool inverse) {
    const std::size_t n = a.size();
    const std::size_t m = next_pow2(2 * n - 1);
    const double sign = inverse ? 1.0 : -1.0;

    std::vector<cdouble> w(n);  // w[k] = exp(sign * i*pi*k^2/n)
    for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the argument small for large k.
        std::uint64_t k2 = (static_cast<std::uint64_t>(k) * k) % (2 * n);
        double ang = sign * kPi * static_cast<double>(k2) / static_cast<double>(n);
        w[k] = cdouble(std::cos(ang), std::sin(ang));
    }

    std::vector<cdouble> x(m, cdouble(0, 0)), y(m, cdouble(0, 0));
    for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * w[k];
    y[0] = std::conj(w[0]);
    for (std::size_t k = 1; k < n; ++k) y[k] = y[m - k] = std::conj(w[k]);

    fft_pow2(x, false);
    fft_pow2(y, false);
    for (std::size_t k = 0; k < m; ++k) x[k] *= y[k];
    fft_pow2(x, true);

    for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * w[k];
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (auto& v : a) v *= inv;
    }
}

}  // namespace detail

/// In-place DFT; inverse applies the 1/n factor.
inline void transform(std::vector<cdouble>& a, bool inverse = false) {
    if (a.size() <= 1) return;
    if (is_pow2(a.size()))
        detail::fft_pow2(a, inverse);
    else
        detail::fft_bluestein(a, inverse);
}

inline std::vector<cdouble> forward(std::vector<cdouble> a) {
    transform(a, false);
    return a;
}

inline std::vector<cdouble> inverse(std::vector<cdouble> a) {
    transform(a, true);
    return a;
}

}  // namespace mmbridge::fft
