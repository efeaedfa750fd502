#include <catch2/catch_amalgamated.hpp>

#include "mmbridge/fft.hpp"
#include "mmbridge/rng.hpp"
#include "oracles.hpp"

using namespace mmbridge;

namespace {

std::vector<cdouble> random_signal(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<cdouble> x(n);
    for (auto& v : x) v = cdouble(rng.uniform(-1, 1), rng.uniform(-1, 1));
    return x;
}

double max_err(const std::vector<cdouble>& a, const std::vector<cdouble>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("fft matches the naive DFT on power-of-two sizes") {
    for (std::size_t n : {2u, 8u, 16u, 64u, 256u}) {
        auto x = random_signal(n, 100 + n);
        CHECK(max_err(fft::forward(x), oracles::naive_dft(x)) < 1e-9 * static_cast<double>(n));
    }
}

TEST_CASE("fft matches the naive DFT on non-power-of-two sizes") {
    for (std::size_t n : {3u, 5u, 17u, 100u, 255u}) {
        auto x = random_signal(n, 200 + n);
        CHECK(max_err(fft::forward(x), oracles::naive_dft(x)) < 1e-9 * static_cast<double>(n));
    }
}

TEST_CASE("fft inverse round-trips") {
    for (std::size_t n : {16u, 255u, 300u}) {
        auto x = random_signal(n, 300 + n);
        CHECK(max_err(fft::inverse(fft::forward(x)), x) < 1e-10 * static_cast<double>(n));
    }
}

TEST_CASE("fft of a pure tone peaks at its bin") {
    const std::size_t n = 255;
    std::vector<cdouble> x(n);
    const int bin = 37;
    for (std::size_t t = 0; t < n; ++t) {
        const double ang = 2.0 * kPi * bin * static_cast<double>(t) / static_cast<double>(n);
        x[t] = cdouble(std::cos(ang), std::sin(ang));
    }
    CHECK(oracles::argmax_abs(fft::forward(x)) == bin);
}
