#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "mmbridge/common.hpp"

namespace mmbridge {

/// Time-velocity map: rows are frames (time), columns are Doppler/velocity
/// bins. Values live in [0,1] after normalization; norm_min/norm_max record
/// the pre-normalization range that was mapped onto [0,1].
struct Heatmap {
    int rows = 0;
    int cols = 0;
    std::vector<float> v;
    float norm_min = 0.f;
    float norm_max = 1.f;

    Heatmap() = default;
    Heatmap(int r, int c, float fill = 0.f) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

    float& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    float at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    std::size_t size() const { return v.size(); }

    bool same_shape(const Heatmap& o) const { return rows == o.rows && cols == o.cols; }
};

struct BinaryMap {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> v;

    BinaryMap() = default;
    BinaryMap(int r, int c, std::uint8_t fill = 0) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

    std::uint8_t& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    std::uint8_t at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    std::size_t size() const { return v.size(); }
    std::size_t count() const {
        std::size_t n = 0;
        for (auto b : v) n += b ? 1 : 0;
        return n;
    }
};

/// Min-max normalize to [0,1] in place; a constant map becomes all zeros.
/// Returns the (min,max) that was used.
inline std::pair<float, float> minmax_normalize(Heatmap& h) {
    if (h.v.empty()) return {0.f, 0.f};
    auto [lo_it, hi_it] = std::minmax_element(h.v.begin(), h.v.end());
    const double lo = *lo_it, hi = *hi_it;
    h.norm_min = static_cast<float>(lo);
    h.norm_max = static_cast<float>(hi);
    if (hi <= lo) {
        std::fill(h.v.begin(), h.v.end(), 0.f);
        return {h.norm_min, h.norm_max};
    }
    const double scale = 1.0 / (hi - lo);
    for (auto& x : h.v) x = static_cast<float>((static_cast<double>(x) - lo) * scale);
    return {h.norm_min, h.norm_max};
}

}  // namespace mmbridge
