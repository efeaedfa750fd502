#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mmbridge/common.hpp"
#include "mmbridge/fft.hpp"
#include "mmbridge/kinematics.hpp"
#include "mmbridge/rng.hpp"
#include "mmbridge/types.hpp"

namespace mmbridge::imu {

/// How segment accelerations couple into the on-arm device.
struct MountModel {
    std::vector<double> coupling;            // per-segment weight, >= 0
    Vec3 gravity{0.0, 0.0, -9.81};           // m/s^2
    double noise_sigma = 0.0;                // m/s^2 per axis
    double sample_rate = 100.0;              // Hz
};

/// Default wrist-worn mount for a trace: strongest coupling at the distal
/// segments.
inline MountModel make_mount(const kin::KinematicTrace& trace, double noise_sigma = 0.0) {
    static constexpr double weights[4] = {0.5, 1.0, 0.3, 0.1};  // hand, wrist, elbow, shoulder
    MountModel m;
    m.noise_sigma = noise_sigma;
    for (int s = 0; s < trace.segments(); ++s) m.coupling.push_back(weights[std::min(s, 3)]);
    return m;
}

struct ImuTrace {
    double sample_rate = 100.0;
    std::vector<double> ax, ay, az;  // m/s^2

    int samples() const { return static_cast<int>(ax.size()); }
};

/// Weighted sum of per-segment accelerations plus gravity plus white noise,
/// block-averaged from the kinematic rate down to the mount rate.
inline ImuTrace synthesize_imu(const kin::KinematicTrace& trace, const MountModel& mount,
                               std::uint64_t seed) {
    require(mount.sample_rate > 0, "mount sample rate must be positive");
    require(mount.coupling.size() == static_cast<std::size_t>(trace.segments()),
            "mount coupling count must match trace segments");
    bool any_positive = false;
    for (double w : mount.coupling) {
        require(w >= 0, "mount coupling weights must be non-negative");
        any_positive = any_positive || w > 0;
    }
    require(any_positive, "mount needs at least one positive coupling weight");
    const int block = static_cast<int>(std::lround(trace.sample_rate / mount.sample_rate));
    require(block >= 1, "mount sample rate exceeds the kinematic rate");
    const int n_out = trace.samples() / block;
    require(n_out >= 1, "trace shorter than one IMU sample period");

    ImuTrace out;
    out.sample_rate = mount.sample_rate;
    out.ax.resize(n_out);
    out.ay.resize(n_out);
    out.az.resize(n_out);
    Rng rng(Rng::derive(seed, 0x1A0));
    for (int i = 0; i < n_out; ++i) {
        Vec3 acc;
        for (int b = 0; b < block; ++b) {
            const int k = i * block + b;
            for (int s = 0; s < trace.segments(); ++s)
                acc += trace.acceleration[s][k] * mount.coupling[s];
        }
        acc = acc * (1.0 / block) + mount.gravity;
        out.ax[i] = acc.x + mount.noise_sigma * rng.gaussian();
        out.ay[i] = acc.y + mount.noise_sigma * rng.gaussian();
        out.az[i] = acc.z + mount.noise_sigma * rng.gaussian();
    }
    return out;
}

// ---------------------------------------------------------------------------
// MODWT (maximal overlap discrete wavelet transform), Daubechies-4 filters,
// circular boundary. Shift-equivariant and exactly invertible.
// ---------------------------------------------------------------------------

namespace modwt_detail {

// D4 scaling coefficients divided by sqrt(2), as MODWT requires.
inline const std::array<double, 4>& scaling_filter() {
    static const std::array<double, 4> h = [] {
        const double s3 = std::sqrt(3.0), d = 4.0 * std::sqrt(2.0);
        std::array<double, 4> f{(1 + s3) / d, (3 + s3) / d, (3 - s3) / d, (1 - s3) / d};
        for (auto& x : f) x /= std::sqrt(2.0);
        return f;
    }();
    return h;
}

inline const std::array<double, 4>& wavelet_filter() {
    static const std::array<double, 4> g = [] {
        const auto& h = scaling_filter();
        // Quadrature mirror: g[l] = (-1)^l * h[L-1-l].
        std::array<double, 4> f{};
        for (int l = 0; l < 4; ++l) f[l] = (l % 2 ? -1.0 : 1.0) * h[3 - l];
        return f;
    }();
    return g;
}

inline std::size_t wrap(std::ptrdiff_t i, std::size_t n) {
    std::ptrdiff_t m = i % static_cast<std::ptrdiff_t>(n);
    return static_cast<std::size_t>(m < 0 ? m + static_cast<std::ptrdiff_t>(n) : m);
}

}  // namespace modwt_detail

struct ModwtResult {
    std::vector<std::vector<double>> detail;  // [level-1][t], levels 1..J
    std::vector<double> smooth;               // V_J
    int levels = 0;
};

inline constexpr int kModwtLevels = 4;

/// Forward MODWT with circular boundary. Requires the series to be at least
/// as long as the level-J filter support (2^J - 1) * 3 + 1.
inline ModwtResult modwt(const std::vector<double>& x, int levels = kModwtLevels) {
    require(levels >= 1, "modwt needs at least one level");
    const std::size_t n = x.size();
    const std::size_t support = ((1u << levels) - 1) * 3 + 1;
    if (n < support)
        throw std::invalid_argument("modwt: series of length " + std::to_string(n) +
                                    " shorter than level-" + std::to_string(levels) +
                                    " filter support " + std::to_string(support));
    const auto& h = modwt_detail::scaling_filter();
    const auto& g = modwt_detail::wavelet_filter();

    ModwtResult res;
    res.levels = levels;
    res.detail.resize(levels);
    std::vector<double> v = x;
    for (int j = 1; j <= levels; ++j) {
        const std::ptrdiff_t stride = static_cast<std::ptrdiff_t>(1) << (j - 1);
        std::vector<double> w_next(n), v_next(n);
        for (std::size_t t = 0; t < n; ++t) {
            double dw = 0, dv = 0;
            for (int l = 0; l < 4; ++l) {
                const double xv = v[modwt_detail::wrap(static_cast<std::ptrdiff_t>(t) - stride * l, n)];
                dw += g[l] * xv;
                dv += h[l] * xv;
            }
            w_next[t] = dw;
            v_next[t] = dv;
        }
        res.detail[j - 1] = std::move(w_next);
        v = std::move(v_next);
    }
    res.smooth = std::move(v);
    return res;
}

/// Inverse MODWT. keep_detail/keep_smooth select which bands contribute;
/// with everything kept the reconstruction is exact.
inline std::vector<double> imodwt(const ModwtResult& coeffs,
                                  const std::vector<bool>& keep_detail, bool keep_smooth) {
    require(static_cast<int>(keep_detail.size()) == coeffs.levels,
            "keep_detail size must equal level count");
    const auto& h = modwt_detail::scaling_filter();
    const auto& g = modwt_detail::wavelet_filter();
    const std::size_t n = coeffs.smooth.size();

    std::vector<double> v(n, 0.0);
    if (keep_smooth) v = coeffs.smooth;
    for (int j = coeffs.levels; j >= 1; --j) {
        const std::ptrdiff_t stride = static_cast<std::ptrdiff_t>(1) << (j - 1);
        const std::vector<double> zeros(keep_detail[j - 1] ? 0 : n, 0.0);
        const std::vector<double>& w = keep_detail[j - 1] ? coeffs.detail[j - 1] : zeros;
        std::vector<double> v_prev(n);
        for (std::size_t t = 0; t < n; ++t) {
            double acc = 0;
            for (int l = 0; l < 4; ++l) {
                const std::size_t idx = modwt_detail::wrap(static_cast<std::ptrdiff_t>(t) + stride * l, n);
                acc += h[l] * v[idx] + g[l] * w[idx];
            }
            v_prev[t] = acc;
        }
        v = std::move(v_prev);
    }
    return v;
}

inline std::vector<double> imodwt_full(const ModwtResult& coeffs) {
    return imodwt(coeffs, std::vector<bool>(coeffs.levels, true), true);
}

/// Levels whose details count as gesture band: 2..4 at 100 Hz (~1.5-25 Hz).
struct GestureBand {
    int level_lo = 2;
    int level_hi = 4;
};

/// Band-limited reconstruction keeping only the gesture-related detail levels.
inline std::vector<double> gesture_band(const std::vector<double>& x,
                                        const GestureBand& band = {}, int levels = kModwtLevels) {
    auto coeffs = modwt(x, levels);
    std::vector<bool> keep(levels, false);
    for (int j = band.level_lo; j <= std::min(band.level_hi, levels); ++j) keep[j - 1] = true;
    return imodwt(coeffs, keep, false);
}

// ---------------------------------------------------------------------------
// STFT spectrogram triplet
// ---------------------------------------------------------------------------

struct StftConfig {
    int window = 32;   // Hann, periodic
    int hop = 4;
};

/// One-sided STFT magnitude, [freq_bins x time_bins], freq_bins = window/2+1.
struct Spectrogram {
    int freq_bins = 0;
    int time_bins = 0;
    std::vector<double> v;

    double& at(int f, int t) { return v[static_cast<std::size_t>(f) * time_bins + t]; }
    double at(int f, int t) const { return v[static_cast<std::size_t>(f) * time_bins + t]; }
};

inline Spectrogram stft_magnitude(const std::vector<double>& x, const StftConfig& cfg = {}) {
    require(cfg.window >= 2 && cfg.hop >= 1, "invalid STFT config");
    const int n = static_cast<int>(x.size());
    if (n < cfg.window)
        throw std::invalid_argument("stft: series of length " + std::to_string(n) +
                                    " shorter than window " + std::to_string(cfg.window));
    Spectrogram sp;
    sp.freq_bins = cfg.window / 2 + 1;
    sp.time_bins = (n - cfg.window) / cfg.hop + 1;
    sp.v.assign(static_cast<std::size_t>(sp.freq_bins) * sp.time_bins, 0.0);

    std::vector<double> w(cfg.window);
    for (int i = 0; i < cfg.window; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / cfg.window);

    std::vector<cdouble> buf(cfg.window);
    for (int t = 0; t < sp.time_bins; ++t) {
        const int off = t * cfg.hop;
        for (int i = 0; i < cfg.window; ++i) buf[i] = cdouble(x[off + i] * w[i], 0.0);
        fft::transform(buf);
        for (int f = 0; f < sp.freq_bins; ++f) sp.at(f, t) = std::abs(buf[f]);
    }
    return sp;
}

/// Per-axis STFT magnitudes of the gesture-band signal, jointly min-max
/// normalized to [0,1] across all three axes.
struct SpectrogramTriplet {
    std::array<Spectrogram, 3> axis;  // X, Y, Z
    StftConfig stft;
    double norm_min = 0, norm_max = 1;

    int freq_bins() const { return axis[0].freq_bins; }
    int time_bins() const { return axis[0].time_bins; }
};

inline SpectrogramTriplet spectrogram_triplet(const ImuTrace& trace, const StftConfig& cfg = {},
                                              const GestureBand& band = {}) {
    SpectrogramTriplet trip;
    trip.stft = cfg;
    const std::vector<double>* axes[3] = {&trace.ax, &trace.ay, &trace.az};
    for (int a = 0; a < 3; ++a) trip.axis[a] = stft_magnitude(gesture_band(*axes[a], band), cfg);

    double lo = trip.axis[0].v[0], hi = lo;
    for (const auto& sp : trip.axis)
        for (double x : sp.v) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    trip.norm_min = lo;
    trip.norm_max = hi;
    const double scale = hi > lo ? 1.0 / (hi - lo) : 0.0;
    for (auto& sp : trip.axis)
        for (auto& x : sp.v) x = (x - lo) * scale;
    return trip;
}

/// Plain-CSV import: header "t,ax,ay,az", one row per sample; the rate is
/// inferred from the time column.
inline ImuTrace import_imu_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open IMU CSV: " + path);
    std::string line;
    if (!std::getline(f, line)) throw FormatError("empty IMU CSV " + path, 0);
    // Tolerate whitespace and \r in the header.
    std::string head;
    for (char c : line)
        if (!std::isspace(static_cast<unsigned char>(c))) head += c;
    if (head != "t,ax,ay,az")
        throw FormatError("IMU CSV header must be 't,ax,ay,az', got '" + line + "'", 0);

    std::vector<double> t;
    ImuTrace out;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::istringstream ss(line);
        double vals[4];
        char comma;
        for (int i = 0; i < 4; ++i) {
            if (!(ss >> vals[i])) throw FormatError("bad IMU CSV row at line " + std::to_string(lineno), lineno);
            if (i < 3 && !(ss >> comma)) throw FormatError("bad IMU CSV row at line " + std::to_string(lineno), lineno);
        }
        t.push_back(vals[0]);
        out.ax.push_back(vals[1]);
        out.ay.push_back(vals[2]);
        out.az.push_back(vals[3]);
    }
    require(t.size() >= 2, "IMU CSV needs at least 2 samples");
    const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    require(dt > 0, "IMU CSV time column must increase");
    out.sample_rate = 1.0 / dt;
    return out;
}

}  // namespace mmbridge::imu
