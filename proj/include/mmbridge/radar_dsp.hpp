#pragma once

#include <algorithm>
#include <complex>
#include <vector>

#include "mmbridge/common.hpp"
#include "mmbridge/fft.hpp"
#include "mmbridge/fmcw.hpp"
#include "mmbridge/types.hpp"

namespace mmbridge::dsp {

/// One frame of complex IF data, [chirps x samples] row-major.
struct Frame {
    int chirps = 0;
    int samples = 0;
    std::vector<cdouble> v;

    Frame() = default;
    Frame(int ch, int sa) : chirps(ch), samples(sa), v(static_cast<std::size_t>(ch) * sa) {}

    cdouble& at(int c, int s) { return v[static_cast<std::size_t>(c) * samples + s]; }
    cdouble at(int c, int s) const { return v[static_cast<std::size_t>(c) * samples + s]; }
};

inline Frame extract_frame(const fmcw::RadarCube& cube, int frame) {
    Frame f(cube.cfg.chirps_per_frame, cube.cfg.adc_samples);
    for (int c = 0; c < f.chirps; ++c)
        for (int s = 0; s < f.samples; ++s) f.at(c, s) = cdouble(cube.at(frame, c, s));
    return f;
}

/// Subtract the per-sample mean over chirps (the frame's static noise
/// vector). Output columns have exactly zero mean up to round-off.
inline Frame remove_static_clutter(const Frame& frame) {
    require(frame.chirps >= 2, "clutter removal needs at least 2 chirps");
    Frame out(frame.chirps, frame.samples);
    for (int s = 0; s < frame.samples; ++s) {
        cdouble mean(0, 0);
        for (int c = 0; c < frame.chirps; ++c) mean += frame.at(c, s);
        mean /= static_cast<double>(frame.chirps);
        for (int c = 0; c < frame.chirps; ++c) out.at(c, s) = frame.at(c, s) - mean;
    }
    return out;
}

/// Doppler x range magnitude map for one frame, with bin scales.
struct RangeDopplerMap {
    int doppler_bins = 0;
    int range_bins = 0;
    std::vector<double> v;        // [doppler][range]
    double meters_per_bin = 0;
    double mps_per_bin = 0;

    double& at(int d, int r) { return v[static_cast<std::size_t>(d) * range_bins + r]; }
    double at(int d, int r) const { return v[static_cast<std::size_t>(d) * range_bins + r]; }
    int zero_doppler_row() const { return doppler_bins / 2; }
};

struct DspConfig {
    bool window_range = true;     // Hann on fast time
    bool window_doppler = true;   // Hann on slow time
    int range_gate_lo = 0;        // inclusive; heatmap range collapse
    int range_gate_hi = -1;       // exclusive; -1 = all bins
};

namespace detail {

inline std::vector<double> hann(int n) {
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
    return w;
}

}  // namespace detail

/// Range FFT along fast time, Doppler FFT along slow time, FFT-shift so zero
/// velocity sits at the center row; magnitude output.
inline RangeDopplerMap range_doppler_map(const Frame& frame, const fmcw::ChirpConfig& cfg,
                                         const DspConfig& dsp = {}) {
    require(frame.chirps == cfg.chirps_per_frame && frame.samples == cfg.adc_samples,
            "frame dims do not match chirp config");
    const int nc = frame.chirps, ns = frame.samples;

    std::vector<std::vector<cdouble>> range_fft(nc);
    const auto wr = detail::hann(ns);
    for (int c = 0; c < nc; ++c) {
        std::vector<cdouble> row(ns);
        for (int s = 0; s < ns; ++s) row[s] = dsp.window_range ? frame.at(c, s) * wr[s] : frame.at(c, s);
        fft::transform(row);
        range_fft[c] = std::move(row);
    }

    RangeDopplerMap rdm;
    rdm.doppler_bins = nc;
    rdm.range_bins = ns;
    rdm.v.assign(static_cast<std::size_t>(nc) * ns, 0.0);
    rdm.meters_per_bin = kSpeedOfLight * cfg.adc_rate / (2.0 * cfg.slope * ns);
    rdm.mps_per_bin = cfg.wavelength() / (2.0 * nc * cfg.chirp_period());

    const auto wd = detail::hann(nc);
    const int shift = nc / 2;
    std::vector<cdouble> col(nc);
    for (int s = 0; s < ns; ++s) {
        for (int c = 0; c < nc; ++c) col[c] = dsp.window_doppler ? range_fft[c][s] * wd[c] : range_fft[c][s];
        fft::transform(col);
        for (int c = 0; c < nc; ++c) {
            const int row = (c + shift) % nc;  // fft-shift: zero Doppler at nc/2
            rdm.at(row, s) = std::abs(col[c]);
        }
    }
    return rdm;
}

/// Collapse each RDM's range axis (max per Doppler bin, optionally gated),
/// stack frames as rows, and min-max normalize the whole map to [0,1].
inline Heatmap heatmap_from_rdms(const std::vector<RangeDopplerMap>& rdms,
                                 const DspConfig& dsp = {}) {
    require(!rdms.empty(), "heatmap needs at least one RDM");
    const int nd = rdms[0].doppler_bins, nr = rdms[0].range_bins;
    for (const auto& r : rdms)
        require(r.doppler_bins == nd && r.range_bins == nr, "RDM shape mismatch");
    const int lo = std::clamp(dsp.range_gate_lo, 0, nr);
    const int hi = dsp.range_gate_hi < 0 ? nr : std::clamp(dsp.range_gate_hi, lo + 1, nr);

    Heatmap h(static_cast<int>(rdms.size()), nd);
    for (std::size_t f = 0; f < rdms.size(); ++f)
        for (int d = 0; d < nd; ++d) {
            double best = 0;
            for (int r = lo; r < hi; ++r) best = std::max(best, rdms[f].at(d, r));
            h.at(static_cast<int>(f), d) = static_cast<float>(best);
        }
    minmax_normalize(h);
    return h;
}

/// Full cube -> time-velocity heatmap pipeline.
inline Heatmap cube_to_heatmap(const fmcw::RadarCube& cube, const DspConfig& dsp = {}) {
    std::vector<RangeDopplerMap> rdms;
    rdms.reserve(cube.cfg.frames);
    for (int f = 0; f < cube.cfg.frames; ++f) {
        Frame fr = extract_frame(cube, f);
        rdms.push_back(range_doppler_map(remove_static_clutter(fr), cube.cfg, dsp));
    }
    return heatmap_from_rdms(rdms, dsp);
}

}  // namespace mmbridge::dsp
