#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmbridge/common.hpp"
#include "mmbridge/kinematics.hpp"
#include "mmbridge/rng.hpp"

namespace mmbridge::fmcw {

/// FMCW chirp parameters. Defaults mirror a 77 GHz single-chip radar:
/// 256 ADC samples, 255 chirps per frame, 100 us idle time; ADC rate and
/// slope chosen to respect Nyquist at desk ranges (~0.2 m range resolution).
struct ChirpConfig {
    double start_frequency = 77e9;   // Hz
    double slope = 30e12;            // Hz/s
    int adc_samples = 256;
    double adc_rate = 10e6;          // samples/s
    int chirps_per_frame = 255;
    double idle_time = 100e-6;       // s
    int frames = 32;
    double tx_amplitude = 1.0;

    double wavelength() const { return kSpeedOfLight / start_frequency; }
    double ramp_time() const { return adc_samples / adc_rate; }
    double chirp_period() const { return idle_time + ramp_time(); }
    double frame_period() const { return chirps_per_frame * chirp_period(); }
    /// Max unambiguous beat-frequency distance (anti-alias bound).
    double max_distance() const { return kSpeedOfLight * adc_rate / (4.0 * slope); }
};

inline void validate(const ChirpConfig& cfg) {
    require_config(cfg.start_frequency > 0, "start frequency must be positive");
    require_config(cfg.slope > 0, "chirp slope must be positive");
    require_config(cfg.adc_samples >= 2, "need at least 2 ADC samples");
    require_config(cfg.adc_rate > 0, "ADC rate must be positive");
    require_config(cfg.chirps_per_frame >= 2, "need at least 2 chirps per frame");
    require_config(cfg.idle_time >= 0, "idle time must be non-negative");
    require_config(cfg.frames >= 1, "need at least 1 frame");
}

enum class PathKind { Static, Dynamic };

struct ReflectorPath {
    PathKind kind = PathKind::Static;
    double path_loss = 1.0;        // alpha in (0,1]
    double amplitude = 1.0;        // A_i
    double initial_distance = 1.0; // l_i0, meters
    int segment = 0;               // bound trace segment (dynamic only)
};

struct SceneConfig {
    std::vector<ReflectorPath> static_paths;
    std::vector<ReflectorPath> dynamic_paths;
    std::optional<double> noise_snr_db;  // none = noiseless
    double static_dominance = 5.0;       // |H_0| / sum|A_i| used by make_scene
};

inline void validate(const SceneConfig& scene) {
    for (const auto& p : scene.static_paths) {
        require_config(p.path_loss > 0 && p.path_loss <= 1.0, "path loss must be in (0,1]");
        require_config(p.initial_distance > 0, "initial distance must be positive");
    }
    for (const auto& p : scene.dynamic_paths) {
        require_config(p.path_loss > 0 && p.path_loss <= 1.0, "path loss must be in (0,1]");
    }
}

/// One dynamic path per trace segment (amplitude = RCS weight) plus a single
/// static path whose amplitude realizes the requested static dominance.
inline SceneConfig make_scene(const kin::KinematicTrace& trace, double static_dominance,
                              std::optional<double> noise_snr_db = std::nullopt,
                              double static_distance = 2.0) {
    SceneConfig scene;
    scene.static_dominance = static_dominance;
    scene.noise_snr_db = noise_snr_db;
    double amp_sum = 0;
    for (int s = 0; s < trace.segments(); ++s) {
        ReflectorPath p;
        p.kind = PathKind::Dynamic;
        p.amplitude = trace.rcs_weight[s];
        p.segment = s;
        p.initial_distance = 0;  // filled from the trace at synthesis time
        scene.dynamic_paths.push_back(p);
        amp_sum += p.amplitude;
    }
    ReflectorPath st;
    st.kind = PathKind::Static;
    st.amplitude = static_dominance * amp_sum;
    st.initial_distance = static_distance;
    scene.static_paths.push_back(st);
    return scene;
}

struct Reflector {
    double distance;   // m
    double amplitude;  // A_i
    double path_loss;  // alpha
};

/// Complex samples, [frames x chirps x adc_samples], row-major.
struct RadarCube {
    ChirpConfig cfg;
    std::vector<std::complex<float>> v;

    std::complex<float>& at(int frame, int chirp, int sample) {
        return v[(static_cast<std::size_t>(frame) * cfg.chirps_per_frame + chirp) * cfg.adc_samples + sample];
    }
    std::complex<float> at(int frame, int chirp, int sample) const {
        return v[(static_cast<std::size_t>(frame) * cfg.chirps_per_frame + chirp) * cfg.adc_samples + sample];
    }
};

/// Analytic complex baseband IF of one chirp: each reflector contributes a
/// tone at the beat frequency 2*d*slope/c with phase 2*pi*f_c*tau, tau = 2d/c,
/// scaled by path_loss * amplitude * tx_amplitude.
inline std::vector<cdouble> if_chirp(const ChirpConfig& cfg, const std::vector<Reflector>& reflectors,
                                     double /*chirp_start_time*/ = 0.0) {
    validate(cfg);
    std::vector<cdouble> out(cfg.adc_samples, cdouble(0, 0));
    for (const auto& r : reflectors) {
        require_config(r.distance > 0, "reflector distance must be positive");
        const double beat = 2.0 * r.distance * cfg.slope / kSpeedOfLight;
        require_config(beat < 0.5 * cfg.adc_rate,
                       "beat frequency " + std::to_string(beat) + " Hz aliases at ADC rate " +
                           std::to_string(cfg.adc_rate));
        const double tau = 2.0 * r.distance / kSpeedOfLight;
        const double phase0 = 2.0 * kPi * cfg.start_frequency * tau;
        const double scale = r.path_loss * r.amplitude * cfg.tx_amplitude;
        const double dphi = 2.0 * kPi * beat / cfg.adc_rate;
        for (int n = 0; n < cfg.adc_samples; ++n) {
            const double ph = phase0 + dphi * n;
            out[n] += scale * cdouble(std::cos(ph), std::sin(ph));
        }
    }
    return out;
}

namespace detail {

inline std::vector<Reflector> reflectors_at(const SceneConfig& scene,
                                            const kin::KinematicTrace& trace,
                                            const kin::RadarPose& pose, double t) {
    std::vector<Reflector> out;
    out.reserve(scene.static_paths.size() + scene.dynamic_paths.size());
    for (const auto& p : scene.static_paths)
        out.push_back({p.initial_distance, p.amplitude, p.path_loss});
    if (!scene.dynamic_paths.empty()) {
        auto samples = kin::sample_kinematics(trace, pose, t);
        for (const auto& p : scene.dynamic_paths) {
            require_config(p.segment >= 0 && p.segment < trace.segments(),
                           "dynamic path bound to missing segment");
            out.push_back({samples[p.segment].radial_distance, p.amplitude, p.path_loss});
        }
    }
    return out;
}

}  // namespace detail

/// Simulate the full cube. Dynamic path distances are read from the trace at
/// each chirp's start time (stop-and-hop), so the phase follows the actual
/// integrated displacement. Optional complex AWGN at the configured SNR;
/// noise is drawn from per-frame derived streams.
inline RadarCube synthesize_cube(const ChirpConfig& cfg, const SceneConfig& scene,
                                 const kin::KinematicTrace& trace, const kin::RadarPose& pose,
                                 std::uint64_t seed) {
    validate(cfg);
    validate(scene);
    const double needed = cfg.frames * cfg.frame_period();
    if (!scene.dynamic_paths.empty() && trace.duration + 0.5 / trace.sample_rate < needed)
        throw ConfigError("trace too short: covers " + std::to_string(trace.duration) +
                          " s, cube needs " + std::to_string(needed) + " s");

    RadarCube cube;
    cube.cfg = cfg;
    cube.v.assign(static_cast<std::size_t>(cfg.frames) * cfg.chirps_per_frame * cfg.adc_samples,
                  std::complex<float>(0, 0));

    double signal_power = 0;
    std::size_t idx = 0;
    for (int f = 0; f < cfg.frames; ++f) {
        for (int k = 0; k < cfg.chirps_per_frame; ++k) {
            const double t = (static_cast<double>(f) * cfg.chirps_per_frame + k) * cfg.chirp_period();
            const double t_clamped = std::min(t, trace.duration);
            auto reflectors = detail::reflectors_at(scene, trace, pose, t_clamped);
            auto chirp = if_chirp(cfg, reflectors, t);
            for (int n = 0; n < cfg.adc_samples; ++n, ++idx) {
                signal_power += std::norm(chirp[n]);
                cube.v[idx] = std::complex<float>(static_cast<float>(chirp[n].real()),
                                                  static_cast<float>(chirp[n].imag()));
            }
        }
    }

    if (scene.noise_snr_db) {
        const double mean_power = signal_power / static_cast<double>(cube.v.size());
        const double noise_power = mean_power / std::pow(10.0, *scene.noise_snr_db / 10.0);
        const double sigma = std::sqrt(noise_power / 2.0);
        const std::size_t frame_len = static_cast<std::size_t>(cfg.chirps_per_frame) * cfg.adc_samples;
        for (int f = 0; f < cfg.frames; ++f) {
            Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(f)));
            for (std::size_t i = 0; i < frame_len; ++i) {
                auto& s = cube.v[static_cast<std::size_t>(f) * frame_len + i];
                s += std::complex<float>(static_cast<float>(sigma * rng.gaussian()),
                                         static_cast<float>(sigma * rng.gaussian()));
            }
        }
    }
    return cube;
}

/// Magnitude square of the baseband composite, sampled once per chirp (at the
/// first ADC sample, where every path's phase is the pure round-trip term).
inline std::vector<double> magnitude_square_baseband(const RadarCube& cube) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(cube.cfg.frames) * cube.cfg.chirps_per_frame);
    for (int f = 0; f < cube.cfg.frames; ++f)
        for (int k = 0; k < cube.cfg.chirps_per_frame; ++k)
            out.push_back(std::norm(cdouble(cube.at(f, k, 0))));
    return out;
}

/// Test-support expansion of |M|^2 as DC + per-path cosine terms, evaluated
/// from scene ground truth. Valid when the static return dominates; the
/// dropped cross-dynamic terms are O((sum A_i / |H_0|)^2).
struct BasebandExpansion {
    double dc = 0;                       // D = |H_0|^2 + sum |A_i|^2
    double static_phase = 0;             // phi_s
    std::vector<double> beat_amplitudes; // B_i = 2 |H_0| * alpha_i A_i
    std::vector<double> series;          // D + sum_i B_i cos(theta_i(t) - phi_s), per chirp
};

inline BasebandExpansion eq5_expansion(const ChirpConfig& cfg, const SceneConfig& scene,
                                       const kin::KinematicTrace& trace,
                                       const kin::RadarPose& pose) {
    validate(cfg);
    validate(scene);
    require_config(!scene.static_paths.empty(),
                   "baseband expansion requires at least one static path");

    cdouble h0(0, 0);
    for (const auto& p : scene.static_paths) {
        const double tau = 2.0 * p.initial_distance / kSpeedOfLight;
        const double ph = 2.0 * kPi * cfg.start_frequency * tau;
        h0 += p.path_loss * p.amplitude * cfg.tx_amplitude * cdouble(std::cos(ph), std::sin(ph));
    }

    BasebandExpansion ex;
    ex.static_phase = std::arg(h0);
    ex.dc = std::norm(h0);
    for (const auto& p : scene.dynamic_paths) {
        const double a = p.path_loss * p.amplitude * cfg.tx_amplitude;
        ex.dc += a * a;
        ex.beat_amplitudes.push_back(2.0 * std::abs(h0) * a);
    }

    const std::size_t chirps = static_cast<std::size_t>(cfg.frames) * cfg.chirps_per_frame;
    ex.series.resize(chirps);
    for (std::size_t c = 0; c < chirps; ++c) {
        const double t = std::min(static_cast<double>(c) * cfg.chirp_period(), trace.duration);
        double v = ex.dc;
        if (!scene.dynamic_paths.empty()) {
            auto samples = kin::sample_kinematics(trace, pose, t);
            for (std::size_t i = 0; i < scene.dynamic_paths.size(); ++i) {
                const double d = samples[scene.dynamic_paths[i].segment].radial_distance;
                const double theta = 2.0 * kPi * cfg.start_frequency * (2.0 * d / kSpeedOfLight);
                v += ex.beat_amplitudes[i] * std::cos(theta - ex.static_phase);
            }
        }
        ex.series[c] = v;
    }
    return ex;
}

}  // namespace mmbridge::fmcw
