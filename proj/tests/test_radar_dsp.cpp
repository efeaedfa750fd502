#include <catch2/catch_amalgamated.hpp>

#include "mmbridge/radar_dsp.hpp"
#include "mmbridge/rng.hpp"
#include "oracles.hpp"

using namespace mmbridge;
using namespace mmbridge::dsp;

namespace {

fmcw::ChirpConfig toy_config(int frames) {
    fmcw::ChirpConfig cfg;
    cfg.adc_samples = 64;
    cfg.adc_rate = 2e6;
    cfg.chirps_per_frame = 64;
    cfg.idle_time = 280.75e-6;
    cfg.frames = frames;
    return cfg;
}

kin::KinematicTrace radial_trace(double d0, double v, double duration, double accel = 0.0) {
    const int n = static_cast<int>(std::lround(duration * 1000.0)) + 1;
    kin::KinematicTrace t;
    t.sample_rate = 1000;
    t.duration = duration;
    t.segment_names = {"hand"};
    t.rcs_weight = {1.0};
    t.position.resize(1);
    t.acceleration.assign(1, std::vector<Vec3>(n, Vec3{accel, 0, 0}));
    for (int i = 0; i < n; ++i) {
        const double tt = i / 1000.0;
        t.position[0].push_back(Vec3{d0 + v * tt + 0.5 * accel * tt * tt, 0, 0});
    }
    return t;
}

kin::RadarPose origin_pose() {
    kin::RadarPose p;
    p.origin = {0, 0, 0};
    p.boresight = {1, 0, 0};
    return p;
}

}  // namespace

TEST_CASE("clutter removal zeroes identical chirps") {
    Frame f(4, 8);
    Rng rng(5);
    for (int s = 0; s < 8; ++s) {
        const cdouble v(rng.uniform(-1, 1), rng.uniform(-1, 1));
        for (int c = 0; c < 4; ++c) f.at(c, s) = v;
    }
    auto out = remove_static_clutter(f);
    for (const auto& v : out.v) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("clutter removal leaves exactly zero column means") {
    Frame f(16, 12);
    Rng rng(6);
    double input_mag = 0;
    for (auto& v : f.v) {
        v = cdouble(rng.uniform(-1, 1), rng.uniform(-1, 1));
        input_mag = std::max(input_mag, std::abs(v));
    }
    auto out = remove_static_clutter(f);
    for (int s = 0; s < f.samples; ++s) {
        cdouble mean(0, 0);
        for (int c = 0; c < f.chirps; ++c) mean += out.at(c, s);
        mean /= static_cast<double>(f.chirps);
        CHECK(std::abs(mean) <= 1e-10 * input_mag);
    }
}

TEST_CASE("clutter removal on a 2-chirp alternating target keeps its energy") {
    // Static level 3 plus a +-1 alternating dynamic component: the mean is the
    // static level, so removal keeps the alternation exactly (100% of dynamic
    // energy for this toy; the general bound is 50-100%).
    Frame f(2, 4);
    for (int s = 0; s < 4; ++s) {
        f.at(0, s) = cdouble(3.0 + 1.0, 0);
        f.at(1, s) = cdouble(3.0 - 1.0, 0);
    }
    auto out = remove_static_clutter(f);
    double energy = 0;
    for (const auto& v : out.v) energy += std::norm(v);
    const double dynamic_energy = 8.0;  // 8 samples of magnitude 1
    CHECK(energy >= 0.5 * dynamic_energy);
    CHECK(energy <= 1.0 * dynamic_energy + 1e-12);
}

TEST_CASE("clutter removal needs at least two chirps") {
    Frame f(1, 4);
    CHECK_THROWS_AS(remove_static_clutter(f), std::invalid_argument);
}

TEST_CASE("RDM of a clutter-removed static scene is zero") {
    auto cfg = toy_config(1);
    fmcw::SceneConfig scene;
    scene.static_paths.push_back({fmcw::PathKind::Static, 1.0, 1.0, 2.0, 0});
    auto trace = radial_trace(1.0, 0.0, cfg.frames * cfg.frame_period() + 0.01);
    auto cube = fmcw::synthesize_cube(cfg, scene, trace, origin_pose(), 1);
    auto rdm = range_doppler_map(remove_static_clutter(extract_frame(cube, 0)), cfg);
    for (double v : rdm.v) CHECK(v <= 1e-6);
}

TEST_CASE("RDM peak sits at the oracle range and Doppler bins") {
    // Table-style config: 256 samples, 255 chirps, 77 GHz; d = 3 m, v = 1 m/s.
    fmcw::ChirpConfig cfg;
    cfg.frames = 1;
    const double d = 3.0, v = 1.0;
    auto trace = radial_trace(d, v, cfg.frames * cfg.frame_period() + 0.01);
    fmcw::SceneConfig scene;
    scene.dynamic_paths.push_back({fmcw::PathKind::Dynamic, 1.0, 1.0, 0.0, 0});
    auto cube = fmcw::synthesize_cube(cfg, scene, trace, origin_pose(), 1);

    DspConfig dsp;
    dsp.window_range = dsp.window_doppler = false;  // oracle mode
    auto rdm = range_doppler_map(extract_frame(cube, 0), cfg, dsp);

    int best_d = 0, best_r = 0;
    double best = -1;
    for (int dd = 0; dd < rdm.doppler_bins; ++dd)
        for (int rr = 0; rr < rdm.range_bins; ++rr)
            if (rdm.at(dd, rr) > best) {
                best = rdm.at(dd, rr);
                best_d = dd;
                best_r = rr;
            }

    const int range_bin = oracles::expected_range_bin(d, cfg.slope, cfg.adc_rate, cfg.adc_samples);
    const int dop_off =
        oracles::expected_doppler_offset(v, cfg.wavelength(), cfg.chirps_per_frame, cfg.chirp_period());
    CHECK(range_bin == 15);
    CHECK(dop_off == 16);
    CHECK(std::abs(best_r - range_bin) <= 1);
    CHECK(std::abs(best_d - (rdm.zero_doppler_row() + dop_off)) <= 1);
}

TEST_CASE("RDM scales linearly with its input") {
    Frame f(8, 8);
    Rng rng(9);
    for (auto& v : f.v) v = cdouble(rng.uniform(-1, 1), rng.uniform(-1, 1));
    Frame g = f;
    for (auto& v : g.v) v *= 3.0;
    fmcw::ChirpConfig cfg = toy_config(1);
    cfg.adc_samples = 8;
    cfg.chirps_per_frame = 8;
    auto ra = range_doppler_map(f, cfg);
    auto rb = range_doppler_map(g, cfg);
    for (std::size_t i = 0; i < ra.v.size(); ++i)
        CHECK(rb.v[i] == Catch::Approx(3.0 * ra.v[i]).margin(1e-12));
}

TEST_CASE("heatmap of all-zero RDMs is all zero with a degenerate norm record") {
    RangeDopplerMap z;
    z.doppler_bins = 4;
    z.range_bins = 4;
    z.v.assign(16, 0.0);
    auto h = heatmap_from_rdms({z, z, z});
    CHECK(h.rows == 3);
    CHECK(h.cols == 4);
    for (float v : h.v) CHECK(v == 0.f);
    CHECK(h.norm_min == 0.f);
    CHECK(h.norm_max == 0.f);
}

TEST_CASE("heatmap of one frame is that frame's normalized Doppler profile") {
    RangeDopplerMap r;
    r.doppler_bins = 4;
    r.range_bins = 3;
    r.v = {0, 1, 2,
           5, 3, 1,
           0, 0, 0,
           2, 9, 4};
    auto h = heatmap_from_rdms({r});
    REQUIRE(h.rows == 1);
    REQUIRE(h.cols == 4);
    // Per-Doppler max over range: 2, 5, 0, 9 -> normalized by (0, 9).
    CHECK(h.at(0, 0) == Catch::Approx(2.0 / 9.0));
    CHECK(h.at(0, 1) == Catch::Approx(5.0 / 9.0));
    CHECK(h.at(0, 2) == 0.f);
    CHECK(h.at(0, 3) == 1.f);
}

TEST_CASE("heatmap rejects an empty sequence") {
    CHECK_THROWS_AS(heatmap_from_rdms({}), std::invalid_argument);
}

TEST_CASE("linearly sweeping velocity traces a monotone ridge matching per-frame oracles") {
    auto cfg = toy_config(12);
    const double duration = cfg.frames * cfg.frame_period() + 0.01;
    const double a = 2.2;  // m/s^2: v sweeps 0 -> ~1.8 m/s
    auto trace = radial_trace(1.0, 0.05, duration, a);
    fmcw::SceneConfig scene;
    scene.dynamic_paths.push_back({fmcw::PathKind::Dynamic, 1.0, 1.0, 0.0, 0});
    auto cube = fmcw::synthesize_cube(cfg, scene, trace, origin_pose(), 3);

    DspConfig dsp;
    dsp.window_range = dsp.window_doppler = false;
    std::vector<RangeDopplerMap> rdms;
    for (int f = 0; f < cfg.frames; ++f)
        rdms.push_back(range_doppler_map(remove_static_clutter(extract_frame(cube, f)), cfg, dsp));
    auto h = heatmap_from_rdms(rdms, dsp);

    int prev = -1;
    for (int f = 0; f < h.rows; ++f) {
        int best = 0;
        for (int c = 1; c < h.cols; ++c)
            if (h.at(f, c) > h.at(f, best)) best = c;
        // Per-frame oracle: velocity at the frame center.
        const double t_mid = (f + 0.5) * cfg.frame_period();
        const double v_mid = 0.05 + a * t_mid;
        const int expected = h.cols / 2 + oracles::expected_doppler_offset(
                                              v_mid, cfg.wavelength(), cfg.chirps_per_frame,
                                              cfg.chirp_period());
        CHECK(std::abs(best - expected) <= 1);
        CHECK(best >= prev);  // monotone ridge
        prev = best;
    }
}

TEST_CASE("heatmap normalization covers [0,1] exactly") {
    auto cfg = toy_config(4);
    auto trace = radial_trace(1.2, 0.7, cfg.frames * cfg.frame_period() + 0.01);
    auto scene = fmcw::make_scene(trace, 3.0, 25.0);
    auto cube = fmcw::synthesize_cube(cfg, scene, trace, origin_pose(), 11);
    auto h = cube_to_heatmap(cube);
    float lo = 1e9f, hi = -1e9f;
    for (float v : h.v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo == 0.f);
    CHECK(hi == 1.f);
    for (float v : h.v) {
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
    }
}

TEST_CASE("dsp pipeline is deterministic") {
    auto cfg = toy_config(3);
    auto trace = radial_trace(1.2, 0.6, cfg.frames * cfg.frame_period() + 0.01);
    auto scene = fmcw::make_scene(trace, 3.0, 20.0);
    auto cube = fmcw::synthesize_cube(cfg, scene, trace, origin_pose(), 13);
    auto h1 = cube_to_heatmap(cube);
    auto h2 = cube_to_heatmap(cube);
    REQUIRE(h1.v.size() == h2.v.size());
    for (std::size_t i = 0; i < h1.v.size(); ++i) CHECK(h1.v[i] == h2.v[i]);
}
