#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmbridge/common.hpp"
#include "mmbridge/enhance.hpp"
#include "mmbridge/fmcw.hpp"
#include "mmbridge/image.hpp"
#include "mmbridge/imu.hpp"
#include "mmbridge/irad.hpp"
#include "mmbridge/kinematics.hpp"
#include "mmbridge/nn/tensor.hpp"
#include "mmbridge/radar_dsp.hpp"
#include "mmbridge/rng.hpp"

// Paired-dataset generation: one kinematic trace per sample drives both the
// radar cube -> time-velocity heatmap -> enhancement chain and the IMU ->
// spectrogram-triplet chain, so the two modalities stay physically aligned.
namespace mmbridge::data {

struct GenerationConfig {
    std::vector<kin::Gesture> classes{kin::Gesture::Push, kin::Gesture::FrontRaise,
                                      kin::Gesture::VerticalRotationCw};
    int per_class = 10;
    double duration = 1.3;       // seconds; must cover the radar frames
    double amplitude = 0.3;      // meters
    double jitter = 0.5;
    std::uint64_t master_seed = 1;

    fmcw::ChirpConfig chirp = desk_chirp();
    double static_dominance = 5.0;
    std::optional<double> noise_snr_db = 25.0;
    kin::RadarPose pose;
    dsp::DspConfig dsp;

    double imu_noise_sigma = 0.05;
    double imu_rate = 100.0;
    imu::StftConfig stft;
    imu::GestureBand band;

    mwhe::EnhancementConfig enhancement;
    int heat_rows = 64;
    int heat_cols = 64;
    bool store_cubes = false;

    /// Desk-scale radar: 64 chirps x 64 samples x 64 frames, ~20 ms frames,
    /// so a 1.3 s gesture fills a native 64x64 time-velocity map.
    static fmcw::ChirpConfig desk_chirp() {
        fmcw::ChirpConfig c;
        c.adc_samples = 64;
        c.adc_rate = 2e6;
        c.chirps_per_frame = 64;
        c.idle_time = 280.75e-6;
        c.frames = 64;
        return c;
    }
};

struct ManifestEntry {
    std::string id;
    std::string gesture;
    int class_index = 0;
    std::uint64_t seed = 0;
    std::string split;  // "", "train", "val", "test"
    std::map<std::string, std::string> files;  // modality -> relative path
};

struct Manifest {
    std::uint64_t master_seed = 0;
    std::string config_digest;
    std::vector<std::string> classes;
    std::vector<ManifestEntry> entries;
};

inline std::uint64_t sample_seed(std::uint64_t master, int class_index, int sample_index) {
    return Rng::derive(master, (static_cast<std::uint64_t>(class_index) << 32) |
                                   static_cast<std::uint64_t>(sample_index));
}

struct SampleArtifacts {
    imu::ImuTrace imu_trace;
    imu::SpectrogramTriplet triplet;
    Heatmap enhanced;        // heat_rows x heat_cols, in [0,1]
    BinaryMap mask;
    fmcw::RadarCube cube;    // populated only when requested
};

/// Run the full per-sample pipeline for one (class, index) slot.
inline SampleArtifacts generate_sample(const GenerationConfig& cfg, int class_index,
                                       int sample_index, bool keep_cube) {
    require(class_index >= 0 && class_index < static_cast<int>(cfg.classes.size()),
            "generate_sample: class index out of range");
    const std::uint64_t seed = sample_seed(cfg.master_seed, class_index, sample_index);

    kin::GestureSpec spec;
    spec.gesture_class = cfg.classes[static_cast<std::size_t>(class_index)];
    spec.duration = cfg.duration;
    spec.amplitude = cfg.amplitude;
    spec.jitter = cfg.jitter;
    spec.seed = seed;
    const auto trace = kin::make_gesture(spec);

    SampleArtifacts out;

    // Radar branch.
    auto scene = fmcw::make_scene(trace, cfg.static_dominance, cfg.noise_snr_db);
    auto cube = fmcw::synthesize_cube(cfg.chirp, scene, trace, cfg.pose, seed);
    Heatmap heatmap = dsp::cube_to_heatmap(cube, cfg.dsp);
    if (heatmap.rows != cfg.heat_rows || heatmap.cols != cfg.heat_cols) {
        heatmap = img::resize_bilinear(heatmap, cfg.heat_rows, cfg.heat_cols);
        minmax_normalize(heatmap);
    }
    auto enhanced = mwhe::enhance(heatmap, cfg.enhancement);
    out.enhanced = std::move(enhanced.enhanced);
    out.mask = std::move(enhanced.mask);
    if (keep_cube) out.cube = std::move(cube);

    // IMU branch.
    auto mount = imu::make_mount(trace, cfg.imu_noise_sigma);
    mount.sample_rate = cfg.imu_rate;
    out.imu_trace = imu::synthesize_imu(trace, mount, seed);
    out.triplet = imu::spectrogram_triplet(out.imu_trace, cfg.stft, cfg.band);
    return out;
}

/// Documented alignment check: both modalities must span the same duration.
inline void check_temporal_alignment(const GenerationConfig& cfg) {
    const double radar_span = cfg.chirp.frames * cfg.chirp.frame_period();
    require_config(cfg.duration + 1e-9 >= radar_span,
                   "gesture duration " + std::to_string(cfg.duration) +
                       " s does not cover the radar frames (" + std::to_string(radar_span) + " s)");
    const int imu_samples = static_cast<int>(cfg.duration * cfg.imu_rate);
    require_config(imu_samples >= cfg.stft.window,
                   "gesture too short for the configured STFT window");
}

inline std::string entry_id(const std::string& gesture, int sample_index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d", sample_index);
    return gesture + "_" + buf;
}

inline void save_manifest(const std::string& path, const Manifest& m) {
    nlohmann::ordered_json j;
    j["format"] = "mmbridge-dataset";
    j["version"] = 1;
    j["master_seed"] = m.master_seed;
    j["config_digest"] = m.config_digest;
    j["classes"] = m.classes;
    j["entries"] = nlohmann::ordered_json::array();
    for (const auto& e : m.entries) {
        nlohmann::ordered_json je;
        je["id"] = e.id;
        je["gesture"] = e.gesture;
        je["class_index"] = e.class_index;
        je["seed"] = e.seed;
        je["split"] = e.split;
        je["files"] = e.files;
        j["entries"].push_back(std::move(je));
    }
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write manifest: " + path);
    f << j.dump(2) << "\n";
}

inline Manifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read manifest: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest parse error in " + path + ": " + e.what(), 0);
    }
    Manifest m;
    m.master_seed = j.value("master_seed", 0ULL);
    m.config_digest = j.value("config_digest", "");
    m.classes = j.value("classes", std::vector<std::string>{});
    for (const auto& je : j.at("entries")) {
        ManifestEntry e;
        e.id = je.at("id");
        e.gesture = je.at("gesture");
        e.class_index = je.at("class_index");
        e.seed = je.at("seed");
        e.split = je.value("split", "");
        for (const auto& [k, v] : je.at("files").items()) e.files[k] = v;
        m.entries.push_back(std::move(e));
    }
    return m;
}

/// Generate the dataset tree:
///   root/manifest.json
///   root/samples/<id>/{imu.irad, spectrogram.irad, heatmap.irad, mask.irad[, cube.irad]}
inline Manifest generate_paired_dataset(const std::string& root, const GenerationConfig& cfg,
                                        const std::string& config_digest = "") {
    require(cfg.per_class >= 1, "per-class count must be >= 1");
    require(!cfg.classes.empty(), "need at least one gesture class");
    check_temporal_alignment(cfg);

    namespace fs = std::filesystem;
    fs::create_directories(fs::path(root) / "samples");

    Manifest manifest;
    manifest.master_seed = cfg.master_seed;
    manifest.config_digest = config_digest;
    for (auto g : cfg.classes) manifest.classes.emplace_back(kin::gesture_name(g));

    for (int c = 0; c < static_cast<int>(cfg.classes.size()); ++c) {
        for (int i = 0; i < cfg.per_class; ++i) {
            auto art = generate_sample(cfg, c, i, cfg.store_cubes);
            ManifestEntry e;
            e.id = entry_id(manifest.classes[static_cast<std::size_t>(c)], i);
            e.gesture = manifest.classes[static_cast<std::size_t>(c)];
            e.class_index = c;
            e.seed = sample_seed(cfg.master_seed, c, i);
            const fs::path dir = fs::path(root) / "samples" / e.id;
            fs::create_directories(dir);
            const std::string rel = "samples/" + e.id + "/";
            irad::write_imu((dir / "imu.irad").string(), art.imu_trace);
            e.files["imu"] = rel + "imu.irad";
            irad::write_spectrogram((dir / "spectrogram.irad").string(), art.triplet);
            e.files["spectrogram"] = rel + "spectrogram.irad";
            irad::write_heatmap((dir / "heatmap.irad").string(), art.enhanced);
            e.files["heatmap"] = rel + "heatmap.irad";
            irad::write_mask((dir / "mask.irad").string(), art.mask);
            e.files["mask"] = rel + "mask.irad";
            if (cfg.store_cubes) {
                irad::write_cube((dir / "cube.irad").string(), art.cube);
                e.files["cube"] = rel + "cube.irad";
            }
            manifest.entries.push_back(std::move(e));
        }
    }
    save_manifest((fs::path(root) / "manifest.json").string(), manifest);
    return manifest;
}

/// Stratified train/val/test assignment. Ratios must be non-negative and sum
/// to 1; each class needs at least as many samples as there are non-zero
/// ratio bins.
inline void split_manifest(Manifest& manifest, double train, double val, double test,
                           std::uint64_t seed) {
    require(train >= 0 && val >= 0 && test >= 0, "split ratios must be non-negative");
    require(std::abs(train + val + test - 1.0) <= 1e-9, "split ratios must sum to 1");
    int bins = 0;
    for (double r : {train, val, test}) bins += r > 0 ? 1 : 0;
    require(bins >= 1, "at least one split ratio must be positive");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i)
        by_class[manifest.entries[i].class_index].push_back(i);

    Rng rng(Rng::derive(seed, 0x59717));
    for (auto& [cls, idx] : by_class) {
        if (static_cast<int>(idx.size()) < bins)
            throw std::invalid_argument("class " + std::to_string(cls) + " has " +
                                        std::to_string(idx.size()) + " samples, fewer than " +
                                        std::to_string(bins) + " split bins");
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.below(i)]);
        const std::size_t n = idx.size();
        std::size_t n_train = static_cast<std::size_t>(train * static_cast<double>(n));
        std::size_t n_val = static_cast<std::size_t>(val * static_cast<double>(n));
        // Guarantee at least one sample in every active bin.
        if (train > 0 && n_train == 0) n_train = 1;
        if (val > 0 && n_val == 0) n_val = 1;
        if (test > 0 && n_train + n_val >= n) {
            if (n_val > 1) --n_val;
            else if (n_train > 1) --n_train;
        }
        for (std::size_t i = 0; i < n; ++i) {
            auto& e = manifest.entries[idx[i]];
            if (i < n_train) e.split = "train";
            else if (i < n_train + n_val) e.split = "val";
            else e.split = test > 0 ? "test" : (val > 0 ? "val" : "train");
        }
    }
}

/// Read one modality pair (triplet tensor, enhanced heatmap tensor) for a
/// manifest entry rooted at `root`.
struct LoadedPair {
    nn::Tensor<float> triplet;   // [3, freq, time]
    nn::Tensor<float> heatmap;   // [1, rows, cols]
    int label = 0;
};

inline LoadedPair load_pair(const std::string& root, const ManifestEntry& e) {
    namespace fs = std::filesystem;
    LoadedPair p;
    p.label = e.class_index;
    const auto trip = irad::read_spectrogram((fs::path(root) / e.files.at("spectrogram")).string());
    p.triplet = nn::Tensor<float>({3, trip.freq_bins(), trip.time_bins()});
    std::size_t k = 0;
    for (const auto& sp : trip.axis)
        for (double v : sp.v) p.triplet.v[k++] = static_cast<float>(v);
    const auto hm = irad::read_heatmap((fs::path(root) / e.files.at("heatmap")).string());
    p.heatmap = nn::Tensor<float>({1, hm.rows, hm.cols});
    std::copy(hm.v.begin(), hm.v.end(), p.heatmap.v.begin());
    return p;
}

}  // namespace mmbridge::data
