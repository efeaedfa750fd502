#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mmbridge/common.hpp"
#include "mmbridge/dataset.hpp"
#include "mmbridge/diffusion.hpp"
#include "mmbridge/transformer.hpp"

// Flat key = value configuration with dotted section prefixes. Every key has
// a default; unknown keys are rejected with their line number. The digest
// covers the fully resolved settings, so it changes iff an effective setting
// changes.
namespace mmbridge::cfg {

class Config {
public:
    Config() : values_(defaults()) {}

    static const std::map<std::string, std::string>& defaults() {
        static const std::map<std::string, std::string> d = {
            {"dataset.classes", "push,front_raise,vertical_rotation_cw"},
            {"dataset.per_class", "10"},
            {"dataset.duration", "1.3"},
            {"dataset.amplitude", "0.3"},
            {"dataset.jitter", "0.5"},
            {"dataset.noise_snr_db", "25"},
            {"dataset.static_dominance", "5"},
            {"dataset.imu_noise_sigma", "0.05"},
            {"dataset.heatmap_rows", "64"},
            {"dataset.heatmap_cols", "64"},
            {"dataset.store_cubes", "0"},
            {"dataset.split_train", "0.8"},
            {"dataset.split_val", "0.1"},
            {"dataset.split_test", "0.1"},

            {"radar.start_frequency", "77e9"},
            {"radar.slope", "30e12"},
            {"radar.adc_samples", "256"},
            {"radar.adc_rate", "10e6"},
            {"radar.chirps_per_frame", "255"},
            {"radar.idle_time", "100e-6"},
            {"radar.frames", "40"},
            {"radar.window_range", "1"},
            {"radar.window_doppler", "1"},
            {"radar.range_gate_lo", "0"},
            {"radar.range_gate_hi", "-1"},

            {"imu.sample_rate", "100"},
            {"imu.stft_window", "32"},
            {"imu.stft_hop", "4"},
            {"imu.band_level_lo", "2"},
            {"imu.band_level_hi", "4"},

            {"enhancement.blur_sigma", "1.0"},
            {"enhancement.blur_kernel", "5"},
            {"enhancement.kmeans_max_iters", "100"},

            {"diffusion.steps", "200"},
            {"diffusion.s_max", "1.0"},
            {"diffusion.batch", "8"},
            {"diffusion.lr", "0.001"},
            {"diffusion.weight_decay", "0.001"},
            {"diffusion.epochs", "40"},
            {"diffusion.channels", "4"},
            {"diffusion.elements", "9"},
            {"diffusion.clamp_radius", "4"},
            {"diffusion.unet_base", "8"},
            {"diffusion.temb_dim", "16"},

            {"classifier.patch", "8"},
            {"classifier.embed_dim", "64"},
            {"classifier.layers", "2"},
            {"classifier.chunk", "8"},
            {"classifier.epochs", "1000"},
            {"classifier.lr", "0.001"},
            {"classifier.weight_decay", "0.001"},
            {"classifier.batch", "16"},
        };
        return d;
    }

    void set(const std::string& key, const std::string& value, int line = -1) {
        if (!values_.count(key)) {
            std::string msg = "unknown config key '" + key + "'";
            if (line >= 0) msg += " at line " + std::to_string(line);
            throw ConfigError(msg);
        }
        values_[key] = value;
    }

    /// "key = value" assignment, as used by --set options.
    void set_assignment(const std::string& assignment, int line = -1) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key=value, got '" + assignment + "'" +
                              (line >= 0 ? " at line " + std::to_string(line) : ""));
        set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), line);
    }

    void load_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config file: " + path);
        std::string line;
        int lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.resize(hash);
            const std::string t = trim(line);
            if (t.empty()) continue;
            set_assignment(t, lineno);
        }
    }

    const std::string& get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
        return it->second;
    }

    double get_double(const std::string& key) const {
        const auto& s = get(key);
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "' is not a number: '" + s + "'");
        }
    }

    int get_int(const std::string& key) const {
        const double v = get_double(key);
        const int i = static_cast<int>(std::llround(v));
        if (std::abs(v - i) > 1e-9)
            throw ConfigError("config key '" + key + "' is not an integer: '" + get(key) + "'");
        return i;
    }

    bool get_bool(const std::string& key) const { return get_int(key) != 0; }

    /// FNV-1a over the sorted resolved "key=value" lines.
    std::uint64_t digest() const {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        auto mix = [&h](const std::string& s) {
            for (unsigned char c : s) {
                h ^= c;
                h *= 0x100000001B3ULL;
            }
        };
        for (const auto& [k, v] : values_) {
            mix(k);
            mix("=");
            mix(v);
            mix("\n");
        }
        return h;
    }

    std::string digest_hex() const {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest()));
        return buf;
    }

    // ---- typed section builders -----------------------------------------

    fmcw::ChirpConfig chirp() const {
        fmcw::ChirpConfig c;
        c.start_frequency = get_double("radar.start_frequency");
        c.slope = get_double("radar.slope");
        c.adc_samples = get_int("radar.adc_samples");
        c.adc_rate = get_double("radar.adc_rate");
        c.chirps_per_frame = get_int("radar.chirps_per_frame");
        c.idle_time = get_double("radar.idle_time");
        c.frames = get_int("radar.frames");
        fmcw::validate(c);
        return c;
    }

    dsp::DspConfig dsp_config() const {
        dsp::DspConfig d;
        d.window_range = get_bool("radar.window_range");
        d.window_doppler = get_bool("radar.window_doppler");
        d.range_gate_lo = get_int("radar.range_gate_lo");
        d.range_gate_hi = get_int("radar.range_gate_hi");
        return d;
    }

    imu::StftConfig stft() const {
        imu::StftConfig s;
        s.window = get_int("imu.stft_window");
        s.hop = get_int("imu.stft_hop");
        return s;
    }

    imu::GestureBand band() const {
        imu::GestureBand b;
        b.level_lo = get_int("imu.band_level_lo");
        b.level_hi = get_int("imu.band_level_hi");
        require_config(b.level_lo >= 1 && b.level_lo <= b.level_hi && b.level_hi <= imu::kModwtLevels,
                       "imu.band_level range invalid");
        return b;
    }

    mwhe::EnhancementConfig enhancement() const {
        mwhe::EnhancementConfig e;
        e.blur_sigma = get_double("enhancement.blur_sigma");
        e.blur_kernel = get_int("enhancement.blur_kernel");
        e.kmeans_max_iters = get_int("enhancement.kmeans_max_iters");
        return e;
    }

    data::GenerationConfig generation(std::uint64_t master_seed) const {
        data::GenerationConfig g;
        g.classes.clear();
        std::stringstream ss(get("dataset.classes"));
        std::string name;
        while (std::getline(ss, name, ','))
            if (!trim(name).empty()) g.classes.push_back(kin::gesture_from_name(trim(name)));
        require_config(!g.classes.empty(), "dataset.classes must name at least one gesture");
        g.per_class = get_int("dataset.per_class");
        g.duration = get_double("dataset.duration");
        g.amplitude = get_double("dataset.amplitude");
        g.jitter = get_double("dataset.jitter");
        g.master_seed = master_seed;
        g.chirp = chirp();
        g.static_dominance = get_double("dataset.static_dominance");
        if (get("dataset.noise_snr_db") == "none")
            g.noise_snr_db.reset();
        else
            g.noise_snr_db = get_double("dataset.noise_snr_db");
        g.dsp = dsp_config();
        g.imu_noise_sigma = get_double("dataset.imu_noise_sigma");
        g.imu_rate = get_double("imu.sample_rate");
        g.stft = stft();
        g.band = band();
        g.enhancement = enhancement();
        g.heat_rows = get_int("dataset.heatmap_rows");
        g.heat_cols = get_int("dataset.heatmap_cols");
        g.store_cubes = get_bool("dataset.store_cubes");
        return g;
    }

    diff::I2RConfig i2r(int freq_bins, int time_bins) const {
        diff::I2RConfig c;
        c.fusion.in_freq = freq_bins;
        c.fusion.in_time = time_bins;
        c.fusion.out_h = get_int("dataset.heatmap_rows");
        c.fusion.out_w = get_int("dataset.heatmap_cols");
        c.fusion.channels = get_int("diffusion.channels");
        c.fusion.elements = get_int("diffusion.elements");
        c.fusion.clamp_radius = get_double("diffusion.clamp_radius");
        c.unet.height = c.fusion.out_h;
        c.unet.width = c.fusion.out_w;
        c.unet.base = get_int("diffusion.unet_base");
        c.unet.temb_dim = get_int("diffusion.temb_dim");
        c.steps = get_int("diffusion.steps");
        c.s_max = get_double("diffusion.s_max");
        return c;
    }

    dt::PatchEmbedConfig patch_embed() const {
        dt::PatchEmbedConfig p;
        p.patch = get_int("classifier.patch");
        p.embed_dim = get_int("classifier.embed_dim");
        return p;
    }

    dt::TransformerConfig transformer(int classes) const {
        dt::TransformerConfig t;
        t.layers = get_int("classifier.layers");
        t.chunk = get_int("classifier.chunk");
        t.classes = classes;
        t.epochs = get_int("classifier.epochs");
        t.lr = get_double("classifier.lr");
        t.weight_decay = get_double("classifier.weight_decay");
        return t;
    }

private:
    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return "";
        const auto b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }

    std::map<std::string, std::string> values_;
};

}  // namespace mmbridge::cfg
