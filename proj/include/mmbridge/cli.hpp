#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmbridge/config.hpp"
#include "mmbridge/dataset.hpp"
#include "mmbridge/diffusion.hpp"
#include "mmbridge/image.hpp"
#include "mmbridge/metrics.hpp"
#include "mmbridge/selfcheck.hpp"
#include "mmbridge/transformer.hpp"

// Command-line pipeline driver. Exit codes: 0 success, 1 usage/config error,
// 2 I/O or format error, 3 numeric or invariant violation.
namespace mmbridge::cli {

namespace fs = std::filesystem;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::uint64_t seed = 1;
};

inline cfg::Config resolve_config(const CommonArgs& args) {
    cfg::Config config;
    if (!args.config_path.empty()) config.load_file(args.config_path);
    for (const auto& kv : args.overrides) config.set_assignment(kv);
    return config;
}

inline void print_run_header(const cfg::Config& config, std::uint64_t seed, std::ostream& out) {
    out << "config digest: " << config.digest_hex() << "\n";
    out << "master seed:   " << seed << "\n";
}

namespace detail {

inline std::vector<data::ManifestEntry> entries_for_split(const data::Manifest& manifest,
                                                          const std::string& split) {
    std::vector<data::ManifestEntry> out;
    for (const auto& e : manifest.entries)
        if (split.empty() || e.split == split || e.split.empty()) out.push_back(e);
    return out;
}

inline std::vector<diff::TrainingPair> load_pairs(const std::string& root,
                                                  const std::vector<data::ManifestEntry>& entries) {
    std::vector<diff::TrainingPair> pairs;
    pairs.reserve(entries.size());
    for (const auto& e : entries) {
        auto p = data::load_pair(root, e);
        diff::TrainingPair t;
        t.source = std::move(p.triplet);
        t.target = std::move(p.heatmap);
        t.label = p.label;
        pairs.push_back(std::move(t));
    }
    return pairs;
}

inline nn::Tensor<float> heatmap_tensor(const Heatmap& h) {
    nn::Tensor<float> t({1, h.rows, h.cols});
    std::copy(h.v.begin(), h.v.end(), t.v.begin());
    return t;
}

inline Heatmap tensor_heatmap(const nn::Tensor<float>& t) {
    Heatmap h(t.dim(1), t.dim(2));
    std::copy(t.v.begin(), t.v.end(), h.v.begin());
    return h;
}

inline int cmd_synth(const CommonArgs& common, const std::string& out_dir) {
    auto config = resolve_config(common);
    print_run_header(config, common.seed, std::cout);
    auto gen = config.generation(common.seed);
    auto manifest = data::generate_paired_dataset(out_dir, gen, config.digest_hex());
    data::split_manifest(manifest, config.get_double("dataset.split_train"),
                         config.get_double("dataset.split_val"),
                         config.get_double("dataset.split_test"), common.seed);
    data::save_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);
    std::cout << "wrote " << manifest.entries.size() << " samples to " << out_dir << "\n";
    return 0;
}

inline int cmd_process(const CommonArgs& common, const std::string& in_path,
                       const std::string& out_path, bool do_enhance,
                       const std::string& mask_path) {
    auto config = resolve_config(common);
    print_run_header(config, common.seed, std::cout);
    auto cube = irad::read_cube(in_path, config.chirp());
    Heatmap heatmap = dsp::cube_to_heatmap(cube, config.dsp_config());
    const int rows = config.get_int("dataset.heatmap_rows");
    const int cols = config.get_int("dataset.heatmap_cols");
    if (heatmap.rows != rows || heatmap.cols != cols) {
        heatmap = img::resize_bilinear(heatmap, rows, cols);
        minmax_normalize(heatmap);
    }
    if (do_enhance) {
        auto res = mwhe::enhance(heatmap, config.enhancement());
        irad::write_heatmap(out_path, res.enhanced);
        if (!mask_path.empty()) irad::write_mask(mask_path, res.mask);
    } else {
        irad::write_heatmap(out_path, heatmap);
    }
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

inline int cmd_enhance(const CommonArgs& common, const std::string& in_path,
                       const std::string& out_path, const std::string& mask_path) {
    auto config = resolve_config(common);
    print_run_header(config, common.seed, std::cout);
    auto heatmap = irad::read_heatmap(in_path);
    auto res = mwhe::enhance(heatmap, config.enhancement());
    irad::write_heatmap(out_path, res.enhanced);
    if (!mask_path.empty()) irad::write_mask(mask_path, res.mask);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

inline int cmd_train_i2r(const CommonArgs& common, const std::string& data_dir,
                         const std::string& out_path, int steps_T, int epochs,
                         const std::string& log_path) {
    auto config = resolve_config(common);
    if (steps_T > 0) config.set("diffusion.steps", std::to_string(steps_T));
    if (epochs > 0) config.set("diffusion.epochs", std::to_string(epochs));
    print_run_header(config, common.seed, std::cout);

    auto manifest = data::load_manifest((fs::path(data_dir) / "manifest.json").string());
    auto train_entries = entries_for_split(manifest, "train");
    require(!train_entries.empty(), "no train-split entries in " + data_dir);
    auto pairs = load_pairs(data_dir, train_entries);

    auto i2r_cfg = config.i2r(pairs[0].source.dim(1), pairs[0].source.dim(2));
    diff::I2RModel<float> model(i2r_cfg);
    model.init(common.seed);

    nn::Adam<float>::Config ocfg;
    ocfg.lr = config.get_double("diffusion.lr");
    ocfg.weight_decay = config.get_double("diffusion.weight_decay");
    auto log = diff::train_i2r(model, pairs, config.get_int("diffusion.epochs"),
                               config.get_int("diffusion.batch"), ocfg, common.seed);
    diff::save_checkpoint(out_path, model);
    if (!log_path.empty()) diff::write_metrics_log(log_path, log);
    std::cout << "trained on " << pairs.size() << " pairs for " << log.size()
              << " steps; final loss " << (log.empty() ? 0.0 : log.back().second) << "\n"
              << "wrote " << out_path << "\n";
    return 0;
}

inline int cmd_translate(const CommonArgs& common, const std::string& ckpt_path,
                         const std::string& in_path, const std::string& out_path, int stride) {
    auto config = resolve_config(common);
    print_run_header(config, common.seed, std::cout);
    auto model = diff::load_checkpoint(ckpt_path);
    auto trip = irad::read_spectrogram(in_path);
    nn::Tensor<float> triplet({3, trip.freq_bins(), trip.time_bins()});
    std::size_t k = 0;
    for (const auto& sp : trip.axis)
        for (double v : sp.v) triplet.v[k++] = static_cast<float>(v);
    auto heatmap = diff::translate(model, triplet, stride, common.seed);
    irad::write_heatmap(out_path, heatmap);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

inline int cmd_train_clf(const CommonArgs& common, const std::string& data_dir,
                         const std::string& out_path, int epochs, double lr, double wd,
                         const std::string& log_path) {
    auto config = resolve_config(common);
    if (epochs > 0) config.set("classifier.epochs", std::to_string(epochs));
    if (lr > 0) config.set("classifier.lr", std::to_string(lr));
    if (wd >= 0) config.set("classifier.weight_decay", std::to_string(wd));
    print_run_header(config, common.seed, std::cout);

    auto manifest = data::load_manifest((fs::path(data_dir) / "manifest.json").string());
    auto train_entries = entries_for_split(manifest, "train");
    require(!train_entries.empty(), "no train-split entries in " + data_dir);

    std::vector<dt::ClassifierSample> samples;
    for (const auto& e : train_entries) {
        auto p = data::load_pair(data_dir, e);
        samples.push_back({std::move(p.heatmap), p.label});
    }
    const int classes = static_cast<int>(manifest.classes.size());
    dt::DopplerTransformer<float> model(config.patch_embed(), config.transformer(classes),
                                        samples[0].heatmap.dim(1), samples[0].heatmap.dim(2));
    model.init(common.seed);
    auto log = dt::train_classifier(model, samples, common.seed,
                                    config.get_int("classifier.batch"));
    dt::save_checkpoint(out_path, model);
    if (!log_path.empty()) dt::write_metrics_log(log_path, log);
    std::cout << "trained on " << samples.size() << " heatmaps for " << log.size()
              << " epochs; final train accuracy " << (log.empty() ? 0.0 : log.back().train_accuracy)
              << "\n"
              << "wrote " << out_path << "\n";
    return 0;
}

inline int cmd_eval(const CommonArgs& common, const std::string& clf_path,
                    const std::string& i2r_path, const std::string& data_dir,
                    const std::string& report_path, int stride) {
    auto config = resolve_config(common);
    print_run_header(config, common.seed, std::cout);
    auto clf = dt::load_checkpoint(clf_path);
    std::optional<diff::I2RModel<float>> i2r;
    if (!i2r_path.empty()) i2r = diff::load_checkpoint(i2r_path);

    auto manifest = data::load_manifest((fs::path(data_dir) / "manifest.json").string());
    auto test_entries = entries_for_split(manifest, "test");
    require(!test_entries.empty(), "no test-split entries in " + data_dir);

    std::vector<std::vector<int>> real_preds, trans_preds;
    std::vector<int> labels;
    std::vector<double> ssims, pearsons;
    const int kmax = std::min(3, clf.tc.classes);
    for (const auto& e : test_entries) {
        auto p = data::load_pair(data_dir, e);
        labels.push_back(p.label);
        real_preds.push_back(dt::predict_topk(clf, p.heatmap, kmax));
        if (i2r) {
            auto translated = diff::translate(*i2r, p.triplet, stride,
                                              Rng::derive(common.seed, labels.size()));
            trans_preds.push_back(dt::predict_topk(clf, heatmap_tensor(translated), kmax));
            ssims.push_back(metrics::ssim(translated, tensor_heatmap(p.heatmap)));
            std::vector<double> a(translated.v.begin(), translated.v.end());
            std::vector<double> b(p.heatmap.v.begin(), p.heatmap.v.end());
            try {
                pearsons.push_back(metrics::pearson(a, b));
            } catch (const std::invalid_argument&) {
                // constant image; correlation undefined, skip
            }
        }
    }

    auto real_rep = metrics::make_report(real_preds, labels, clf.tc.classes);
    nlohmann::ordered_json j;
    j["samples"] = labels.size();
    j["classes"] = manifest.classes;
    j["real"] = {{"top1", real_rep.top1}, {"top2", real_rep.top2}, {"top3", real_rep.top3}};
    j["real"]["per_class_top1"] = real_rep.per_class_top1;

    auto print_line = [](const std::string& name, double t1, double t2, double t3) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%-12s top-1 %6.2f%%  top-2 %6.2f%%  top-3 %6.2f%%",
                      name.c_str(), 100 * t1, 100 * t2, 100 * t3);
        std::cout << buf << "\n";
    };
    std::cout << "evaluated " << labels.size() << " test samples\n";
    print_line("real", real_rep.top1, real_rep.top2, real_rep.top3);

    if (i2r) {
        auto trans_rep = metrics::make_report(trans_preds, labels, clf.tc.classes);
        double ssim_mean = 0, ssim_sq = 0;
        for (double s : ssims) ssim_mean += s;
        ssim_mean /= static_cast<double>(ssims.size());
        for (double s : ssims) ssim_sq += (s - ssim_mean) * (s - ssim_mean);
        const double ssim_std = std::sqrt(ssim_sq / static_cast<double>(ssims.size()));
        double pearson_mean = 0;
        for (double p : pearsons) pearson_mean += p;
        if (!pearsons.empty()) pearson_mean /= static_cast<double>(pearsons.size());

        j["translated"] = {{"top1", trans_rep.top1}, {"top2", trans_rep.top2},
                           {"top3", trans_rep.top3}};
        j["translated"]["per_class_top1"] = trans_rep.per_class_top1;
        j["generative"] = {{"ssim_mean", ssim_mean}, {"ssim_std", ssim_std},
                           {"pearson_mean", pearson_mean}};
        print_line("translated", trans_rep.top1, trans_rep.top2, trans_rep.top3);
        char buf[96];
        std::snprintf(buf, sizeof(buf), "generative   ssim %.4f +- %.4f   pearson %.4f", ssim_mean,
                      ssim_std, pearson_mean);
        std::cout << buf << "\n";
    }

    if (!report_path.empty()) {
        std::ofstream f(report_path);
        if (!f) throw std::runtime_error("cannot write report: " + report_path);
        f << j.dump(2) << "\n";
        std::cout << "wrote " << report_path << "\n";
    }
    return 0;
}

inline int cmd_render(const std::string& in_path, const std::string& out_path) {
    auto c = irad::read_container(in_path);
    switch (c.kind) {
        case irad::Kind::Heatmap: {
            img::write_pgm(out_path, irad::read_heatmap(in_path));
            break;
        }
        case irad::Kind::Mask: {
            img::write_pgm(out_path, irad::read_mask(in_path));
            break;
        }
        case irad::Kind::Spectrogram: {
            auto trip = irad::read_spectrogram(in_path);
            // Stack the three axes vertically with 1-px separators.
            const int fb = trip.freq_bins(), tb = trip.time_bins();
            Heatmap h(3 * fb + 2, tb, 0.f);
            for (int a = 0; a < 3; ++a)
                for (int f = 0; f < fb; ++f)
                    for (int t = 0; t < tb; ++t)
                        h.at(a * (fb + 1) + f, t) = static_cast<float>(trip.axis[a].at(f, t));
            img::write_pgm(out_path, h);
            break;
        }
        default:
            throw std::invalid_argument("render: unsupported container kind");
    }
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

inline int cmd_selfcheck() {
    auto results = selfcheck::run_all();
    bool all = true;
    for (const auto& r : results) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "[%s] %-42s %s", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                      r.detail.c_str());
        std::cout << buf << "\n";
        all = all && r.pass;
    }
    return all ? 0 : 3;
}

}  // namespace detail

/// Entry point shared by the binary and the in-process tests.
inline int run(const std::vector<std::string>& args) {
    CLI::App app{"cross-modal gesture sensing toolkit"};
    app.require_subcommand(1);

    CommonArgs common;
    auto add_common = [&common](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "key = value config file");
        sub->add_option("--set", common.overrides, "config override key=value")->take_all();
        sub->add_option("--seed", common.seed, "master seed");
    };

    // synth
    auto* synth = app.add_subcommand("synth", "generate a paired synthetic dataset");
    std::string out_dir;
    synth->add_option("--out", out_dir, "output dataset directory")->required();
    add_common(synth);

    // process
    auto* process = app.add_subcommand("process", "radar cube -> time-velocity heatmap");
    std::string in_path, out_path, mask_path;
    bool do_enhance = false;
    process->add_option("--in", in_path, "input cube.irad")->required();
    process->add_option("--out", out_path, "output heatmap.irad")->required();
    process->add_option("--mask", mask_path, "optional mask output (with --enhance)");
    process->add_flag("--enhance", do_enhance, "apply heatmap enhancement");
    add_common(process);

    // enhance
    auto* enhance = app.add_subcommand("enhance", "denoise/refine a heatmap");
    enhance->add_option("--in", in_path, "input heatmap.irad")->required();
    enhance->add_option("--out", out_path, "output heatmap.irad")->required();
    enhance->add_option("--mask", mask_path, "optional mask output");
    add_common(enhance);

    // train-i2r
    auto* train_i2r = app.add_subcommand("train-i2r", "train the IMU-to-radar translation model");
    std::string data_dir, ckpt_path, log_path;
    int steps_T = 0, epochs = 0;
    train_i2r->add_option("--data", data_dir, "dataset directory")->required();
    train_i2r->add_option("--out", ckpt_path, "output checkpoint")->required();
    train_i2r->add_option("--T", steps_T, "diffusion steps");
    train_i2r->add_option("--epochs", epochs, "training epochs");
    train_i2r->add_option("--log", log_path, "metrics log path");
    add_common(train_i2r);

    // translate
    auto* translate = app.add_subcommand("translate", "IMU spectrogram -> mmWave heatmap");
    int stride = 1;
    translate->add_option("--ckpt", ckpt_path, "translation checkpoint")->required();
    translate->add_option("--in", in_path, "input spectrogram.irad")->required();
    translate->add_option("--out", out_path, "output heatmap.irad")->required();
    translate->add_option("--stride", stride, "reverse-step stride");
    add_common(translate);

    // train-clf
    auto* train_clf = app.add_subcommand("train-clf", "train the gesture classifier");
    double lr = 0, wd = -1;
    train_clf->add_option("--data", data_dir, "dataset directory")->required();
    train_clf->add_option("--out", ckpt_path, "output checkpoint")->required();
    train_clf->add_option("--epochs", epochs, "training epochs");
    train_clf->add_option("--lr", lr, "learning rate");
    train_clf->add_option("--wd", wd, "weight decay");
    train_clf->add_option("--log", log_path, "metrics log path");
    add_common(train_clf);

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate recognition and translation");
    std::string clf_path, i2r_path, report_path;
    eval->add_option("--clf", clf_path, "classifier checkpoint")->required();
    eval->add_option("--i2r", i2r_path, "translation checkpoint (optional)");
    eval->add_option("--data", data_dir, "dataset directory")->required();
    eval->add_option("--report", report_path, "JSON report output");
    eval->add_option("--stride", stride, "translation stride");
    add_common(eval);

    // render
    auto* render = app.add_subcommand("render", "export a container as PGM");
    render->add_option("--in", in_path, "input .irad")->required();
    render->add_option("--out", out_path, "output .pgm")->required();

    // selfcheck
    app.add_subcommand("selfcheck", "run the built-in oracle suite");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        if (args.empty() || app.get_subcommands().empty())
            std::cerr << "commands: synth process enhance train-i2r translate train-clf eval "
                         "render selfcheck\n";
        return 1;
    }

    try {
        if (synth->parsed()) return detail::cmd_synth(common, out_dir);
        if (process->parsed())
            return detail::cmd_process(common, in_path, out_path, do_enhance, mask_path);
        if (enhance->parsed()) return detail::cmd_enhance(common, in_path, out_path, mask_path);
        if (train_i2r->parsed())
            return detail::cmd_train_i2r(common, data_dir, ckpt_path, steps_T, epochs, log_path);
        if (translate->parsed())
            return detail::cmd_translate(common, ckpt_path, in_path, out_path, stride);
        if (train_clf->parsed())
            return detail::cmd_train_clf(common, data_dir, ckpt_path, epochs, lr, wd, log_path);
        if (eval->parsed())
            return detail::cmd_eval(common, clf_path, i2r_path, data_dir, report_path, stride);
        if (render->parsed()) return detail::cmd_render(in_path, out_path);
        return detail::cmd_selfcheck();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return 3;
    } catch (const std::out_of_range& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

inline int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

}  // namespace mmbridge::cli
