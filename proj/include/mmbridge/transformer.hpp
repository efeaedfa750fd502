#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "mmbridge/common.hpp"
#include "mmbridge/irad.hpp"
#include "mmbridge/nn/adam.hpp"
#include "mmbridge/nn/graph.hpp"
#include "mmbridge/rng.hpp"
#include "mmbridge/types.hpp"

// Gesture classifier over time-velocity heatmaps: diagonally shifted patch
// embedding, per-chunk perceptual refinement with intra-chunk attention, and
// a temporal attention stack over chunk summaries.
namespace mmbridge::dt {

namespace op = nn::ops;

struct PatchEmbedConfig {
    int patch = 8;
    int embed_dim = 64;
    bool use_default_shifts = true;           // the 4 half-patch diagonals
    std::vector<std::pair<int, int>> shifts;  // explicit (dy,dx) set when the flag is off
    bool include_original = true;

    std::vector<std::pair<int, int>> effective_shifts() const {
        if (!use_default_shifts) return shifts;
        const int h = patch / 2;
        return {{-h, -h}, {-h, h}, {h, -h}, {h, h}};
    }
};

struct TransformerConfig {
    int layers = 2;
    int heads = 1;       // single-head attention
    int chunk = 8;
    int classes = 3;
    int epochs = 1000;
    double lr = 1e-3;
    double weight_decay = 1e-3;
};

struct ClassifierSample {
    nn::Tensor<float> heatmap;  // [1, H, W]
    int label = 0;
};

template <typename T>
struct DopplerTransformer {
    PatchEmbedConfig pe;
    TransformerConfig tc;
    int height = 64, width = 64;

    nn::Param<T> proj_w, proj_b, pos_embed;
    nn::Param<T> perc_w, perc_b;                   // perceptual dense
    nn::Param<T> chunk_q, chunk_k, chunk_v;        // intra-chunk attention
    struct TemporalLayer {
        nn::Param<T> ln1_g, ln1_b, q, k, v, ln2_g, ln2_b, ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    };
    std::vector<TemporalLayer> temporal;
    nn::Param<T> head_w, head_b;

    DopplerTransformer(const PatchEmbedConfig& p, const TransformerConfig& t, int h, int w)
        : pe(p), tc(t), height(h), width(w) {
        require_config(h % pe.patch == 0 && w % pe.patch == 0,
                       "classifier: heatmap dims must divide by the patch size");
        for (auto [dy, dx] : pe.effective_shifts())
            require_config(std::abs(dy) <= pe.patch && std::abs(dx) <= pe.patch,
                           "classifier: shifts must be bounded by the patch size");
        const int channels = static_cast<int>(pe.effective_shifts().size()) + (pe.include_original ? 1 : 0);
        require_config(channels >= 1, "classifier: need at least one input channel");
        const int d = pe.embed_dim;
        proj_w = nn::Param<T>("dt.proj_w", {channels * pe.patch * pe.patch, d});
        proj_b = nn::Param<T>("dt.proj_b", {d});
        pos_embed = nn::Param<T>("dt.pos_embed", {tokens(), d});
        perc_w = nn::Param<T>("dt.perc_w", {d, d});
        perc_b = nn::Param<T>("dt.perc_b", {d});
        chunk_q = nn::Param<T>("dt.chunk_q", {d, d});
        chunk_k = nn::Param<T>("dt.chunk_k", {d, d});
        chunk_v = nn::Param<T>("dt.chunk_v", {d, d});
        temporal.resize(static_cast<std::size_t>(tc.layers));
        for (int l = 0; l < tc.layers; ++l) {
            const std::string pfx = "dt.temporal." + std::to_string(l) + ".";
            auto& tl = temporal[static_cast<std::size_t>(l)];
            tl.ln1_g = nn::Param<T>(pfx + "ln1_g", {d});
            tl.ln1_b = nn::Param<T>(pfx + "ln1_b", {d});
            tl.q = nn::Param<T>(pfx + "q", {d, d});
            tl.k = nn::Param<T>(pfx + "k", {d, d});
            tl.v = nn::Param<T>(pfx + "v", {d, d});
            tl.ln2_g = nn::Param<T>(pfx + "ln2_g", {d});
            tl.ln2_b = nn::Param<T>(pfx + "ln2_b", {d});
            tl.ffn_w1 = nn::Param<T>(pfx + "ffn_w1", {d, 2 * d});
            tl.ffn_b1 = nn::Param<T>(pfx + "ffn_b1", {2 * d});
            tl.ffn_w2 = nn::Param<T>(pfx + "ffn_w2", {2 * d, d});
            tl.ffn_b2 = nn::Param<T>(pfx + "ffn_b2", {d});
        }
        head_w = nn::Param<T>("dt.head_w", {d, tc.classes});
        head_b = nn::Param<T>("dt.head_b", {tc.classes});
    }

    int tokens() const { return (height / pe.patch) * (width / pe.patch); }
    int chunks() const { return (tokens() + tc.chunk - 1) / tc.chunk; }

    void init(std::uint64_t seed) {
        Rng rng(Rng::derive(seed, 0xD7));
        proj_w.init_kaiming(rng, static_cast<std::size_t>(proj_w.value.dim(0)));
        pos_embed.init_uniform(rng, 0.02);
        perc_w.init_kaiming(rng, static_cast<std::size_t>(pe.embed_dim));
        chunk_q.init_kaiming(rng, static_cast<std::size_t>(pe.embed_dim));
        chunk_k.init_kaiming(rng, static_cast<std::size_t>(pe.embed_dim));
        chunk_v.init_kaiming(rng, static_cast<std::size_t>(pe.embed_dim));
        for (auto& tl : temporal) {
            std::fill(tl.ln1_g.value.v.begin(), tl.ln1_g.value.v.end(), T(1));
            std::fill(tl.ln2_g.value.v.begin(), tl.ln2_g.value.v.end(), T(1));
            tl.q.init_kaiming(rng, static_cast<std::size_t>(pe.embed_dim));
            tl.k.init_kaiming(rng, static_cast<std::size_t>(pe.embed_dim));
            tl.v.init_kaiming(rng, static_cast<std::size_t>(pe.embed_dim));
            tl.ffn_w1.init_kaiming(rng, static_cast<std::size_t>(pe.embed_dim));
            tl.ffn_w2.init_kaiming(rng, static_cast<std::size_t>(2 * pe.embed_dim));
        }
        // Head stays zero so class roles are exchangeable at initialization.
    }

    std::vector<nn::Param<T>*> params() {
        std::vector<nn::Param<T>*> out{&proj_w, &proj_b, &pos_embed, &perc_w, &perc_b,
                                       &chunk_q, &chunk_k, &chunk_v};
        for (auto& tl : temporal)
            for (auto* p : {&tl.ln1_g, &tl.ln1_b, &tl.q, &tl.k, &tl.v, &tl.ln2_g, &tl.ln2_b,
                            &tl.ffn_w1, &tl.ffn_b1, &tl.ffn_w2, &tl.ffn_b2})
                out.push_back(p);
        out.push_back(&head_w);
        out.push_back(&head_b);
        return out;
    }

    /// Shifted patch embedding: tokens [n_tokens, embed_dim], time index =
    /// patch-row (the heatmap's row axis is time).
    nn::Node<T>* embed(nn::Tape<T>& tape, const nn::Tensor<T>& heatmap) {
        require(heatmap.rank() == 3 && heatmap.dim(0) == 1 && heatmap.dim(1) == height &&
                    heatmap.dim(2) == width,
                "classifier: heatmap dims mismatch");
        auto* x = tape.constant(heatmap);
        nn::Node<T>* stack = nullptr;
        if (pe.include_original) stack = x;
        for (auto [dy, dx] : pe.effective_shifts()) {
            auto* shifted = op::shift2d(tape, x, dy, dx);
            stack = stack ? op::concat_channels(tape, stack, shifted) : shifted;
        }
        auto* patches = op::patchify(tape, stack, pe.patch);
        auto* tok = op::dense(tape, patches, tape.param(proj_w), tape.param(proj_b));
        return op::add(tape, tok, tape.param(pos_embed));
    }

    /// Full network: chunked perceptual + intra-chunk attention, temporal
    /// attention over chunk summaries, mean pool, classifier head.
    nn::Node<T>* forward(nn::Tape<T>& tape, const nn::Tensor<T>& heatmap) {
        auto* tok = embed(tape, heatmap);
        const int n_tok = tokens(), csz = tc.chunk;
        const int n_chunks = chunks();

        std::vector<nn::Node<T>*> summaries;
        for (int c = 0; c < n_chunks; ++c) {
            const int r0 = c * csz, r1 = std::min(r0 + csz, n_tok);
            const int valid = r1 - r0;
            auto* part = op::slice_rows(tape, tok, r0, r1);
            if (valid < csz) part = op::pad_rows(tape, part, csz);

            auto* refined = op::relu(tape, op::dense(tape, part, tape.param(perc_w), tape.param(perc_b)));
            nn::Tensor<T> mask({csz, csz});
            for (int i = 0; i < csz; ++i)
                for (int j = valid; j < csz; ++j) mask.at(i, j) = T(-1e9);
            auto* q = op::matmul(tape, refined, tape.param(chunk_q));
            auto* k = op::matmul(tape, refined, tape.param(chunk_k));
            auto* v = op::matmul(tape, refined, tape.param(chunk_v));
            auto* mixed = op::add(tape, refined,
                                  op::attention(tape, q, k, v, valid < csz ? &mask : nullptr));
            std::vector<T> weights(static_cast<std::size_t>(csz), T(0));
            for (int i = 0; i < valid; ++i) weights[static_cast<std::size_t>(i)] = T(1);
            summaries.push_back(op::mean_rows_weighted(tape, mixed, weights));
        }
        auto* seq = op::concat_rows(tape, summaries);  // [n_chunks, d]

        for (auto& tl : temporal) {
            auto* normed = op::layer_norm(tape, seq, tape.param(tl.ln1_g), tape.param(tl.ln1_b));
            auto* q = op::matmul(tape, normed, tape.param(tl.q));
            auto* k = op::matmul(tape, normed, tape.param(tl.k));
            auto* v = op::matmul(tape, normed, tape.param(tl.v));
            seq = op::add(tape, seq, op::attention(tape, q, k, v));
            auto* normed2 = op::layer_norm(tape, seq, tape.param(tl.ln2_g), tape.param(tl.ln2_b));
            auto* ff = op::dense(tape,
                                 op::relu(tape, op::dense(tape, normed2, tape.param(tl.ffn_w1),
                                                          tape.param(tl.ffn_b1))),
                                 tape.param(tl.ffn_w2), tape.param(tl.ffn_b2));
            seq = op::add(tape, seq, ff);
        }
        auto* pooled = op::mean_rows(tape, seq);
        return op::dense(tape, pooled, tape.param(head_w), tape.param(head_b));  // [1, classes]
    }
};

/// Logits for one heatmap (inference path).
inline std::vector<float> logits_of(DopplerTransformer<float>& model, const nn::Tensor<float>& heatmap) {
    nn::Tape<float> tape;
    auto* out = model.forward(tape, heatmap);
    return out->val.v;
}

/// Classes ordered by descending logit; ties break toward the lower index.
inline std::vector<int> predict_topk(DopplerTransformer<float>& model,
                                     const nn::Tensor<float>& heatmap, int k) {
    require(k >= 1 && k <= model.tc.classes, "predict_topk: k out of range");
    const auto logits = logits_of(model, heatmap);
    std::vector<int> order(logits.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return logits[a] > logits[b]; });
    order.resize(static_cast<std::size_t>(k));
    return order;
}

struct TrainLogEntry {
    int epoch;
    double loss;
    double train_accuracy;
};

/// Cross-entropy training with Adam. Deterministic given the seed: the batch
/// order reshuffles per epoch from a derived stream. Stops early once the
/// training set is fully separated and the loss is tiny.
inline std::vector<TrainLogEntry> train_classifier(DopplerTransformer<float>& model,
                                                   const std::vector<ClassifierSample>& data,
                                                   std::uint64_t seed, int batch_size = 16,
                                                   double early_stop_loss = 1e-3) {
    require(!data.empty(), "train_classifier: empty dataset");
    std::vector<bool> seen(static_cast<std::size_t>(model.tc.classes), false);
    for (const auto& s : data) {
        require(s.label >= 0 && s.label < model.tc.classes, "train_classifier: label out of range");
        seen[static_cast<std::size_t>(s.label)] = true;
    }
    int classes_present = 0;
    for (bool b : seen) classes_present += b ? 1 : 0;
    if (classes_present < 2) throw std::invalid_argument("train_classifier: need at least 2 classes");

    nn::Adam<float>::Config ocfg;
    ocfg.lr = model.tc.lr;
    ocfg.weight_decay = model.tc.weight_decay;
    nn::Adam<float> opt(model.params(), ocfg);
    Rng shuffle_rng(Rng::derive(seed, 0x5F));

    std::vector<TrainLogEntry> log;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < model.tc.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double epoch_loss = 0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
            opt.zero_grad();
            double batch_loss = 0;
            for (std::size_t i = start; i < end; ++i) {
                const auto& s = data[order[i]];
                nn::Tape<float> tape;
                auto* logits = model.forward(tape, s.heatmap);
                auto* loss = op::cross_entropy(tape, logits, {s.label});
                if (!std::isfinite(loss->val.v[0]))
                    throw NumericError("classifier loss is not finite");
                tape.backward(loss);
                batch_loss += loss->val.v[0];
                int best = 0;
                for (int c = 1; c < model.tc.classes; ++c)
                    if (logits->val.at(0, c) > logits->val.at(0, best)) best = c;
                correct += best == s.label ? 1 : 0;
            }
            const float inv = 1.f / static_cast<float>(end - start);
            for (auto* p : model.params())
                for (auto& g : p->grad.v) g *= inv;
            opt.step();
            epoch_loss += batch_loss;
        }
        epoch_loss /= static_cast<double>(data.size());
        const double acc = static_cast<double>(correct) / static_cast<double>(data.size());
        log.push_back({epoch, epoch_loss, acc});
        if (acc >= 1.0 && epoch_loss < early_stop_loss) break;
    }
    return log;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

inline void save_checkpoint(const std::string& path, DopplerTransformer<float>& model) {
    irad::Container c;
    c.kind = irad::Kind::Checkpoint;
    irad::Array meta;
    meta.dtype = irad::Dtype::F32;
    std::vector<float> vals = {static_cast<float>(model.pe.patch),
                               static_cast<float>(model.pe.embed_dim),
                               static_cast<float>(model.pe.include_original ? 1 : 0),
                               static_cast<float>(model.tc.layers),
                               static_cast<float>(model.tc.chunk),
                               static_cast<float>(model.tc.classes),
                               static_cast<float>(model.height),
                               static_cast<float>(model.width)};
    meta.dims = {static_cast<std::uint32_t>(vals.size())};
    meta.payload = irad::detail::to_bytes(vals);
    c.tensors.emplace_back("dt.meta", std::move(meta));
    for (auto* p : model.params()) {
        irad::Array a;
        a.dtype = irad::Dtype::F32;
        for (int d : p->value.shape) a.dims.push_back(static_cast<std::uint32_t>(d));
        a.payload = irad::detail::to_bytes(p->value.v);
        c.tensors.emplace_back(p->name, std::move(a));
    }
    irad::write_container(path, c);
}

inline DopplerTransformer<float> load_checkpoint(const std::string& path) {
    auto c = irad::read_container(path);
    if (c.kind != irad::Kind::Checkpoint)
        throw FormatError("not a checkpoint container: " + path, 5);
    const irad::Array* meta = nullptr;
    for (const auto& [name, arr] : c.tensors)
        if (name == "dt.meta") meta = &arr;
    if (!meta) throw FormatError("checkpoint missing dt.meta: " + path, 8);
    const auto vals = irad::detail::from_bytes<float>(meta->payload);
    require(vals.size() >= 8, "dt.meta too short");

    PatchEmbedConfig pe;
    pe.patch = static_cast<int>(vals[0]);
    pe.embed_dim = static_cast<int>(vals[1]);
    pe.include_original = vals[2] != 0.f;
    TransformerConfig tc;
    tc.layers = static_cast<int>(vals[3]);
    tc.chunk = static_cast<int>(vals[4]);
    tc.classes = static_cast<int>(vals[5]);
    DopplerTransformer<float> model(pe, tc, static_cast<int>(vals[6]), static_cast<int>(vals[7]));
    for (auto* p : model.params()) {
        const irad::Array* found = nullptr;
        for (const auto& [name, arr] : c.tensors)
            if (name == p->name) found = &arr;
        if (!found) throw FormatError("checkpoint missing tensor " + p->name, 8);
        auto vec = irad::detail::from_bytes<float>(found->payload);
        require(vec.size() == p->value.numel(), "checkpoint tensor size mismatch for " + p->name);
        p->value.v = std::move(vec);
    }
    return model;
}

inline void write_metrics_log(const std::string& path, const std::vector<TrainLogEntry>& log) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open metrics log: " + path);
    f << "# epoch loss train_acc\n";
    for (const auto& e : log) f << e.epoch << " " << e.loss << " " << e.train_accuracy << "\n";
}

}  // namespace mmbridge::dt
