#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "mmbridge/common.hpp"
#include "mmbridge/imu.hpp"
#include "mmbridge/irad.hpp"
#include "mmbridge/nn/adam.hpp"
#include "mmbridge/nn/graph.hpp"
#include "mmbridge/rng.hpp"
#include "mmbridge/types.hpp"

// IMU-to-radar translation: an inertial fusion front end (learnable-spacing
// dilated convolutions plus a gating mechanism) conditions a Brownian-bridge
// diffusion whose endpoints are the mmWave heatmap (x_0) and the fused IMU
// latent (x_T). Sampling starts from the latent and walks the bridge back to
// a heatmap.
namespace mmbridge::diff {

namespace op = nn::ops;

// ---------------------------------------------------------------------------
// Bridge schedule
// ---------------------------------------------------------------------------

/// m_t = t/T; delta_t = 2 s_max (m_t - m_t^2);
/// delta_{t|t-1} = delta_t - delta_{t-1} ((1-m_t)/(1-m_{t-1}))^2.
struct BridgeSchedule {
    int steps = 200;      // T
    double s_max = 1.0;
    std::vector<double> m;            // [0..T]
    std::vector<double> delta;        // [0..T]
    std::vector<double> delta_trans;  // [0..T], index t holds delta_{t|t-1}; [0] = 0
};

inline BridgeSchedule build_schedule(int steps, double s_max = 1.0) {
    require_config(steps >= 2, "bridge schedule needs T >= 2");
    require_config(s_max > 0, "bridge schedule needs s_max > 0");
    BridgeSchedule s;
    s.steps = steps;
    s.s_max = s_max;
    s.m.resize(steps + 1);
    s.delta.resize(steps + 1);
    s.delta_trans.assign(steps + 1, 0.0);
    for (int t = 0; t <= steps; ++t) {
        s.m[t] = static_cast<double>(t) / steps;
        s.delta[t] = 2.0 * s_max * (s.m[t] - s.m[t] * s.m[t]);
    }
    for (int t = 1; t <= steps; ++t) {
        const double ratio = (1.0 - s.m[t]) / (1.0 - s.m[t - 1]);
        s.delta_trans[t] = s.delta[t] - s.delta[t - 1] * ratio * ratio;
        require(s.delta_trans[t] >= -1e-15, "bridge transition variance must be non-negative");
        s.delta_trans[t] = std::max(s.delta_trans[t], 0.0);
    }
    return s;
}

/// x_t = (1 - m_t) x_0 + m_t cond + sqrt(delta_t) noise.
inline nn::Tensor<float> forward_sample(const nn::Tensor<float>& x0, const nn::Tensor<float>& cond,
                                        int t, const nn::Tensor<float>& noise,
                                        const BridgeSchedule& s) {
    require(t >= 0 && t <= s.steps, "forward_sample: t out of range");
    require(x0.same_shape(cond) && x0.same_shape(noise), "forward_sample: shape mismatch");
    const float a = static_cast<float>(1.0 - s.m[t]);
    const float b = static_cast<float>(s.m[t]);
    const float c = static_cast<float>(std::sqrt(s.delta[t]));
    nn::Tensor<float> out(x0.shape);
    for (std::size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = a * x0.v[i] + b * cond.v[i] + c * noise.v[i];
    return out;
}

struct TransitionCoeffs {
    double on_prev = 0;   // coefficient on x_{t-1}
    double on_cond = 0;   // coefficient on the conditioning endpoint
    double variance = 0;  // delta_{t|t-1}
};

/// Forward transition x_{t-1} -> x_t: mean = on_prev x_{t-1} + on_cond cond.
inline TransitionCoeffs transition_coeffs(int t, const BridgeSchedule& s) {
    require(t >= 1 && t <= s.steps, "transition_coeffs: t out of range");
    TransitionCoeffs c;
    c.on_prev = (1.0 - s.m[t]) / (1.0 - s.m[t - 1]);
    c.on_cond = s.m[t] - s.m[t - 1] * c.on_prev;
    c.variance = s.delta_trans[t];
    return c;
}

/// Posterior q(x_lo | x_hi, x0_hat, cond) of the bridge between two times.
/// mean = c_xt (x_hi - b cond) + c_skip ((1-m_lo) x0_hat + m_lo cond).
struct ReverseCoeffs {
    double c_xt = 0;      // on (x_hi - b * cond)
    double b = 0;         // forward cond coefficient between lo and hi
    double c_skip = 0;    // on the lo-marginal mean built from x0_hat
    double m_lo = 0;
    double variance = 0;  // delta-tilde
};

inline ReverseCoeffs reverse_coeffs(int t_hi, int t_lo, const BridgeSchedule& s) {
    require(t_hi >= 1 && t_hi <= s.steps && t_lo >= 0 && t_lo < t_hi,
            "reverse_coeffs: bad step pair");
    ReverseCoeffs rc;
    rc.m_lo = s.m[t_lo];
    if (t_hi == s.steps) {
        // x_T == cond carries no information; the posterior is the lo-marginal.
        rc.c_xt = 0;
        rc.b = 1.0;
        rc.c_skip = 1.0;
        rc.variance = s.delta[t_lo];
        return rc;
    }
    const double a = (1.0 - s.m[t_hi]) / (1.0 - s.m[t_lo]);
    rc.b = s.m[t_hi] - s.m[t_lo] * a;
    const double d_hi = s.delta[t_hi];
    const double d_lo = s.delta[t_lo];
    const double d_trans = std::max(d_hi - a * a * d_lo, 0.0);
    rc.c_xt = a * d_lo / d_hi;
    rc.c_skip = d_trans / d_hi;
    rc.variance = d_lo * d_trans / d_hi;
    return rc;
}

/// One reverse step: invert the forward parameterization (x0_hat = x_hi -
/// residual), then sample the bridge posterior at t_lo.
inline nn::Tensor<float> reverse_step(const nn::Tensor<float>& x_hi, const nn::Tensor<float>& cond,
                                      const nn::Tensor<float>& residual, int t_hi, int t_lo,
                                      const BridgeSchedule& s, const nn::Tensor<float>& noise) {
    require(x_hi.same_shape(cond) && x_hi.same_shape(residual) && x_hi.same_shape(noise),
            "reverse_step: shape mismatch");
    const auto rc = reverse_coeffs(t_hi, t_lo, s);
    const float sd = static_cast<float>(std::sqrt(std::max(rc.variance, 0.0)));
    nn::Tensor<float> out(x_hi.shape);
    for (std::size_t i = 0; i < out.v.size(); ++i) {
        const double x0_hat = static_cast<double>(x_hi.v[i]) - residual.v[i];
        const double mean = rc.c_xt * (x_hi.v[i] - rc.b * cond.v[i]) +
                            rc.c_skip * ((1.0 - rc.m_lo) * x0_hat + rc.m_lo * cond.v[i]);
        out.v[i] = static_cast<float>(mean) + sd * noise.v[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Inertial fusion module
// ---------------------------------------------------------------------------

struct FusionConfig {
    int in_freq = 17;   // spectrogram rows
    int in_time = 25;   // spectrogram cols
    int out_h = 64;     // heatmap rows
    int out_w = 64;     // heatmap cols
    int channels = 4;   // LDCNN features per axis
    int elements = 9;   // kernel elements
    double clamp_radius = 4.0;
};

/// Per-axis LDCNN features, sigmoid gate scalars, gated sum, then a channel
/// fusion layer resized to heatmap dims. Differentiable end to end.
template <typename T>
struct FusionModule {
    FusionConfig cfg;
    std::array<nn::Param<T>, 3> ld_w, ld_pos, gate_w, gate_b;
    nn::Param<T> fuse_w, fuse_b;

    explicit FusionModule(const FusionConfig& c = {}) : cfg(c) {
        for (int a = 0; a < 3; ++a) {
            const std::string ax = std::to_string(a);
            ld_w[a] = nn::Param<T>("fusion.ld_w." + ax, {cfg.channels, 1, cfg.elements});
            ld_pos[a] = nn::Param<T>("fusion.ld_pos." + ax, {cfg.elements, 2});
            gate_w[a] = nn::Param<T>("fusion.gate_w." + ax, {cfg.channels, 1});
            gate_b[a] = nn::Param<T>("fusion.gate_b." + ax, {1});
        }
        fuse_w = nn::Param<T>("fusion.fuse_w", {1, cfg.channels, 1, 1});
        fuse_b = nn::Param<T>("fusion.fuse_b", {1});
    }

    void init(std::uint64_t seed) {
        Rng rng(Rng::derive(seed, 0xF0510));
        const int grid = static_cast<int>(std::lround(std::sqrt(double(cfg.elements))));
        for (int a = 0; a < 3; ++a) {
            ld_w[a].init_kaiming(rng, static_cast<std::size_t>(cfg.elements));
            // Positions start on the dilation-2 grid with a small jitter.
            for (int e = 0; e < cfg.elements; ++e) {
                const int gy = grid ? e / grid : 0, gx = grid ? e % grid : 0;
                const double cy = 2.0 * (gy - (grid - 1) / 2.0);
                const double cx = 2.0 * (gx - (grid - 1) / 2.0);
                ld_pos[a].value.at(e, 0) = static_cast<T>(cy + rng.uniform(-0.25, 0.25));
                ld_pos[a].value.at(e, 1) = static_cast<T>(cx + rng.uniform(-0.25, 0.25));
            }
            gate_w[a].init_kaiming(rng, static_cast<std::size_t>(cfg.channels));
            gate_b[a].value.v[0] = T(0);
        }
        fuse_w.init_kaiming(rng, static_cast<std::size_t>(cfg.channels));
        fuse_b.value.v[0] = T(0);
    }

    std::vector<nn::Param<T>*> params() {
        std::vector<nn::Param<T>*> out;
        for (int a = 0; a < 3; ++a) {
            out.push_back(&ld_w[a]);
            out.push_back(&ld_pos[a]);
            out.push_back(&gate_w[a]);
            out.push_back(&gate_b[a]);
        }
        out.push_back(&fuse_w);
        out.push_back(&fuse_b);
        return out;
    }

    /// triplet is a [3, in_freq, in_time] tensor in [0,1].
    nn::Node<T>* forward(nn::Tape<T>& tape, const nn::Tensor<T>& triplet) {
        require(triplet.rank() == 3 && triplet.dim(0) == 3 && triplet.dim(1) == cfg.in_freq &&
                    triplet.dim(2) == cfg.in_time,
                "fusion: triplet dims do not match the configured spectrogram size");
        std::vector<nn::Node<T>*> feats;
        std::vector<nn::Node<T>*> gates;
        for (int a = 0; a < 3; ++a) {
            nn::Tensor<T> slice({1, cfg.in_freq, cfg.in_time});
            std::copy(triplet.v.begin() + static_cast<std::ptrdiff_t>(a) * slice.numel(),
                      triplet.v.begin() + static_cast<std::ptrdiff_t>(a + 1) * slice.numel(),
                      slice.v.begin());
            auto* x = tape.constant(std::move(slice));
            auto* feat = op::relu(tape, op::ldconv2d(tape, x, tape.param(ld_w[a]),
                                                     tape.param(ld_pos[a]),
                                                     static_cast<T>(cfg.clamp_radius)));
            auto* gap = op::reshape(tape, op::global_avg_pool(tape, feat), {1, cfg.channels});
            auto* logit = op::dense(tape, gap, tape.param(gate_w[a]), tape.param(gate_b[a]));
            auto* gate = op::sigmoid(tape, op::reshape(tape, logit, {1}));
            feats.push_back(op::scale_by_scalar(tape, feat, gate));
            gates.push_back(gate);
        }
        auto* fused = op::add(tape, feats[0], op::add(tape, feats[1], feats[2]));
        auto* resized = op::resize_bilinear(tape, fused, cfg.out_h, cfg.out_w);
        return op::conv2d(tape, resized, tape.param(fuse_w), tape.param(fuse_b));
    }
};

// ---------------------------------------------------------------------------
// UNet noise predictor
// ---------------------------------------------------------------------------

struct UNetConfig {
    int in_ch = 2;       // x_t plus conditioning latent
    int base = 8;        // widths base, 16, 32, 64
    int temb_dim = 16;
    int height = 64;
    int width = 64;
};

/// Four encoder and four decoder stages with skip connections, ReLU and max
/// pooling; a sinusoidal step embedding is injected per stage as a channel
/// bias. The output head is zero-initialized so an untrained predictor emits
/// an exactly-zero residual.
template <typename T>
struct UNet {
    UNetConfig cfg;
    std::array<nn::Param<T>, 4> enc_w, enc_b, temb_w, temb_b, dec_w, dec_b;
    nn::Param<T> head_w, head_b;

    explicit UNet(const UNetConfig& c = {}) : cfg(c) {
        require_config(cfg.height % 16 == 0 || cfg.height == 16,
                       "unet: height must survive four 2x pools");
        require_config(cfg.width % 16 == 0 || cfg.width == 16,
                       "unet: width must survive four 2x pools");
        const int ch[5] = {cfg.in_ch, cfg.base, 2 * cfg.base, 4 * cfg.base, 8 * cfg.base};
        for (int i = 0; i < 4; ++i) {
            enc_w[i] = nn::Param<T>("unet.enc_w." + std::to_string(i), {ch[i + 1], ch[i], 3, 3});
            enc_b[i] = nn::Param<T>("unet.enc_b." + std::to_string(i), {ch[i + 1]});
            temb_w[i] = nn::Param<T>("unet.temb_w." + std::to_string(i), {cfg.temb_dim, ch[i + 1]});
            temb_b[i] = nn::Param<T>("unet.temb_b." + std::to_string(i), {ch[i + 1]});
        }
        // Decoder stage i consumes up(prev) concat skip(4-i).
        const int dec_in[4] = {16 * cfg.base, 8 * cfg.base, 4 * cfg.base, 2 * cfg.base};
        const int dec_out[4] = {4 * cfg.base, 2 * cfg.base, cfg.base, cfg.base};
        for (int i = 0; i < 4; ++i) {
            dec_w[i] = nn::Param<T>("unet.dec_w." + std::to_string(i), {dec_out[i], dec_in[i], 3, 3});
            dec_b[i] = nn::Param<T>("unet.dec_b." + std::to_string(i), {dec_out[i]});
        }
        head_w = nn::Param<T>("unet.head_w", {1, cfg.base, 1, 1});
        head_b = nn::Param<T>("unet.head_b", {1});
    }

    void init(std::uint64_t seed) {
        Rng rng(Rng::derive(seed, 0x0E7));
        for (int i = 0; i < 4; ++i) {
            enc_w[i].init_kaiming(rng, enc_w[i].value.numel() / enc_w[i].value.dim(0));
            temb_w[i].init_kaiming(rng, static_cast<std::size_t>(cfg.temb_dim));
            dec_w[i].init_kaiming(rng, dec_w[i].value.numel() / dec_w[i].value.dim(0));
        }
        // head stays zero
    }

    std::vector<nn::Param<T>*> params() {
        std::vector<nn::Param<T>*> out;
        for (int i = 0; i < 4; ++i) {
            out.push_back(&enc_w[i]);
            out.push_back(&enc_b[i]);
            out.push_back(&temb_w[i]);
            out.push_back(&temb_b[i]);
        }
        for (int i = 0; i < 4; ++i) {
            out.push_back(&dec_w[i]);
            out.push_back(&dec_b[i]);
        }
        out.push_back(&head_w);
        out.push_back(&head_b);
        return out;
    }

    /// x_t and cond are [1,H,W] nodes; t is the diffusion step.
    nn::Node<T>* forward(nn::Tape<T>& tape, nn::Node<T>* x_t, nn::Node<T>* cond, int t) {
        auto* h = op::concat_channels(tape, x_t, cond);
        const auto temb_vec = op::sinusoidal_embedding<T>(static_cast<double>(t), cfg.temb_dim);
        auto* temb = tape.constant(
            [&] {
                nn::Tensor<T> m({1, cfg.temb_dim});
                m.v = temb_vec.v;
                return m;
            }());

        std::array<nn::Node<T>*, 4> skips{};
        for (int i = 0; i < 4; ++i) {
            h = op::relu(tape, op::conv2d(tape, h, tape.param(enc_w[i]), tape.param(enc_b[i])));
            auto* bias = op::reshape(
                tape, op::dense(tape, temb, tape.param(temb_w[i]), tape.param(temb_b[i])),
                {enc_w[i].value.dim(0)});
            h = op::add_channel_bias(tape, h, bias);
            skips[static_cast<std::size_t>(i)] = h;
            h = op::maxpool2(tape, h);
        }
        for (int i = 0; i < 4; ++i) {
            h = op::upsample2(tape, h);
            h = op::concat_channels(tape, h, skips[static_cast<std::size_t>(3 - i)]);
            h = op::relu(tape, op::conv2d(tape, h, tape.param(dec_w[i]), tape.param(dec_b[i])));
        }
        return op::conv2d(tape, h, tape.param(head_w), tape.param(head_b));
    }
};

// ---------------------------------------------------------------------------
// The full translation model
// ---------------------------------------------------------------------------

struct TrainingPair {
    nn::Tensor<float> source;  // [3, freq, time] spectrogram triplet
    nn::Tensor<float> target;  // [1, H, W] enhanced heatmap
    int label = 0;
};

struct I2RConfig {
    FusionConfig fusion;
    UNetConfig unet;
    int steps = 200;     // T
    double s_max = 1.0;
};

template <typename T>
struct I2RModel {
    I2RConfig cfg;
    FusionModule<T> fusion;
    UNet<T> unet;
    BridgeSchedule schedule;

    explicit I2RModel(const I2RConfig& c = I2RConfig{})
        : cfg(c), fusion(c.fusion), unet(c.unet), schedule(build_schedule(c.steps, c.s_max)) {
        require_config(c.unet.height == c.fusion.out_h && c.unet.width == c.fusion.out_w,
                       "i2r: UNet dims must match fusion output dims");
    }

    void init(std::uint64_t seed) {
        fusion.init(seed);
        unet.init(seed + 1);
    }

    std::vector<nn::Param<T>*> params() {
        auto out = fusion.params();
        for (auto* p : unet.params()) out.push_back(p);
        return out;
    }
};

/// Draw a [1,H,W] standard-normal tensor.
inline nn::Tensor<float> gaussian_like(const std::vector<int>& shape, Rng& rng) {
    nn::Tensor<float> t(shape);
    for (auto& v : t.v) v = static_cast<float>(rng.gaussian());
    return t;
}

/// One optimizer step on a batch. Samples t uniformly in [1..T-1] and noise
/// per pair, forms x_t on the graph so gradients reach the fusion module both
/// through x_t and through the predictor's conditioning input, and regresses
/// the residual m_t (cond - x_0) + sqrt(delta_t) noise (= x_t - x_0, held
/// constant as the target). Returns the mean batch loss.
inline double train_step(I2RModel<float>& model, const std::vector<TrainingPair>& batch,
                         nn::Adam<float>& opt, Rng& rng) {
    require(!batch.empty(), "train_step: empty batch");
    opt.zero_grad();
    double total = 0;
    for (const auto& pair : batch) {
        const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(model.schedule.steps - 1)));
        auto noise = gaussian_like(pair.target.shape, rng);

        nn::Tape<float> tape;
        auto* cond = model.fusion.forward(tape, pair.source);
        const float m_t = static_cast<float>(model.schedule.m[t]);
        const float sd = static_cast<float>(std::sqrt(model.schedule.delta[t]));

        // x_t = (1 - m_t) x_0 + m_t cond + sd noise, built on the graph.
        nn::Tensor<float> drift(pair.target.shape);
        for (std::size_t i = 0; i < drift.v.size(); ++i)
            drift.v[i] = (1.f - m_t) * pair.target.v[i] + sd * noise.v[i];
        auto* x_t = op::add(tape, op::scale(tape, cond, m_t), tape.constant(std::move(drift)));

        // Residual target y = x_t - x_0, fixed (no gradient through it).
        nn::Tensor<float> target(pair.target.shape);
        for (std::size_t i = 0; i < target.v.size(); ++i)
            target.v[i] = x_t->val.v[i] - pair.target.v[i];

        auto* pred = model.unet.forward(tape, x_t, cond, t);
        auto* loss = op::mse_loss(tape, pred, target);
        if (!std::isfinite(loss->val.v[0]))
            throw NumericError("i2r training loss is not finite at step t=" + std::to_string(t));
        tape.backward(loss);
        total += loss->val.v[0];
    }
    // Mean-of-batch loss: scale accumulated gradients once.
    const float inv = 1.f / static_cast<float>(batch.size());
    for (auto* p : model.params())
        for (auto& g : p->grad.v) g *= inv;
    opt.step();
    return total / static_cast<double>(batch.size());
}

/// Conditioning latent for one triplet (inference path).
inline nn::Tensor<float> fusion_forward(I2RModel<float>& model, const nn::Tensor<float>& triplet) {
    nn::Tape<float> tape;
    return model.fusion.forward(tape, triplet)->val;
}

/// Epoch-driven training loop over a pair set: shuffled minibatches, one
/// optimizer step per batch. Returns (global step, loss) for every step.
inline std::vector<std::pair<int, double>> train_i2r(I2RModel<float>& model,
                                                     const std::vector<TrainingPair>& pairs,
                                                     int epochs, int batch_size,
                                                     nn::Adam<float>::Config opt_cfg,
                                                     std::uint64_t seed) {
    require(!pairs.empty(), "train_i2r: empty training set");
    require(epochs >= 1 && batch_size >= 1, "train_i2r: bad epoch/batch sizes");
    nn::Adam<float> opt(model.params(), opt_cfg);
    Rng rng(Rng::derive(seed, 0x12A));
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<std::pair<int, double>> log;
    int step = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(batch_size));
            std::vector<TrainingPair> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(pairs[order[i]]);
            log.emplace_back(++step, train_step(model, batch, opt, rng));
        }
    }
    return log;
}

/// Translate one IMU spectrogram triplet into a heatmap: start at x_T = cond
/// and walk the reverse chain with the given stride. Deterministic given the
/// seed; noise_scale 0 gives the mean path.
inline Heatmap translate(I2RModel<float>& model, const nn::Tensor<float>& triplet, int stride,
                         std::uint64_t seed, double noise_scale = 1.0) {
    require(stride >= 1 && model.schedule.steps % stride == 0,
            "translate: stride must divide the step count");
    Rng rng(Rng::derive(seed, 0x7214));

    nn::Tensor<float> cond;
    {
        nn::Tape<float> tape;
        cond = model.fusion.forward(tape, triplet)->val;
    }
    nn::Tensor<float> x = cond;
    for (int t = model.schedule.steps; t > 0; t -= stride) {
        const int t_lo = t - stride;
        nn::Tensor<float> residual;
        {
            nn::Tape<float> tape;
            auto* pred = model.unet.forward(tape, tape.constant(x), tape.constant(cond), t);
            residual = pred->val;
        }
        auto noise = gaussian_like(x.shape, rng);
        if (noise_scale != 1.0)
            for (auto& v : noise.v) v *= static_cast<float>(noise_scale);
        x = reverse_step(x, cond, residual, t, t_lo, model.schedule, noise);
        x.check_finite("translate chain");
    }

    Heatmap out(model.cfg.unet.height, model.cfg.unet.width);
    for (std::size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = std::clamp(x.v[i], 0.f, 1.f);
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

inline void save_checkpoint(const std::string& path, I2RModel<float>& model) {
    irad::Container c;
    c.kind = irad::Kind::Checkpoint;
    {
        irad::Array meta;
        meta.dtype = irad::Dtype::F32;
        std::vector<float> vals = {static_cast<float>(model.cfg.steps),
                                   static_cast<float>(model.cfg.s_max),
                                   static_cast<float>(model.cfg.fusion.in_freq),
                                   static_cast<float>(model.cfg.fusion.in_time),
                                   static_cast<float>(model.cfg.fusion.out_h),
                                   static_cast<float>(model.cfg.fusion.out_w),
                                   static_cast<float>(model.cfg.fusion.channels),
                                   static_cast<float>(model.cfg.fusion.elements),
                                   static_cast<float>(model.cfg.fusion.clamp_radius),
                                   static_cast<float>(model.cfg.unet.base),
                                   static_cast<float>(model.cfg.unet.temb_dim)};
        meta.dims = {static_cast<std::uint32_t>(vals.size())};
        meta.payload = irad::detail::to_bytes(vals);
        c.tensors.emplace_back("i2r.meta", std::move(meta));
    }
    for (auto* p : model.params()) {
        irad::Array a;
        a.dtype = irad::Dtype::F32;
        for (int d : p->value.shape) a.dims.push_back(static_cast<std::uint32_t>(d));
        a.payload = irad::detail::to_bytes(p->value.v);
        c.tensors.emplace_back(p->name, std::move(a));
    }
    irad::write_container(path, c);
}

inline I2RModel<float> load_checkpoint(const std::string& path) {
    auto c = irad::read_container(path);
    if (c.kind != irad::Kind::Checkpoint)
        throw FormatError("not a checkpoint container: " + path, 5);
    const irad::Array* meta = nullptr;
    for (const auto& [name, arr] : c.tensors)
        if (name == "i2r.meta") meta = &arr;
    if (!meta) throw FormatError("checkpoint missing i2r.meta: " + path, 8);
    const auto vals = irad::detail::from_bytes<float>(meta->payload);
    require(vals.size() >= 11, "i2r.meta too short");

    I2RConfig cfg;
    cfg.steps = static_cast<int>(vals[0]);
    cfg.s_max = vals[1];
    cfg.fusion.in_freq = static_cast<int>(vals[2]);
    cfg.fusion.in_time = static_cast<int>(vals[3]);
    cfg.fusion.out_h = static_cast<int>(vals[4]);
    cfg.fusion.out_w = static_cast<int>(vals[5]);
    cfg.fusion.channels = static_cast<int>(vals[6]);
    cfg.fusion.elements = static_cast<int>(vals[7]);
    cfg.fusion.clamp_radius = vals[8];
    cfg.unet.base = static_cast<int>(vals[9]);
    cfg.unet.temb_dim = static_cast<int>(vals[10]);
    cfg.unet.height = cfg.fusion.out_h;
    cfg.unet.width = cfg.fusion.out_w;

    I2RModel<float> model(cfg);
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

/// Plain-text metrics log: "step loss" per line.
inline void write_metrics_log(const std::string& path,
                              const std::vector<std::pair<int, double>>& entries) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open metrics log: " + path);
    f << "# step loss\n";
    for (const auto& [step, loss] : entries) f << step << " " << loss << "\n";
}

}  // namespace mmbridge::diff
