#include <catch2/catch_amalgamated.hpp>

#include "mmbridge/diffusion.hpp"
#include "mmbridge/nn/grad_check.hpp"

using namespace mmbridge;
using namespace mmbridge::diff;
namespace op = mmbridge::nn::ops;

namespace {

nn::Tensor<float> random_tensor(std::vector<int> shape, std::uint64_t seed, float lo = 0.f,
                                float hi = 1.f) {
    nn::Tensor<float> t(std::move(shape));
    Rng rng(seed);
    for (auto& v : t.v) v = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

I2RConfig tiny_config() {
    I2RConfig cfg;
    cfg.fusion.in_freq = 17;
    cfg.fusion.in_time = 25;
    cfg.fusion.out_h = 16;
    cfg.fusion.out_w = 16;
    cfg.unet.height = 16;
    cfg.unet.width = 16;
    cfg.unet.base = 4;
    cfg.steps = 50;
    return cfg;
}

}  // namespace

TEST_CASE("bridge schedule endpoints and midpoint") {
    auto s = build_schedule(200, 1.0);
    CHECK(s.m[0] == 0.0);
    CHECK(s.m[200] == 1.0);
    CHECK(s.delta[0] == 0.0);
    CHECK(s.delta[200] == 0.0);
    CHECK(s.delta[100] == Catch::Approx(0.5).epsilon(1e-15));
    for (int t = 1; t <= 200; ++t) CHECK(s.delta_trans[t] >= 0.0);
    CHECK_THROWS_AS(build_schedule(1, 1.0), ConfigError);
    CHECK_THROWS_AS(build_schedule(10, 0.0), ConfigError);
}

TEST_CASE("marginal and transition compose consistently at every step") {
    auto s = build_schedule(200, 1.3);
    for (int t = 1; t <= 200; ++t) {
        const auto c = transition_coeffs(t, s);
        // Mean composition: a_t (1-m_{t-1}) = 1-m_t and a_t m_{t-1} + b_t = m_t.
        CHECK(std::abs(c.on_prev * (1.0 - s.m[t - 1]) - (1.0 - s.m[t])) <= 1e-12);
        CHECK(std::abs(c.on_prev * s.m[t - 1] + c.on_cond - s.m[t]) <= 1e-12);
        // Variance composition: delta_{t|t-1} + a_t^2 delta_{t-1} = delta_t.
        CHECK(std::abs(c.variance + c.on_prev * c.on_prev * s.delta[t - 1] - s.delta[t]) <= 1e-12);
    }
}

TEST_CASE("transition coefficient at t=1 is 1 - 1/T") {
    auto s = build_schedule(200, 1.0);
    const auto c = transition_coeffs(1, s);
    CHECK(c.on_prev == Catch::Approx(1.0 - 1.0 / 200.0).epsilon(1e-15));
    CHECK_THROWS_AS(transition_coeffs(0, s), std::invalid_argument);
    CHECK_THROWS_AS(transition_coeffs(201, s), std::invalid_argument);
}

TEST_CASE("forward_sample pins both endpoints and the noiseless midpoint") {
    auto s = build_schedule(200, 1.0);
    auto x0 = random_tensor({1, 4, 4}, 1);
    auto cond = random_tensor({1, 4, 4}, 2);
    nn::Tensor<float> zero({1, 4, 4});
    auto noise = random_tensor({1, 4, 4}, 3, -1.f, 1.f);

    auto at0 = forward_sample(x0, cond, 0, noise, s);
    for (std::size_t i = 0; i < x0.v.size(); ++i) CHECK(at0.v[i] == x0.v[i]);

    auto atT = forward_sample(x0, cond, 200, noise, s);
    for (std::size_t i = 0; i < x0.v.size(); ++i) CHECK(atT.v[i] == cond.v[i]);

    auto mid = forward_sample(x0, cond, 100, zero, s);
    for (std::size_t i = 0; i < x0.v.size(); ++i)
        CHECK(mid.v[i] == Catch::Approx(0.5 * (x0.v[i] + cond.v[i])).margin(1e-6));
}

TEST_CASE("forward samples match the marginal moments over 10000 draws") {
    auto s = build_schedule(200, 1.0);
    auto x0 = random_tensor({1, 3, 3}, 4);
    auto cond = random_tensor({1, 3, 3}, 5);
    const int t = 57;
    const int n = 10000;
    Rng rng(99);

    std::vector<double> sum(x0.v.size(), 0.0), sum2(x0.v.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        auto noise = gaussian_like(x0.shape, rng);
        auto xt = forward_sample(x0, cond, t, noise, s);
        for (std::size_t j = 0; j < xt.v.size(); ++j) {
            sum[j] += xt.v[j];
            sum2[j] += static_cast<double>(xt.v[j]) * xt.v[j];
        }
    }
    const double mean_tol = 4.0 * std::sqrt(s.delta[t] / n);
    for (std::size_t j = 0; j < x0.v.size(); ++j) {
        const double mean = sum[j] / n;
        const double expect = (1.0 - s.m[t]) * x0.v[j] + s.m[t] * cond.v[j];
        CHECK(std::abs(mean - expect) <= mean_tol);
        const double var = sum2[j] / n - mean * mean;
        CHECK(var == Catch::Approx(s.delta[t]).epsilon(0.10));
    }
}

TEST_CASE("reverse_step with the exact residual inverts the mean path") {
    auto s = build_schedule(200, 1.0);
    auto x0 = random_tensor({1, 4, 4}, 7);
    auto cond = random_tensor({1, 4, 4}, 8);
    nn::Tensor<float> zero({1, 4, 4});

    for (int t : {200, 150, 77, 2, 1}) {
        // Noiseless forward state at t and its exact residual x_t - x_0.
        auto x_t = forward_sample(x0, cond, t, zero, s);
        nn::Tensor<float> residual(x_t.shape);
        for (std::size_t i = 0; i < residual.v.size(); ++i) residual.v[i] = x_t.v[i] - x0.v[i];
        auto x_prev = reverse_step(x_t, cond, residual, t, t - 1, s, zero);
        auto expect = forward_sample(x0, cond, t - 1, zero, s);
        for (std::size_t i = 0; i < x_prev.v.size(); ++i)
            CHECK(x_prev.v[i] == Catch::Approx(expect.v[i]).margin(1e-6));
    }
}

TEST_CASE("full reverse chain with a perfect predictor returns x0") {
    auto s = build_schedule(200, 1.0);
    auto x0 = random_tensor({1, 4, 4}, 9);
    auto cond = random_tensor({1, 4, 4}, 10);
    nn::Tensor<float> zero({1, 4, 4});

    nn::Tensor<float> x = cond;  // x_T = cond
    for (int t = 200; t >= 1; --t) {
        // The exact residual at the current state is x - x0.
        nn::Tensor<float> residual(x.shape);
        for (std::size_t i = 0; i < residual.v.size(); ++i) residual.v[i] = x.v[i] - x0.v[i];
        x = reverse_step(x, cond, residual, t, t - 1, s, zero);
    }
    for (std::size_t i = 0; i < x.v.size(); ++i)
        CHECK(x.v[i] == Catch::Approx(x0.v[i]).margin(1e-5));
}

TEST_CASE("reverse variance is zero at t=1 and delta_{T-1} at t=T") {
    auto s = build_schedule(200, 1.0);
    CHECK(reverse_coeffs(1, 0, s).variance == 0.0);
    CHECK(reverse_coeffs(200, 199, s).variance == Catch::Approx(s.delta[199]).epsilon(1e-12));
}

TEST_CASE("fusion of an all-zero triplet with zero biases is an all-zero latent") {
    auto cfg = tiny_config();
    I2RModel<float> model(cfg);
    model.init(3);
    nn::Tensor<float> triplet({3, cfg.fusion.in_freq, cfg.fusion.in_time});
    auto latent = fusion_forward(model, triplet);
    for (float v : latent.v) CHECK(v == 0.f);
}

TEST_CASE("saturated gates make the latent depend only on the open axis") {
    auto cfg = tiny_config();
    I2RModel<float> model(cfg);
    model.init(4);
    // exp(-(+-200)) saturates the sigmoid to exactly 1 / exactly 0 in float.
    model.fusion.gate_b[0].value.v[0] = 200.f;
    model.fusion.gate_b[1].value.v[0] = -200.f;
    model.fusion.gate_b[2].value.v[0] = -200.f;
    for (int a = 0; a < 3; ++a)
        std::fill(model.fusion.gate_w[a].value.v.begin(), model.fusion.gate_w[a].value.v.end(), 0.f);

    auto triplet = random_tensor({3, cfg.fusion.in_freq, cfg.fusion.in_time}, 11);
    auto base = fusion_forward(model, triplet);

    auto perturbed = triplet;
    Rng rng(12);
    const std::size_t axis_len = static_cast<std::size_t>(cfg.fusion.in_freq) * cfg.fusion.in_time;
    for (std::size_t i = axis_len; i < 3 * axis_len; ++i)
        perturbed.v[i] = static_cast<float>(rng.uniform());
    auto same = fusion_forward(model, perturbed);
    for (std::size_t i = 0; i < base.v.size(); ++i) CHECK(base.v[i] == same.v[i]);

    // Perturbing the open axis must change the latent.
    auto changed_in = triplet;
    for (std::size_t i = 0; i < axis_len; ++i) changed_in.v[i] = static_cast<float>(rng.uniform());
    auto changed = fusion_forward(model, changed_in);
    bool any_diff = false;
    for (std::size_t i = 0; i < base.v.size(); ++i) any_diff = any_diff || base.v[i] != changed.v[i];
    CHECK(any_diff);
}

TEST_CASE("fusion module gradients pass the finite-difference check") {
    FusionConfig fc;
    fc.in_freq = 9;
    fc.in_time = 11;
    fc.out_h = 8;
    fc.out_w = 8;
    fc.channels = 2;
    fc.elements = 4;
    FusionModule<double> fusion(fc);
    Rng rng(21);
    for (auto* p : fusion.params())
        for (auto& v : p->value.v) v = rng.uniform(-0.5, 0.5);

    nn::Tensor<double> triplet({3, fc.in_freq, fc.in_time});
    for (auto& v : triplet.v) v = rng.uniform(0.0, 1.0);

    auto build = [&](nn::Tape<double>& tape) {
        auto* latent = fusion.forward(tape, triplet);
        return op::mean_all(tape, op::mul(tape, latent, latent));
    };
    CHECK(nn::grad_check(build, fusion.params(), 1e-5).max_rel_err <= 1e-4);
}

TEST_CASE("joint fusion + bridge + loss path passes the finite-difference check") {
    FusionConfig fc;
    fc.in_freq = 9;
    fc.in_time = 11;
    fc.out_h = 8;
    fc.out_w = 8;
    fc.channels = 2;
    fc.elements = 4;
    FusionModule<double> fusion(fc);
    Rng rng(22);
    for (auto* p : fusion.params())
        for (auto& v : p->value.v) v = rng.uniform(-0.5, 0.5);

    nn::Tensor<double> triplet({3, fc.in_freq, fc.in_time});
    for (auto& v : triplet.v) v = rng.uniform(0.0, 1.0);
    nn::Tensor<double> x0({1, 8, 8}), noise({1, 8, 8}), target({1, 8, 8});
    for (auto& v : x0.v) v = rng.uniform(0.0, 1.0);
    for (auto& v : noise.v) v = rng.gaussian();
    for (auto& v : target.v) v = rng.uniform(-0.5, 0.5);

    auto s = build_schedule(50, 1.0);
    const int t = 31;
    auto build = [&](nn::Tape<double>& tape) {
        auto* cond = fusion.forward(tape, triplet);
        nn::Tensor<double> drift(x0.shape);
        const double m_t = s.m[t], sd = std::sqrt(s.delta[t]);
        for (std::size_t i = 0; i < drift.v.size(); ++i)
            drift.v[i] = (1.0 - m_t) * x0.v[i] + sd * noise.v[i];
        auto* x_t = op::add(tape, op::scale(tape, cond, m_t), tape.constant(drift));
        return op::mse_loss(tape, x_t, target);
    };
    CHECK(nn::grad_check(build, fusion.params(), 1e-5).max_rel_err <= 1e-4);
}

TEST_CASE("translate with a zero predictor and zero noise returns the latent") {
    auto cfg = tiny_config();
    I2RModel<float> model(cfg);
    model.init(5);  // the UNet head is zero-initialized: residual prediction is 0
    auto triplet = random_tensor({3, cfg.fusion.in_freq, cfg.fusion.in_time}, 13);
    auto cond = fusion_forward(model, triplet);
    auto out = translate(model, triplet, 1, 77, 0.0);
    for (std::size_t i = 0; i < out.v.size(); ++i)
        CHECK(out.v[i] == Catch::Approx(std::clamp(cond.v[i], 0.f, 1.f)).margin(2e-5));
}

TEST_CASE("translate is deterministic given the seed") {
    auto cfg = tiny_config();
    I2RModel<float> model(cfg);
    model.init(6);
    auto triplet = random_tensor({3, cfg.fusion.in_freq, cfg.fusion.in_time}, 14);
    auto a = translate(model, triplet, 1, 123);
    auto b = translate(model, triplet, 1, 123);
    CHECK(a.v == b.v);
    auto c = translate(model, triplet, 1, 124);
    CHECK(a.v != c.v);
}

TEST_CASE("translate honors the stride contract") {
    auto cfg = tiny_config();
    I2RModel<float> model(cfg);
    model.init(7);
    auto triplet = random_tensor({3, cfg.fusion.in_freq, cfg.fusion.in_time}, 15);
    CHECK_NOTHROW(translate(model, triplet, 5, 1));
    CHECK_NOTHROW(translate(model, triplet, 50, 1));
    CHECK_THROWS_AS(translate(model, triplet, 7, 1), std::invalid_argument);
}

namespace {

std::vector<TrainingPair> toy_pairs(const I2RConfig& cfg, int count, std::uint64_t seed) {
    // Distinct smooth targets per class; the triplet encodes the class too.
    std::vector<TrainingPair> pairs;
    Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        const int cls = i % 2;
        TrainingPair p;
        p.label = cls;
        p.source = nn::Tensor<float>({3, cfg.fusion.in_freq, cfg.fusion.in_time});
        const std::size_t axis_len = p.source.numel() / 3;
        for (int f = 0; f < cfg.fusion.in_freq; ++f)
            for (int t = 0; t < cfg.fusion.in_time; ++t) {
                const double base = cls == 0 ? std::sin(0.4 * f) : std::cos(0.3 * t);
                p.source.v[static_cast<std::size_t>(f) * cfg.fusion.in_time + t] =
                    static_cast<float>(0.5 + 0.4 * base + 0.02 * rng.uniform());
            }
        for (std::size_t k = axis_len; k < p.source.numel(); ++k)
            p.source.v[k] = p.source.v[k % axis_len];
        p.target = nn::Tensor<float>({1, cfg.unet.height, cfg.unet.width});
        for (int r = 0; r < cfg.unet.height; ++r)
            for (int c = 0; c < cfg.unet.width; ++c) {
                const double v = cls == 0 ? (r > cfg.unet.height / 2 ? 0.9 : 0.05)
                                          : (c > cfg.unet.width / 2 ? 0.9 : 0.05);
                p.target.v[static_cast<std::size_t>(r) * cfg.unet.width + c] = static_cast<float>(v);
            }
        pairs.push_back(std::move(p));
    }
    return pairs;
}

}  // namespace

TEST_CASE("training loss falls by half within 200 steps on a 16-pair toy set") {
    auto cfg = tiny_config();
    I2RModel<float> model(cfg);
    model.init(1001);
    auto pairs = toy_pairs(cfg, 16, 42);

    nn::Adam<float>::Config ocfg;
    ocfg.lr = 1e-3;
    ocfg.weight_decay = 1e-3;
    nn::Adam<float> opt(model.params(), ocfg);
    Rng rng(Rng::derive(4242, 0x7E));

    double initial = -1, best = 1e300;
    for (int step = 0; step < 200; ++step) {
        std::vector<TrainingPair> batch;
        for (int b = 0; b < 4; ++b) batch.push_back(pairs[rng.below(pairs.size())]);
        const double loss = train_step(model, batch, opt, rng);
        if (step == 0) initial = loss;
        best = std::min(best, loss);
    }
    INFO("initial " << initial << " best " << best);
    CHECK(best <= 0.5 * initial);
}

TEST_CASE("training is bit-reproducible given the seeds") {
    auto cfg = tiny_config();
    auto run = [&] {
        I2RModel<float> model(cfg);
        model.init(2002);
        auto pairs = toy_pairs(cfg, 8, 7);
        nn::Adam<float> opt(model.params(), {});
        Rng rng(555);
        std::vector<double> losses;
        for (int step = 0; step < 10; ++step) {
            std::vector<TrainingPair> batch;
            for (int b = 0; b < 2; ++b) batch.push_back(pairs[rng.below(pairs.size())]);
            losses.push_back(train_step(model, batch, opt, rng));
        }
        return std::pair{losses, model.params()[0]->value.v};
    };
    auto a = run();
    auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("i2r checkpoints round-trip through the container format") {
    auto cfg = tiny_config();
    I2RModel<float> model(cfg);
    model.init(3003);
    const std::string path = "i2r_ckpt_test.irad";
    save_checkpoint(path, model);
    auto loaded = load_checkpoint(path);
    CHECK(loaded.cfg.steps == cfg.steps);
    CHECK(loaded.cfg.fusion.out_h == cfg.fusion.out_h);
    auto pa = model.params();
    auto pb = loaded.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value.v == pb[i]->value.v);
    std::remove(path.c_str());
}
