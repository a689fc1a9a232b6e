#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <ercs/train.hpp>

using namespace ercs;

namespace {

Tensor smooth_image(std::size_t h, std::size_t w, double fx, double fy, double phase) {
    Tensor t({h, w});
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
            t.data[r * w + c] =
                0.5 + 0.5 * std::sin(fx * static_cast<double>(c) +
                                     fy * static_cast<double>(r) + phase) *
                          std::cos(0.3 * fy * static_cast<double>(r));
    return t;
}

std::vector<Tensor> tiny_corpus() {
    std::vector<Tensor> imgs;
    for (int i = 0; i < 4; ++i)
        imgs.push_back(smooth_image(64, 64, 0.1 + 0.05 * i, 0.07 + 0.04 * i, 0.9 * i));
    return imgs;
}

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.geom.block_side = 8;
    cfg.geom.subrate = 0.2;
    cfg.geom.levels = 2;
    cfg.geom.p2_layers = 2;
    cfg.geom.p2_channels = 4;
    cfg.geom.p3_layers = 2;
    cfg.geom.p3_channels = 4;
    cfg.channel = ChannelSpec::fixed(0.1);
    cfg.patch_count = 24;
    cfg.patch_side = 32;
    cfg.batch_size = 8;
    cfg.epochs = {3, 2, 2};
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("adam_step matches the hand-computed scalar trace") {
    ParamSet params;
    params.add("p", Tensor({1}, {0.0}));
    AdamState state;  // defaults lr 1e-3, beta1 0.9, beta2 0.999, eps 1e-8
    std::map<std::string, Tensor> grads;
    grads["p"] = Tensor({1}, {1.0});

    adam_step(params, grads, state);
    CHECK(state.t == 1);
    CHECK(state.m.at("p").data[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(state.v.at("p").data[0] == doctest::Approx(0.001).epsilon(1e-12));
    // mhat = 1, vhat = 1, p' = -1e-3 / (1 + 1e-8)
    CHECK(params.param("p").data[0] ==
          doctest::Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-12));

    // t = 2, 3 against an independently evaluated trace
    double m = 0.1, v = 0.001, p = -1e-3 / (1.0 + 1e-8);
    for (std::size_t t = 2; t <= 3; ++t) {
        m = 0.9 * m + 0.1 * 1.0;
        v = 0.999 * v + 0.001 * 1.0;
        const double mhat = m / (1.0 - std::pow(0.9, static_cast<double>(t)));
        const double vhat = v / (1.0 - std::pow(0.999, static_cast<double>(t)));
        p -= 1e-3 * mhat / (std::sqrt(vhat) + 1e-8);
        adam_step(params, grads, state);
        CHECK(params.param("p").data[0] == doctest::Approx(p).epsilon(1e-12));
    }
}

TEST_CASE("adam fixed point under zero gradient") {
    ParamSet params;
    params.add("p", Tensor({3}, {1.0, -2.0, 0.5}));
    AdamState state;
    std::map<std::string, Tensor> grads;
    grads["p"] = Tensor::zeros({3});
    for (int i = 0; i < 50; ++i) adam_step(params, grads, state);
    CHECK(params.param("p").data == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("adam unit-step property under constant gradient") {
    ParamSet params;
    params.add("p", Tensor({1}, {0.0}));
    AdamState state;
    std::map<std::string, Tensor> grads;
    grads["p"] = Tensor({1}, {0.37});
    double prev = 0.0;
    double last_update = 0.0;
    for (int i = 0; i < 10000; ++i) {
        adam_step(params, grads, state);
        last_update = params.param("p").data[0] - prev;
        prev = params.param("p").data[0];
    }
    CHECK(std::abs(std::abs(last_update) - state.lr) < 0.01 * state.lr);
}

TEST_CASE("adam aborts on non-finite gradient") {
    ParamSet params;
    params.add("p", Tensor({1}, {0.0}));
    AdamState state;
    std::map<std::string, Tensor> grads;
    grads["p"] = Tensor({1}, {std::numeric_limits<double>::quiet_NaN()});
    CHECK_THROWS_WITH_AS(adam_step(params, grads, state), doctest::Contains("'p'"),
                         NumericError);
}

TEST_CASE("extract_patches: degenerate counts and whole-image patches") {
    RngStream rng(1);
    auto corpus = tiny_corpus();
    CHECK(extract_patches(corpus, 32, 0, rng).empty());

    auto whole = extract_patches(corpus, 64, 3, rng);
    CHECK(whole.size() == 3);
    bool found = false;
    for (const auto& img : corpus)
        if (img.data == whole[0].data) found = true;
    CHECK(found);

    auto patches = extract_patches(corpus, 32, 100, rng);
    double mean = 0.0;
    for (const auto& p : patches)
        for (double v : p.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            mean += v;
        }
    mean /= 100.0 * 32.0 * 32.0;
    CHECK(mean > 0.2);
    CHECK(mean < 0.8);
}

TEST_CASE("extract_patches: undersized images skipped, all-undersized rejected") {
    RngStream rng(2);
    std::vector<Tensor> imgs = {Tensor::zeros({8, 8})};
    CHECK_THROWS_AS(extract_patches(imgs, 32, 5, rng), ConfigError);
    imgs.push_back(Tensor::full({40, 40}, 0.5));
    auto ok = extract_patches(imgs, 32, 5, rng);
    CHECK(ok.size() == 5);
}

TEST_CASE("epochs = 0 returns parameters unchanged") {
    auto cfg = tiny_config();
    cfg.epochs = {0, 0, 0};
    RngStream rng(cfg.seed);
    auto dataset = extract_patches(tiny_corpus(), cfg.patch_side, cfg.patch_count, rng);
    Model model = init_model(cfg.geom, cfg.channel, cfg.seed);
    Model before = model;
    auto curve = train_phase(Phase::P1, model, cfg, dataset);
    CHECK(curve.empty());
    for (const auto& [name, p] : model.params.params)
        CHECK(p.data == before.params.params.at(name).data);
}

TEST_CASE("training is bit-deterministic under (config, seed)") {
    auto cfg = tiny_config();
    auto run = [&] {
        RngStream rng(cfg.seed);
        auto dataset = extract_patches(tiny_corpus(), cfg.patch_side, cfg.patch_count, rng);
        TrainReport report;
        return std::make_pair(run_schedule(cfg, dataset, &report), report);
    };
    auto [m1, r1] = run();
    auto [m2, r2] = run();
    for (const auto& [name, p] : m1.params.params)
        CHECK(p.data == m2.params.params.at(name).data);
    for (int i = 0; i < 3; ++i) CHECK(r1.loss_curves[i] == r2.loss_curves[i]);
}

TEST_CASE("loss decreases during P1 training") {
    auto cfg = tiny_config();
    cfg.epochs = {10, 0, 0};
    RngStream rng(cfg.seed);
    auto dataset = extract_patches(tiny_corpus(), cfg.patch_side, cfg.patch_count, rng);
    Model model = init_model(cfg.geom, cfg.channel, cfg.seed);
    auto curve = train_phase(Phase::P1, model, cfg, dataset);
    REQUIRE(curve.size() == 10);
    CHECK(curve.back() < curve.front());
    for (double v : curve) CHECK(std::isfinite(v));
}

TEST_CASE("drawn training rates stay inside the regime support") {
    auto spec = ChannelSpec::uniform_range(0.1, 0.2);
    RngStream rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double r = draw_rate(spec, rng);
        CHECK(r >= 0.1);
        CHECK(r <= 0.2);
    }
}

TEST_CASE("trainability gate: representable target reaches tiny loss") {
    // subrate 1, no loss, P1 only: identity is representable
    TrainConfig cfg;
    cfg.geom.block_side = 8;
    cfg.geom.subrate = 1.0;
    cfg.geom.levels = 2;
    cfg.geom.p2_layers = 2;
    cfg.geom.p2_channels = 4;
    cfg.geom.p3_layers = 2;
    cfg.geom.p3_channels = 4;
    cfg.channel = ChannelSpec::fixed(0.0);
    cfg.patch_count = 100;
    cfg.patch_side = 16;
    cfg.batch_size = 16;
    cfg.epochs = {200, 0, 0};
    cfg.lr = {1e-2, 1e-3, 1e-3};
    cfg.seed = 7;
    RngStream rng(cfg.seed);
    auto dataset = extract_patches(tiny_corpus(), cfg.patch_side, cfg.patch_count, rng);
    Model model = init_model(cfg.geom, cfg.channel, cfg.seed);
    auto curve = train_phase(Phase::P1, model, cfg, dataset);
    CHECK(curve.back() < 1e-4);
}
