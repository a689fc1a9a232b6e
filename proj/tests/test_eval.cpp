#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <ercs/eval.hpp>

using namespace ercs;

namespace {

Tensor smooth_image(std::size_t h, std::size_t w, double fx, double fy) {
    Tensor t({h, w});
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
            t.data[r * w + c] = 0.5 + 0.4 * std::sin(fx * static_cast<double>(c)) *
                                          std::cos(fy * static_cast<double>(r));
    return t;
}

Model small_model(const ChannelSpec& trained_under) {
    Geometry g;
    g.block_side = 8;
    g.subrate = 0.2;
    g.levels = 2;
    g.p2_layers = 2;
    g.p2_channels = 4;
    g.p3_layers = 2;
    g.p3_channels = 4;
    return init_model(g, trained_under, 33);
}

}  // namespace

TEST_CASE("psnr closed forms") {
    Tensor a = smooth_image(16, 16, 0.3, 0.2);
    CHECK(psnr(a, a) == 99.0);  // cap, exactly

    // MSE = 0.01 -> 20 dB
    Tensor b = a;
    for (auto& v : b.data) v += 0.1;
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));

    // reference 0, test 0.5 -> 10*log10(4)
    Tensor zero = Tensor::zeros({4, 4});
    Tensor half = Tensor::full({4, 4}, 0.5);
    CHECK(psnr(zero, half) == doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-12));

    CHECK_THROWS_AS(psnr(zero, Tensor::zeros({4, 5})), DimensionError);
}

TEST_CASE("psnr is symmetric and noise strictly decreases it") {
    RngStream rng(1);
    Tensor a = smooth_image(16, 16, 0.4, 0.3);
    Tensor b = a;
    for (auto& v : b.data) v += 0.01 * rng.gaussian();
    CHECK(psnr(a, b) == psnr(b, a));
    Tensor c = b;
    for (auto& v : c.data) v += 0.05 * rng.gaussian();
    CHECK(psnr(a, c) < psnr(a, b));
}

TEST_CASE("evaluate: zero drop rate has zero std over trials") {
    Model model = small_model(ChannelSpec::fixed(0.0));
    std::vector<Tensor> images = {smooth_image(32, 32, 0.2, 0.3)};
    EvalResult res = evaluate(model, images, 0.0, 5, 11);
    for (int p = 0; p < 3; ++p) CHECK(res.stddev[p] == 0.0);
}

TEST_CASE("evaluate is deterministic under seed") {
    Model model = small_model(ChannelSpec::fixed(0.1));
    std::vector<Tensor> images = {smooth_image(32, 32, 0.2, 0.3),
                                  smooth_image(48, 40, 0.35, 0.15)};
    EvalResult a = evaluate(model, images, 0.1, 3, 17);
    EvalResult b = evaluate(model, images, 0.1, 3, 17);
    CHECK(a.mean == b.mean);
    CHECK(a.stddev == b.stddev);
    EvalResult c = evaluate(model, images, 0.1, 3, 18);
    CHECK(a.mean != c.mean);
}

TEST_CASE("evaluate pads odd sizes and scores on the cropped region") {
    Model model = small_model(ChannelSpec::fixed(0.0));
    std::vector<Tensor> images = {smooth_image(33, 41, 0.25, 0.2)};
    EvalResult res = evaluate(model, images, 0.0, 1, 3);
    for (int p = 0; p < 3; ++p) CHECK(std::isfinite(res.mean[p]));
}

TEST_CASE("run_grid: degenerate 1-cell table and CSV schema") {
    Model model = small_model(ChannelSpec::fixed(0.1));
    std::vector<Tensor> images = {smooth_image(32, 32, 0.2, 0.3)};
    ReportTable table = run_grid({{"fix01", &model}}, {0.1}, images, 2, 5);
    REQUIRE(table.cells.size() == 1);
    CHECK(table.cells[0].model_id == "fix01");
    CHECK(table.cells[0].train_regime == "bernoulli-fixed(0.1)");

    const std::string csv = to_csv(table);
    CHECK(csv.rfind(
              "model,train_regime,subrate,test_drop,phase,psnr_mean_db,psnr_std_db,trials\n",
              0) == 0);
    // one row per (cell, phase)
    std::size_t rows = 0;
    for (char ch : csv)
        if (ch == '\n') ++rows;
    CHECK(rows == 4);
    CHECK(csv.find("fix01,bernoulli-fixed(0.1),0.2,0.1,P1,") != std::string::npos);
}

TEST_CASE("run_grid records failed cells as error markers") {
    Model model = small_model(ChannelSpec::fixed(0.1));
    ReportTable table = run_grid({{"m", &model}}, {0.1}, {}, 2, 5);
    REQUIRE(table.cells.size() == 1);
    CHECK(table.cells[0].failed);
    CHECK(to_csv(table).find("ERROR") != std::string::npos);
}

TEST_CASE("grid shape of the baseline-vs-fix comparison") {
    Model baseline = small_model(ChannelSpec::fixed(0.0));
    Model fix = small_model(ChannelSpec::fixed(0.1));
    std::vector<Tensor> images = {smooth_image(32, 32, 0.2, 0.3)};
    ReportTable table = run_grid({{"baseline", &baseline}, {"fix01", &fix}},
                                 {0.0, 0.1, 0.2, 0.3}, images, 2, 5);
    CHECK(table.cells.size() == 8);
}

TEST_CASE("regime labels") {
    CHECK(regime_label(ChannelSpec::fixed(0.2)) == "bernoulli-fixed(0.2)");
    CHECK(regime_label(ChannelSpec::uniform_range(0.0, 0.1)) == "bernoulli-uniform(0,0.1)");
    ChannelSpec burst = ChannelSpec::fixed(0.1, ChannelModel::burst);
    CHECK(regime_label(burst) == "burst-fixed(0.1)");
}
