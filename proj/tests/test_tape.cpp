#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <ercs/gradcheck.hpp>
#include <ercs/rng.hpp>
#include <ercs/tape.hpp>

using namespace ercs;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, RngStream& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = scale * rng.gaussian();
    return t;
}

}  // namespace

TEST_CASE("linear identity and hand cases") {
    Tape tape;
    auto w = tape.leaf(Tensor::identity(3));
    auto x = tape.leaf(Tensor({3}, {1, 2, 3}));
    auto y = tape.linear(w, x);
    CHECK(tape.value(y).data == std::vector<double>{1, 2, 3});

    // W = 2x2 ones, x = (1,1), b = (0.5,-0.5) -> (2.5, 1.5)
    auto w2 = tape.leaf(Tensor::full({2, 2}, 1.0));
    auto x2 = tape.leaf(Tensor({2}, {1, 1}));
    auto b2 = tape.leaf(Tensor({2}, {0.5, -0.5}));
    auto y2 = tape.linear(w2, x2, b2);
    CHECK(tape.value(y2).data[0] == doctest::Approx(2.5));
    CHECK(tape.value(y2).data[1] == doctest::Approx(1.5));

    auto wz = tape.leaf(Tensor::zeros({4, 3}));
    auto yz = tape.linear(wz, x);
    for (double v : tape.value(yz).data) CHECK(v == 0.0);
}

TEST_CASE("linear shape mismatch names both shapes") {
    Tape tape;
    auto w = tape.leaf(Tensor::zeros({2, 3}));
    auto x = tape.leaf(Tensor::zeros({4}));
    CHECK_THROWS_WITH_AS(tape.linear(w, x),
                         doctest::Contains("(2x3)"), DimensionError);
}

TEST_CASE("linear linearity property") {
    RngStream rng(11);
    Tensor W = random_tensor({5, 7}, rng);
    Tensor x1 = random_tensor({7}, rng);
    Tensor x2 = random_tensor({7}, rng);
    const double a = 1.7;
    Tensor combo({7});
    for (std::size_t i = 0; i < 7; ++i) combo.data[i] = a * x1.data[i] + x2.data[i];
    Tape tape;
    auto ws = tape.leaf(W);
    auto lhs = tape.linear(ws, tape.leaf(combo));
    auto y1 = tape.linear(ws, tape.leaf(x1));
    auto y2 = tape.linear(ws, tape.leaf(x2));
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(tape.value(lhs).data[i] ==
              doctest::Approx(a * tape.value(y1).data[i] + tape.value(y2).data[i])
                  .epsilon(1e-12));
}

TEST_CASE("conv2d identity kernel, hand sum, bias-only") {
    RngStream rng(3);
    Tensor input = random_tensor({1, 4, 4}, rng);
    Tape tape;
    auto x = tape.leaf(input);

    // 1x1 kernel of value 1: output == input
    auto k1 = tape.leaf(Tensor({1, 1, 1, 1}, {1.0}));
    auto b0 = tape.leaf(Tensor({1}));
    auto y1 = tape.conv2d(x, k1, b0, 0);
    for (std::size_t i = 0; i < input.numel(); ++i)
        CHECK(tape.value(y1).data[i] == input.data[i]);

    // 3x3 all-ones kernel on constant input: interior 9c, border smaller
    auto c = tape.leaf(Tensor::full({1, 4, 4}, 2.0));
    auto k3 = tape.leaf(Tensor::full({1, 1, 3, 3}, 1.0));
    auto y3 = tape.conv2d(c, k3, b0, 1);
    CHECK(tape.value(y3).at(0, 1, 1) == doctest::Approx(18.0));
    CHECK(tape.value(y3).at(0, 0, 0) == doctest::Approx(8.0));

    // zero kernels + bias beta -> constant beta
    auto kz = tape.leaf(Tensor::zeros({1, 1, 3, 3}));
    auto bb = tape.leaf(Tensor({1}, {0.25}));
    auto yb = tape.conv2d(x, kz, bb, 1);
    for (double v : tape.value(yb).data) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("conv2d rejects even kernels") {
    Tape tape;
    auto x = tape.leaf(Tensor::zeros({1, 4, 4}));
    auto k = tape.leaf(Tensor::zeros({1, 1, 2, 2}));
    auto b = tape.leaf(Tensor({1}));
    CHECK_THROWS_AS(tape.conv2d(x, k, b, 0), ConfigError);
}

TEST_CASE("relu forward and gradient") {
    Tape tape;
    auto x = tape.leaf(Tensor({3}, {-1, 0, 2}));
    auto y = tape.relu(x);
    CHECK(tape.value(y).data == std::vector<double>{0, 0, 2});

    Tape t2;
    auto x2 = t2.leaf(Tensor({2}, {-1, 2}));
    auto loss = t2.mse(t2.relu(x2), Tensor::zeros({2}));
    t2.backward(loss);
    CHECK(t2.grad(x2).data[0] == 0.0);
    CHECK(t2.grad(x2).data[1] == doctest::Approx(2.0));  // d/dx of x^2/2 elements: 2*2/2
}

TEST_CASE("mul_mask forced values and idempotence") {
    Tape tape;
    auto x = tape.leaf(Tensor({3}, {3, 5, 7}));
    Tensor m({3}, {1, 0, 1});
    auto y = tape.mul_mask(x, m);
    CHECK(tape.value(y).data == std::vector<double>{3, 0, 7});
    auto yy = tape.mul_mask(y, m);
    CHECK(tape.value(yy).data == tape.value(y).data);  // exact idempotence

    auto ones = tape.mul_mask(x, Tensor::full({3}, 1.0));
    CHECK(tape.value(ones).data == tape.value(x).data);
    auto zeros = tape.mul_mask(x, Tensor::zeros({3}));
    CHECK(tape.value(zeros).data == std::vector<double>{0, 0, 0});
}

TEST_CASE("mse hand cases") {
    Tape tape;
    auto p = tape.leaf(Tensor({2}, {0, 2}));
    auto l = tape.mse(p, Tensor({2}, {1, 0}));
    CHECK(tape.value(l).data[0] == doctest::Approx(2.5));

    auto same = tape.mse(p, Tensor({2}, {0, 2}));
    CHECK(tape.value(same).data[0] == 0.0);

    auto unit = tape.mse(tape.leaf(Tensor::full({5}, 3.0)), Tensor::full({5}, 2.0));
    CHECK(tape.value(unit).data[0] == doctest::Approx(1.0));
}

TEST_CASE("backward: 1x1 chain rule and disconnected leaf") {
    Tape tape;
    auto w = tape.leaf(Tensor({1, 1}, {1.0}));
    auto x = tape.leaf(Tensor({1}, {1.0}));
    auto unused = tape.leaf(Tensor({3}, {9, 9, 9}));
    auto loss = tape.mse(tape.linear(w, x), Tensor({1}, {0.0}));
    tape.backward(loss);
    CHECK(tape.grad(w).data[0] == doctest::Approx(2.0));  // dL/dW = 2*x*x
    for (double v : tape.grad(unused).data) CHECK(v == 0.0);
}

TEST_CASE("backward rejects non-scalar loss") {
    Tape tape;
    auto x = tape.leaf(Tensor({2}, {1, 2}));
    CHECK_THROWS_AS(tape.backward(x), NumericError);
}

TEST_CASE("gradient accumulation: parameter reused on two paths") {
    // loss = mse(Wx + Wx, t): gradient doubles vs single path
    Tape tape;
    auto w = tape.leaf(Tensor({1, 1}, {1.5}));
    auto x = tape.leaf(Tensor({1}, {2.0}));
    auto y = tape.add(tape.linear(w, x), tape.linear(w, x));
    auto loss = tape.mse(y, Tensor({1}, {0.0}));
    tape.backward(loss);
    // y = 2Wx = 6, dL/dW = 2*y*2x = 48
    CHECK(tape.grad(w).data[0] == doctest::Approx(48.0));
}

TEST_CASE("finite differences across the operator set") {
    RngStream rng(5);
    ParamSet params;
    params.add("w", random_tensor({4, 6}, rng, 0.5));
    params.add("b", random_tensor({4}, rng, 0.5));
    params.add("k", random_tensor({2, 1, 3, 3}, rng, 0.5));
    params.add("kb", random_tensor({2}, rng, 0.5));
    Tensor input = random_tensor({6}, rng);
    Tensor img = random_tensor({1, 4, 4}, rng);
    // keep ReLU probes away from the kink
    for (auto& v : img.data)
        if (std::abs(v) < 1e-3) v = 1e-3;
    Tensor mask({4}, {1, 0, 1, 1});
    Tensor target = random_tensor({2, 4, 4}, rng);
    Tensor target2 = random_tensor({4}, rng);

    using Binding = std::map<std::string, Tape::Slot>;
    auto build = [&](ParamSet& p, Tape& tape) {
        Binding bind;
        for (const auto& [name, t] : p.params) bind[name] = tape.leaf(t);
        auto lin = tape.linear(bind["w"], tape.leaf(input), bind["b"]);
        auto masked = tape.mul_mask(lin, mask);
        auto conv = tape.conv2d(tape.relu(tape.leaf(img)), bind["k"], bind["kb"], 1);
        auto l1 = tape.mse(masked, target2);
        auto l2 = tape.mse(conv, target);
        return std::make_pair(tape.add(l1, l2), bind);
    };
    auto loss = [&](ParamSet& p) {
        Tape tape;
        auto [slot, bind] = build(p, tape);
        return tape.value(slot).data[0];
    };
    auto analytic = [&](ParamSet& p) {
        Tape tape;
        auto [slot, bind] = build(p, tape);
        tape.backward(slot);
        for (auto& [name, g] : p.grads) g = tape.grad(bind.at(name));
    };
    auto res = finite_diff_check(loss, analytic, params, 1e-5);
    CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("finite_diff_check is exact on quadratics") {
    ParamSet params;
    params.add("w", Tensor({1}, {3.0}));
    auto loss = [](ParamSet& p) { return p.param("w").data[0] * p.param("w").data[0]; };
    auto analytic = [](ParamSet& p) { p.grad("w").data[0] = 2.0 * p.param("w").data[0]; };
    auto res = finite_diff_check(loss, analytic, params, 1e-5);
    CHECK(res.max_rel_error < 1e-9);
}

TEST_CASE("finite_diff_check rejects bad eps") {
    ParamSet params;
    params.add("w", Tensor({1}, {1.0}));
    auto loss = [](ParamSet&) { return 0.0; };
    auto analytic = [](ParamSet&) {};
    CHECK_THROWS_AS(finite_diff_check(loss, analytic, params, 0.5), ConfigError);
}

TEST_CASE("replay determinism: identical leaves give bit-identical outputs") {
    RngStream rng(17);
    Tensor W = random_tensor({8, 8}, rng);
    Tensor x = random_tensor({8}, rng);
    auto run = [&] {
        Tape tape;
        auto y = tape.relu(tape.linear(tape.leaf(W), tape.leaf(x)));
        return tape.value(y).data;
    };
    CHECK(run() == run());
}

TEST_CASE("operations on finite inputs stay finite") {
    RngStream rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        Tape tape;
        auto w = tape.leaf(random_tensor({6, 6}, rng, 10.0));
        auto x = tape.leaf(random_tensor({6}, rng, 10.0));
        auto y = tape.relu(tape.linear(w, x));
        CHECK(tape.value(y).all_finite());
    }
}
