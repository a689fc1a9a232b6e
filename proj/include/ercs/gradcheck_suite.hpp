#pragma once

#include <iostream>
#include <utility>

#include "ercs/gradcheck.hpp"
#include "ercs/model.hpp"

namespace ercs {

// Finite-difference sweep over every registered operator plus the full
// P1 -> P3 pipeline on a 16x16 input. Returns the max relative error
// across all checks. ReLU inputs are kept away from the kink.
inline double run_gradcheck_suite(std::uint64_t seed = 1, std::ostream* log = nullptr,
                                  double eps = 1e-5, std::size_t coords = 32) {
    double worst = 0.0;
    auto report = [&](const char* name, const GradCheckResult& res) {
        if (log)
            *log << "  " << name << ": max rel error " << res.max_rel_error << " (param "
                 << res.worst_param << ")\n";
        worst = std::max(worst, res.max_rel_error);
    };
    RngStream rng(seed, 0x6c);
    auto rand_tensor = [&](std::vector<std::size_t> shape, double scale) {
        Tensor t(std::move(shape));
        for (auto& v : t.data) v = scale * rng.gaussian();
        return t;
    };
    auto check = [&](ParamSet& params, auto&& build, const char* name) {
        auto loss = [&](ParamSet& p) {
            Tape tape;
            return tape.value(build(p, tape).first).data[0];
        };
        auto analytic = [&](ParamSet& p) {
            Tape tape;
            auto [slot, bind] = build(p, tape);
            tape.backward(slot);
            for (auto& [pname, g] : p.grads) g = tape.grad(bind.at(pname));
        };
        report(name, finite_diff_check(loss, analytic, params, eps, seed, coords));
    };
    auto bind_all = [](ParamSet& p, Tape& tape) {
        Binding bind;
        for (const auto& [name, t] : p.params) bind[name] = tape.leaf(t);
        return bind;
    };

    {  // linear with bias
        ParamSet ps;
        ps.add("w", rand_tensor({6, 8}, 0.5));
        ps.add("b", rand_tensor({6}, 0.5));
        Tensor x = rand_tensor({8, 3}, 1.0), t = rand_tensor({6, 3}, 1.0);
        check(ps, [&](ParamSet& p, Tape& tape) {
            Binding bind = bind_all(p, tape);
            return std::make_pair(
                tape.mse(tape.linear(bind["w"], tape.leaf(x), bind["b"]), t), bind);
        }, "linear");
    }
    {  // conv2d
        ParamSet ps;
        ps.add("k", rand_tensor({3, 2, 3, 3}, 0.5));
        ps.add("b", rand_tensor({3}, 0.5));
        ps.add("x", rand_tensor({2, 6, 6}, 1.0));
        Tensor t = rand_tensor({3, 6, 6}, 1.0);
        check(ps, [&](ParamSet& p, Tape& tape) {
            Binding bind = bind_all(p, tape);
            return std::make_pair(tape.mse(tape.conv2d(bind["x"], bind["k"], bind["b"], 1), t),
                                  bind);
        }, "conv2d");
    }
    {  // relu, probed away from the kink
        ParamSet ps;
        Tensor x = rand_tensor({24}, 1.0);
        for (auto& v : x.data)
            if (std::abs(v) < 10.0 * eps) v = 0.1;
        ps.add("x", x);
        Tensor t = rand_tensor({24}, 1.0);
        check(ps, [&](ParamSet& p, Tape& tape) {
            Binding bind = bind_all(p, tape);
            return std::make_pair(tape.mse(tape.relu(bind["x"]), t), bind);
        }, "relu");
    }
    {  // mul_mask
        ParamSet ps;
        ps.add("x", rand_tensor({16}, 1.0));
        RngStream mrng(seed, 0x6d);
        Mask mask = draw_mask_bernoulli({16}, 0.3, mrng);
        Tensor t = rand_tensor({16}, 1.0);
        check(ps, [&, mask](ParamSet& p, Tape& tape) {
            Binding bind = bind_all(p, tape);
            return std::make_pair(tape.mse(tape.mul_mask(bind["x"], mask.values), t), bind);
        }, "mul_mask");
    }
    {  // mse both as loss and through add
        ParamSet ps;
        ps.add("x", rand_tensor({10}, 1.0));
        ps.add("y", rand_tensor({10}, 1.0));
        Tensor t = rand_tensor({10}, 1.0);
        check(ps, [&](ParamSet& p, Tape& tape) {
            Binding bind = bind_all(p, tape);
            return std::make_pair(tape.mse(tape.add(bind["x"], bind["y"]), t), bind);
        }, "add+mse");
    }
    {  // wavelet analysis/synthesis
        ParamSet ps;
        ps.add("x", rand_tensor({8, 8}, 1.0));
        Tensor t = rand_tensor({8, 8}, 1.0);
        check(ps, [&](ParamSet& p, Tape& tape) {
            Binding bind = bind_all(p, tape);
            return std::make_pair(tape.mse(tape.ihaar2(tape.haar2(bind["x"])), t), bind);
        }, "haar2/ihaar2");
    }
    {  // full pipeline on a 16x16 input, mask held fixed
        Geometry g;
        g.block_side = 4;
        g.subrate = 0.3;
        g.levels = 2;
        g.p2_layers = 3;
        g.p2_channels = 8;
        g.p3_layers = 2;
        g.p3_channels = 8;
        Model model = init_model(g, ChannelSpec::fixed(0.1), seed);
        // move zero-initialized final layers off the origin
        for (auto& [name, p] : model.params.params)
            for (auto& v : p.data)
                if (v == 0.0) v = 0.05 * rng.gaussian();
        Tensor img = rand_tensor({16, 16}, 0.5);
        RngStream mrng(seed, 0x6e);
        Mask mask = draw_mask_bernoulli(measurement_shape(g, 16, 16), 0.1, mrng);
        Tensor t = rand_tensor({16, 16}, 0.5);
        check(model.params, [&, mask](ParamSet& p, Tape& tape) {
            Binding bind = bind_all(p, tape);
            auto slots = forward_pipeline_tape(tape, bind, g, tape.leaf(img), mask, Phase::P3);
            return std::make_pair(tape.mse(slots.p3, t), bind);
        }, "pipeline P1->P3");
    }
    return worst;
}

}  // namespace ercs
