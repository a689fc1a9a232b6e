#pragma once

#include <array>
#include <iostream>
#include <numeric>
#include <vector>

#include "ercs/adam.hpp"
#include "ercs/channel.hpp"
#include "ercs/model.hpp"
#include "ercs/rng.hpp"
#include "ercs/tensor.hpp"

namespace ercs {

struct TrainConfig {
    Geometry geom;
    ChannelSpec channel;  // loss regime, in force during every phase
    std::size_t patch_count = 2000;
    std::size_t patch_side = 32;
    std::size_t batch_size = 16;
    std::array<std::size_t, 3> epochs = {100, 60, 60};  // per phase P1/P2/P3
    std::array<double, 3> lr = {1e-3, 1e-3, 1e-3};
    std::uint64_t seed = 1;

    void validate() const {
        geom.validate();
        channel.validate();
        if (batch_size == 0) throw ConfigError("batch_size must be positive");
        const std::size_t div = std::size_t{1} << geom.levels;
        if (patch_side % (2 * geom.block_side) != 0 || patch_side % div != 0)
            throw ConfigError("patch_side " + std::to_string(patch_side) +
                              " must be divisible by 2*block_side and 2^levels");
    }
};

struct TrainReport {
    std::array<std::vector<double>, 3> loss_curves;  // per-epoch mean loss, per phase
};

// Uniform random patches, values already normalized to [0,1] by the
// loader. Images smaller than the patch are skipped with a warning.
inline std::vector<Tensor> extract_patches(const std::vector<Tensor>& images,
                                           std::size_t side, std::size_t count,
                                           RngStream& rng) {
    std::vector<const Tensor*> usable;
    for (const auto& img : images) {
        if (img.shape.size() == 2 && img.shape[0] >= side && img.shape[1] >= side)
            usable.push_back(&img);
        else
            std::cerr << "warning: skipping image smaller than patch side " << side << "\n";
    }
    if (count > 0 && usable.empty())
        throw ConfigError("no image is at least " + std::to_string(side) + "x" +
                          std::to_string(side));
    std::vector<Tensor> patches;
    patches.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const Tensor& img = *usable[rng.below(usable.size())];
        const std::size_t y = rng.below(img.shape[0] - side + 1);
        const std::size_t x = rng.below(img.shape[1] - side + 1);
        Tensor p({side, side});
        for (std::size_t r = 0; r < side; ++r)
            for (std::size_t c = 0; c < side; ++c)
                p.data[r * side + c] = img.data[(y + r) * img.shape[1] + x + c];
        patches.push_back(std::move(p));
    }
    return patches;
}

namespace detail {

inline bool trainable_in_phase(const std::string& name, Phase phase) {
    if (name.rfind("phi_", 0) == 0 || name.rfind("g_", 0) == 0) return true;
    if (name.rfind("p2_", 0) == 0) return static_cast<int>(phase) >= 2;
    if (name.rfind("p3_", 0) == 0) return static_cast<int>(phase) >= 3;
    return false;
}

}  // namespace detail

// Minimize image-domain MSE of the given phase's output. All earlier
// phases' parameters stay trainable (cumulative fine-tuning). A fresh
// loss mask is drawn per sample per epoch from the channel regime.
inline std::vector<double> train_phase(Phase phase, Model& model, const TrainConfig& config,
                                       const std::vector<Tensor>& dataset) {
    config.validate();
    if (dataset.empty()) throw ConfigError("train_phase: empty dataset");
    const std::size_t n_epochs = config.epochs[static_cast<std::size_t>(phase) - 1];
    std::vector<double> curve;
    if (n_epochs == 0) return curve;

    const double base_lr = config.lr[static_cast<std::size_t>(phase) - 1];
    AdamState adam;
    adam.lr = base_lr;
    // mask draws for this phase come from one dedicated stream
    RngStream mask_rng(config.seed, 0x3a5c00 + static_cast<std::uint64_t>(phase));
    const std::size_t n = dataset.size();
    double initial_loss = -1.0;

    for (std::size_t epoch = 0; epoch < n_epochs; ++epoch) {
        adam.lr = epoch * 5 >= n_epochs * 4 ? base_lr * 0.1 : base_lr;  // decay last 20%
        // deterministic order keyed by (seed, phase, epoch)
        RngStream order_rng(config.seed,
                            0x0e00000 + static_cast<std::uint64_t>(phase) * 0x10000 + epoch);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[order_rng.below(i)]);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t end = std::min(n, start + config.batch_size);
            std::map<std::string, Tensor> grad_acc;
            for (const auto& [name, p] : model.params.params)
                if (detail::trainable_in_phase(name, phase))
                    grad_acc.emplace(name, Tensor::zeros(p.shape));

            for (std::size_t bi = start; bi < end; ++bi) {
                const Tensor& patch = dataset[order[bi]];
                const double r = draw_rate(config.channel, mask_rng);
                Mask mask = draw_mask(config.channel,
                                      measurement_shape(config.geom, patch.shape[0],
                                                        patch.shape[1]),
                                      r, mask_rng);
                Tape tape;
                Binding bind = bind_params(tape, model.params);
                PipelineSlots slots = forward_pipeline_tape(
                    tape, bind, config.geom, tape.leaf(patch), mask, phase);
                const Tape::Slot out = phase == Phase::P1   ? slots.p1
                                       : phase == Phase::P2 ? slots.p2
                                                            : slots.p3;
                Tape::Slot loss = tape.mse(out, patch);
                tape.backward(loss);
                epoch_loss += tape.value(loss).data[0];
                for (auto& [name, acc] : grad_acc) {
                    const Tensor& g = tape.grad(bind.at(name));
                    for (std::size_t i = 0; i < acc.numel(); ++i) acc.data[i] += g.data[i];
                }
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            for (auto& [name, acc] : grad_acc)
                for (auto& v : acc.data) v *= scale;
            adam_step(model.params, grad_acc, adam);
        }
        epoch_loss /= static_cast<double>(n);
        if (!std::isfinite(epoch_loss))
            throw NumericError("train_phase: non-finite epoch loss");
        if (initial_loss < 0.0) initial_loss = epoch_loss;
        if (epoch_loss > 1e3 * initial_loss && initial_loss > 0.0)
            throw NumericError("train_phase: diverged, loss " + std::to_string(epoch_loss) +
                               " vs initial " + std::to_string(initial_loss));
        curve.push_back(epoch_loss);
    }
    return curve;
}

// Three-stage schedule P1 -> P2 -> P3 under one channel regime.
inline Model run_schedule(const TrainConfig& config, const std::vector<Tensor>& dataset,
                          TrainReport* report = nullptr) {
    config.validate();
    Model model = init_model(config.geom, config.channel, config.seed);
    for (int p = 1; p <= 3; ++p) {
        auto curve = train_phase(static_cast<Phase>(p), model, config, dataset);
        if (report) report->loss_curves[static_cast<std::size_t>(p) - 1] = std::move(curve);
    }
    return model;
}

}  // namespace ercs
