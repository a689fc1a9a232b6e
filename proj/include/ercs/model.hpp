#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ercs/channel.hpp"
#include "ercs/rng.hpp"
#include "ercs/tape.hpp"
#include "ercs/tensor.hpp"
#include "ercs/wavelet.hpp"

namespace ercs {

inline constexpr std::array<const char*, 4> kSubbandNames = {"ll", "lh", "hl", "hh"};

struct Geometry {
    std::size_t block_side = 16;  // B; N = B^2
    double subrate = 0.1;
    int levels = 2;  // wavelet levels in P3
    std::size_t p2_layers = 5;
    std::size_t p2_channels = 32;
    std::size_t p3_layers = 3;
    std::size_t p3_channels = 32;

    std::size_t block_dim() const { return block_side * block_side; }

    // round-half-up, floor at 1
    std::size_t measurements_per_block() const {
        const std::size_t n = block_dim();
        const auto m = static_cast<std::size_t>(subrate * static_cast<double>(n) + 0.5);
        if (m > n)
            throw ConfigError("subrate " + std::to_string(subrate) + " yields M > N");
        return m < 1 ? 1 : m;
    }

    void validate() const {
        if (block_side < 2 || block_side % 2 != 0)
            throw ConfigError("block_side must be even and >= 2");
        if (subrate <= 0.0 || subrate > 1.0)
            throw ConfigError("subrate must be in (0, 1]");
        if (levels < 1) throw ConfigError("levels must be >= 1");
        if (p2_layers < 2 || p3_layers < 2)
            throw ConfigError("enhancement stacks need at least 2 layers");
        (void)measurements_per_block();
    }
};

// Whole network: learned per-subband sampling matrices phi_s, initial
// reconstruction matrices g_s, and the P2/P3 enhancement stacks, all
// in one named ParamSet so the trainer and checkpoint see one surface.
struct Model {
    Geometry geom;
    ChannelSpec train_channel;  // regime the model was trained under
    ParamSet params;
};

inline Tensor gaussian_tensor(std::vector<std::size_t> shape, double sigma, RngStream& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = sigma * rng.gaussian();
    return t;
}

// Per-subband sampling matrices, i.i.d. Gaussian with variance 1/N.
inline std::array<Tensor, 4> init_sampler(std::size_t block_side, double subrate,
                                          RngStream& rng) {
    Geometry g;
    g.block_side = block_side;
    g.subrate = subrate;
    g.validate();
    const std::size_t n = g.block_dim(), m = g.measurements_per_block();
    const double sigma = 1.0 / std::sqrt(static_cast<double>(n));
    std::array<Tensor, 4> phi;
    for (auto& p : phi) p = gaussian_tensor({m, n}, sigma, rng);
    return phi;
}

inline Model init_model(const Geometry& geom, const ChannelSpec& train_channel,
                        std::uint64_t seed) {
    geom.validate();
    Model model;
    model.geom = geom;
    model.train_channel = train_channel;
    RngStream rng(seed, /*stream=*/0xace);
    const std::size_t n = geom.block_dim(), m = geom.measurements_per_block();

    auto phi = init_sampler(geom.block_side, geom.subrate, rng);
    for (std::size_t s = 0; s < 4; ++s)
        model.params.add(std::string("phi_") + kSubbandNames[s], std::move(phi[s]));
    // matched-filter start: G = phi^T / subrate, so G*phi ~ I in expectation
    for (std::size_t s = 0; s < 4; ++s) {
        const Tensor& p = model.params.param(std::string("phi_") + kSubbandNames[s]);
        Tensor g({n, m});
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < m; ++k)
                g.data[j * m + k] = p.data[k * n + j] / geom.subrate;
        model.params.add(std::string("g_") + kSubbandNames[s], std::move(g));
    }

    auto conv_stack = [&](const std::string& prefix, std::size_t layers,
                          std::size_t channels, std::size_t in_ch, std::size_t out_ch) {
        for (std::size_t l = 0; l < layers; ++l) {
            const std::size_t ci = l == 0 ? in_ch : channels;
            const std::size_t co = l + 1 == layers ? out_ch : channels;
            Tensor k({co, ci, 3, 3});
            if (l + 1 != layers) {
                // final layer stays zero: residual stacks start as identity
                const double sigma = std::sqrt(2.0 / static_cast<double>(ci * 9));
                for (auto& v : k.data) v = sigma * rng.gaussian();
            }
            model.params.add(prefix + "_k" + std::to_string(l), std::move(k));
            model.params.add(prefix + "_b" + std::to_string(l), Tensor({co}));
        }
    };
    conv_stack("p2", geom.p2_layers, geom.p2_channels, 1, 1);
    for (int l = 1; l <= geom.levels; ++l) {
        const std::size_t bands = l == geom.levels ? 4 : 3;
        conv_stack("p3_l" + std::to_string(l), geom.p3_layers, geom.p3_channels, bands, bands);
    }
    return model;
}

enum class Phase : int { P1 = 1, P2 = 2, P3 = 3 };

// Slots of interest from one recorded forward pass.
struct PipelineSlots {
    Tape::Slot p1 = 0, p2 = 0, p3 = 0;
    std::array<Tape::Slot, 4> sent{};      // per-subband [M, nb], before the channel
    std::array<Tape::Slot, 4> received{};  // after the mask
};

using Binding = std::map<std::string, Tape::Slot>;

inline Binding bind_params(Tape& tape, const ParamSet& params) {
    Binding b;
    for (const auto& [name, t] : params.params) b[name] = tape.leaf(t);
    return b;
}

inline std::vector<std::size_t> measurement_shape(const Geometry& geom,
                                                  std::size_t img_h, std::size_t img_w) {
    const std::size_t h = img_h / 2, w = img_w / 2, B = geom.block_side;
    const std::size_t nb = (h / B) * (w / B);
    return {4, geom.measurements_per_block(), nb};
}

namespace detail {

inline Tape::Slot conv_stack_forward(Tape& tape, const Binding& bind,
                                     const std::string& prefix, std::size_t layers,
                                     Tape::Slot input) {
    Tape::Slot x = input;
    for (std::size_t l = 0; l < layers; ++l) {
        x = tape.conv2d(x, bind.at(prefix + "_k" + std::to_string(l)),
                        bind.at(prefix + "_b" + std::to_string(l)), 1);
        if (l + 1 != layers) x = tape.relu(x);
    }
    return x;
}

}  // namespace detail

// Record the full sampling -> loss -> P1 -> P2 -> P3 pass on a tape.
// The mask is a constant within the pass; its tensor must have the
// shape given by measurement_shape().
inline PipelineSlots forward_pipeline_tape(Tape& tape, const Binding& bind,
                                           const Geometry& geom, Tape::Slot image,
                                           const Mask& mask, Phase active_phase) {
    const Tensor& img = tape.value(image);
    if (img.shape.size() != 2)
        throw DimensionError("pipeline: image must be 2-D");
    const std::size_t H = img.shape[0], W = img.shape[1];
    const std::size_t h = H / 2, w = W / 2, B = geom.block_side;
    if (H % (2 * B) != 0 || W % (2 * B) != 0)
        throw DimensionError("pipeline: image " + Tensor::shape_str(img.shape) +
                             " not tileable by 2B=" + std::to_string(2 * B));
    const std::size_t m = geom.measurements_per_block(), nb = (h / B) * (w / B);
    if (mask.values.shape != measurement_shape(geom, H, W))
        throw DimensionError("pipeline: mask shape " + Tensor::shape_str(mask.values.shape) +
                             " does not match measurement layout");

    PipelineSlots out;
    Tape::Slot bands = tape.haar2(image);
    std::vector<Tape::Slot> rec_planes;
    const std::size_t chunk = m * nb;
    for (std::size_t s = 0; s < 4; ++s) {
        Tape::Slot plane = tape.channel_slice(bands, s, 1);
        Tape::Slot cols = tape.im2cols(plane, B);
        Tape::Slot sent = tape.linear(bind.at(std::string("phi_") + kSubbandNames[s]), cols);
        Tensor sub_mask({m, nb});
        for (std::size_t i = 0; i < chunk; ++i)
            sub_mask.data[i] = mask.values.data[s * chunk + i];
        Tape::Slot received = tape.mul_mask(sent, sub_mask);
        Tape::Slot xhat = tape.linear(bind.at(std::string("g_") + kSubbandNames[s]), received);
        rec_planes.push_back(tape.cols2im(xhat, B, h, w));
        out.sent[s] = sent;
        out.received[s] = received;
    }
    out.p1 = tape.ihaar2(tape.channel_stack(rec_planes));
    out.p2 = out.p1;
    out.p3 = out.p1;
    if (static_cast<int>(active_phase) < 2) return out;

    // P2: residual conv stack in the image domain
    Tape::Slot x3d = tape.channel_stack({out.p1});
    Tape::Slot corr = detail::conv_stack_forward(tape, bind, "p2", geom.p2_layers, x3d);
    out.p2 = tape.add(out.p1, tape.channel_slice(corr, 0, 1));
    out.p3 = out.p2;
    if (static_cast<int>(active_phase) < 3) return out;

    // P3: per-level residual conv stacks in the wavelet domain; the
    // correction pyramid is synthesized alone and added to the P2 image,
    // so all-zero parameters leave the output bit-identical to P2.
    std::vector<Tape::Slot> level_corr;  // level l: [3,h,w], deepest: [4,h,w]
    Tape::Slot cur = out.p2;
    for (int l = 1; l <= geom.levels; ++l) {
        Tape::Slot dec = tape.haar2(cur);
        const bool deepest = l == geom.levels;
        Tape::Slot in = deepest ? dec : tape.channel_slice(dec, 1, 3);
        level_corr.push_back(detail::conv_stack_forward(
            tape, bind, "p3_l" + std::to_string(l), geom.p3_layers, in));
        cur = tape.channel_slice(dec, 0, 1);
    }
    Tape::Slot corr_img = tape.ihaar2(level_corr.back());
    for (int l = geom.levels - 1; l >= 1; --l) {
        const Tape::Slot det = level_corr[static_cast<std::size_t>(l) - 1];
        Tape::Slot stacked = tape.channel_stack({corr_img, tape.channel_slice(det, 0, 1),
                                                 tape.channel_slice(det, 1, 1),
                                                 tape.channel_slice(det, 2, 1)});
        corr_img = tape.ihaar2(stacked);
    }
    out.p3 = tape.add(out.p2, corr_img);
    return out;
}

struct PipelineOutput {
    Tensor recon_p1, recon_p2, recon_p3;
    std::vector<Tensor> measurements_sent, measurements_received;  // per subband [M, nb]
    Mask mask_used;
    double drop_rate = 0.0;
};

// One inference pass: draw a fresh rate and mask from the channel,
// run the recorded pipeline, return all three reconstructions.
inline PipelineOutput forward_pipeline(const Model& model, const ChannelSpec& channel,
                                       const Tensor& image, RngStream& rng,
                                       Phase active_phase = Phase::P3) {
    const double r = draw_rate(channel, rng);
    Mask mask = draw_mask(channel, measurement_shape(model.geom, image.shape[0],
                                                     image.shape[1]),
                          r, rng);
    Tape tape;
    Binding bind = bind_params(tape, model.params);
    Tape::Slot img = tape.leaf(image);
    PipelineSlots slots = forward_pipeline_tape(tape, bind, model.geom, img, mask, active_phase);
    PipelineOutput out;
    out.recon_p1 = tape.value(slots.p1);
    out.recon_p2 = tape.value(slots.p2);
    out.recon_p3 = tape.value(slots.p3);
    for (std::size_t s = 0; s < 4; ++s) {
        out.measurements_sent.push_back(tape.value(slots.sent[s]));
        out.measurements_received.push_back(tape.value(slots.received[s]));
    }
    out.mask_used = std::move(mask);
    out.drop_rate = r;
    return out;
}

// Standalone Eq.-(1) sampling of one subband set (test/diagnostic path).
inline std::array<Tensor, 4> sense(const std::array<Tensor, 4>& phi, const SubbandSet& sub,
                                   std::size_t block_side) {
    const std::array<const Tensor*, 4> bands = {&sub.ll, &sub.lh, &sub.hl, &sub.hh};
    std::array<Tensor, 4> out;
    for (std::size_t s = 0; s < 4; ++s) {
        Tape tape;
        Tape::Slot cols = tape.im2cols(tape.leaf(*bands[s]), block_side);
        out[s] = tape.value(tape.linear(tape.leaf(phi[s]), cols));
    }
    return out;
}

}  // namespace ercs
