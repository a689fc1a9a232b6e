#pragma once

#include <cmath>
#include <map>
#include <string>

#include "ercs/tensor.hpp"

namespace ercs {

struct AdamState {
    std::map<std::string, Tensor> m;  // first moments
    std::map<std::string, Tensor> v;  // second moments
    std::size_t t = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard Adam with bias correction. Updates only the named
// parameters present in `grads`; moment tensors are created lazily so
// one state can follow a schedule that grows the trainable set.
inline void adam_step(ParamSet& params, const std::map<std::string, Tensor>& grads,
                      AdamState& state) {
    ++state.t;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (const auto& [name, g] : grads) {
        Tensor& p = params.param(name);
        require_same_shape(p, g, "adam_step");
        auto [mit, minserted] = state.m.try_emplace(name, Tensor::zeros(p.shape));
        auto [vit, vinserted] = state.v.try_emplace(name, Tensor::zeros(p.shape));
        Tensor& m = mit->second;
        Tensor& v = vit->second;
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double gi = g.data[i];
            if (!std::isfinite(gi))
                throw NumericError("non-finite gradient in '" + name + "' at step " +
                                   std::to_string(state.t));
            m.data[i] = state.beta1 * m.data[i] + (1.0 - state.beta1) * gi;
            v.data[i] = state.beta2 * v.data[i] + (1.0 - state.beta2) * gi * gi;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

}  // namespace ercs
