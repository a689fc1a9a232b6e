#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "ercs/rng.hpp"
#include "ercs/tensor.hpp"

namespace ercs {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
};

// Central-difference oracle: compares analytic gradients (delivered by
// `analytic` into params.grads) with (f(p+eps) - f(p-eps)) / (2 eps)
// on a random subsample of at least `coords_per_param` coordinates of
// every parameter. `loss` must evaluate the scalar from the current
// parameter values without touching gradients.
inline GradCheckResult finite_diff_check(
    const std::function<double(ParamSet&)>& loss,
    const std::function<void(ParamSet&)>& analytic, ParamSet& params, double eps,
    std::uint64_t seed = 7, std::size_t coords_per_param = 32) {
    if (eps <= 0.0 || eps > 1e-2)
        throw ConfigError("finite_diff_check: eps must be in (0, 1e-2]");
    analytic(params);
    GradCheckResult result;
    RngStream rng(seed, /*stream=*/0xfd);
    for (auto& [name, p] : params.params) {
        const Tensor& g = params.grads.at(name);
        std::vector<std::size_t> idx;
        if (p.numel() <= coords_per_param) {
            idx.resize(p.numel());
            for (std::size_t i = 0; i < p.numel(); ++i) idx[i] = i;
        } else {
            for (std::size_t i = 0; i < coords_per_param; ++i)
                idx.push_back(rng.below(p.numel()));
        }
        for (std::size_t i : idx) {
            const double saved = p.data[i];
            p.data[i] = saved + eps;
            const double fp = loss(params);
            p.data[i] = saved - eps;
            const double fm = loss(params);
            p.data[i] = saved;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw NumericError("finite_diff_check: non-finite loss at '" + name +
                                   "'[" + std::to_string(i) + "]");
            const double numeric = (fp - fm) / (2.0 * eps);
            const double rel = std::abs(g.data[i] - numeric) /
                               std::max(std::abs(g.data[i]), 1e-8);
            if (rel > result.max_rel_error) {
                result.max_rel_error = rel;
                result.worst_param = name;
                result.worst_index = i;
            }
        }
    }
    return result;
}

}  // namespace ercs
