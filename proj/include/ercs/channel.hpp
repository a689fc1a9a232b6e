#pragma once

#include <string>
#include <vector>

#include "ercs/rng.hpp"
#include "ercs/tape.hpp"
#include "ercs/tensor.hpp"

namespace ercs {

// Binary selection mask: 1 = measurement kept, 0 = lost.
struct Mask {
    Tensor values;
    double nominal_rate = 0.0;   // requested loss fraction
    double realized_rate = 0.0;  // actual fraction of zeros

    Mask() = default;
    Mask(Tensor v, double nominal) : values(std::move(v)), nominal_rate(nominal) {
        std::size_t zeros = 0;
        for (double x : values.data) {
            if (x != 0.0 && x != 1.0)
                throw NumericError("mask entries must be exactly 0 or 1");
            if (x == 0.0) ++zeros;
        }
        realized_rate = values.numel() == 0
                            ? 0.0
                            : static_cast<double>(zeros) / static_cast<double>(values.numel());
    }
};

enum class ChannelModel { bernoulli, burst };

// Drop-rate regime: constant r, or a fresh uniform draw per call.
struct ChannelSpec {
    ChannelModel model = ChannelModel::bernoulli;
    bool vary = false;       // false: fixed(rate_lo); true: uniform_range(rate_lo, rate_hi)
    double rate_lo = 0.0;
    double rate_hi = 0.0;
    double burst_mean_len = 1.0;
    std::uint64_t seed = 0;

    static ChannelSpec fixed(double r, ChannelModel m = ChannelModel::bernoulli) {
        ChannelSpec s;
        s.model = m;
        s.rate_lo = s.rate_hi = r;
        s.validate();
        return s;
    }

    static ChannelSpec uniform_range(double lo, double hi,
                                     ChannelModel m = ChannelModel::bernoulli) {
        ChannelSpec s;
        s.model = m;
        s.vary = true;
        s.rate_lo = lo;
        s.rate_hi = hi;
        s.validate();
        return s;
    }

    void validate() const {
        if (rate_lo < 0.0 || rate_hi > 0.5 || rate_lo > rate_hi)
            throw ConfigError("channel rates must satisfy 0 <= lo <= hi <= 0.5, got [" +
                              std::to_string(rate_lo) + ", " + std::to_string(rate_hi) + "]");
        if (burst_mean_len < 1.0)
            throw ConfigError("burst_mean_len must be >= 1, got " +
                              std::to_string(burst_mean_len));
    }
};

inline double draw_rate(const ChannelSpec& spec, RngStream& rng) {
    if (!spec.vary) return spec.rate_lo;
    return rng.uniform(spec.rate_lo, spec.rate_hi);
}

inline Mask draw_mask_bernoulli(const std::vector<std::size_t>& shape, double r,
                                RngStream& rng) {
    if (r < 0.0 || r > 1.0)
        throw ConfigError("bernoulli rate out of [0,1]: " + std::to_string(r));
    Tensor m(shape);
    for (auto& v : m.data) v = rng.uniform() < r ? 0.0 : 1.0;
    return Mask(std::move(m), r);
}

// Two-state Gilbert chain over the flattened measurement order.
// Loss sojourns are geometric with mean burst_mean_len; gap sojourns
// geometric with mean chosen so the stationary loss fraction is r.
inline Mask draw_mask_burst(const std::vector<std::size_t>& shape, double r,
                            double burst_mean_len, RngStream& rng) {
    if (r < 0.0 || r > 0.5)
        throw ConfigError("burst rate out of [0,0.5]: " + std::to_string(r));
    if (burst_mean_len < 1.0)
        throw ConfigError("burst_mean_len must be >= 1, got " +
                          std::to_string(burst_mean_len));
    Tensor m(shape);
    if (r == 0.0) {
        for (auto& v : m.data) v = 1.0;
        return Mask(std::move(m), r);
    }
    const double gap_mean = burst_mean_len * (1.0 - r) / r;
    if (gap_mean < 1.0)
        throw ConfigError("infeasible burst channel: required gap mean " +
                          std::to_string(gap_mean) + " < 1");
    const double p_exit_loss = 1.0 / burst_mean_len;  // loss -> kept
    const double p_enter_loss = 1.0 / gap_mean;       // kept -> loss
    // start in the stationary distribution
    bool lost = rng.uniform() < r;
    for (auto& v : m.data) {
        v = lost ? 0.0 : 1.0;
        const double u = rng.uniform();
        lost = lost ? (u >= p_exit_loss) : (u < p_enter_loss);
    }
    return Mask(std::move(m), r);
}

inline Mask draw_mask(const ChannelSpec& spec, const std::vector<std::size_t>& shape,
                      double r, RngStream& rng) {
    return spec.model == ChannelModel::bernoulli
               ? draw_mask_bernoulli(shape, r, rng)
               : draw_mask_burst(shape, r, spec.burst_mean_len, rng);
}

// Tape-recorded application: lost positions carry exactly 0 forward
// and 0 gradient.
inline Tape::Slot apply(Tape& tape, const Mask& mask, Tape::Slot measurements) {
    return tape.mul_mask(measurements, mask.values);
}

// Out-of-tape application for plain evaluation paths.
inline Tensor apply(const Mask& mask, const Tensor& measurements) {
    require_same_shape(mask.values, measurements, "apply");
    Tensor out = measurements;
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= mask.values.data[i];
    return out;
}

}  // namespace ercs
