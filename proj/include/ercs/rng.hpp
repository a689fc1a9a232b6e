#pragma once

#include <cstdint>
#include <cmath>

namespace ercs {

// Counter-based random stream: every draw is a pure function of
// (seed, stream, counter), so independent streams never share state
// and replay is bit-exact on any platform.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream = 0)
        : base_(mix(seed ^ mix(stream * 0x9e3779b97f4a7c15ull + 1))) {}

    std::uint64_t next_u64() { return mix(base_ + 0x9e3779b97f4a7c15ull * ++ctr_); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal, Box-Muller (one value per call, cached pair)
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    // index in [0, n)
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t base_;
    std::uint64_t ctr_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace ercs
