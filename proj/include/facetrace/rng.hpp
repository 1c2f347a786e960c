#pragma once

#include <cstdint>

namespace facetrace {

// PCG32 (O'Neill). Small, fast, and stream-splittable: every pixel gets its
// own stream keyed by (seed, pixel index) so results do not depend on the
// worker count.
class Pcg32 {
public:
    Pcg32() = default;
    Pcg32(uint64_t seed, uint64_t stream)
    {
        state_ = 0u;
        inc_ = (stream << 1u) | 1u;
        next();
        state_ += 0x853c49e6748fea9bULL + seed;
        next();
    }

    uint32_t next()
    {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    // Uniform in [0, 1).
    double uniform()
    {
        return next() * (1.0 / 4294967296.0);
    }

private:
    uint64_t state_ = 0x853c49e6748fea9bULL;
    uint64_t inc_ = 0xda3e39cb94b95bdbULL;
};

} // namespace facetrace
