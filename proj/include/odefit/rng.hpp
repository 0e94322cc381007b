#pragma once
// Philox4x32-10 counter-based generator (Salmon et al.), so every noise
// draw is a pure function of (seed, stream, index) and realizations are
// bit-reproducible regardless of evaluation order or thread count.

#include <cstdint>

namespace odefit::rng {

struct Block {
    uint32_t x[4];
};

inline Block philox4x32(uint64_t seed, uint64_t counter_hi, uint64_t counter_lo) {
    uint32_t c0 = static_cast<uint32_t>(counter_lo);
    uint32_t c1 = static_cast<uint32_t>(counter_lo >> 32);
    uint32_t c2 = static_cast<uint32_t>(counter_hi);
    uint32_t c3 = static_cast<uint32_t>(counter_hi >> 32);
    uint32_t k0 = static_cast<uint32_t>(seed);
    uint32_t k1 = static_cast<uint32_t>(seed >> 32);
    constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const uint64_t p0 = static_cast<uint64_t>(M0) * c0;
        const uint64_t p1 = static_cast<uint64_t>(M1) * c2;
        const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
        const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
        const uint32_t n0 = hi1 ^ c1 ^ k0;
        const uint32_t n2 = hi0 ^ c3 ^ k1;
        c1 = lo1;
        c3 = lo0;
        c0 = n0;
        c2 = n2;
        k0 += W0;
        k1 += W1;
    }
    return {{c0, c1, c2, c3}};
}

// Two doubles in (0, 1] from one block (53-bit mantissas).
inline void uniform_pair(uint64_t seed, uint64_t stream, uint64_t index, double& u0, double& u1) {
    const Block b = philox4x32(seed, stream, index);
    const uint64_t w0 = (static_cast<uint64_t>(b.x[0]) << 32) | b.x[1];
    const uint64_t w1 = (static_cast<uint64_t>(b.x[2]) << 32) | b.x[3];
    u0 = static_cast<double>((w0 >> 11) + 1) * 0x1.0p-53;
    u1 = static_cast<double>((w1 >> 11) + 1) * 0x1.0p-53;
}

inline double uniform(uint64_t seed, uint64_t stream, uint64_t index) {
    double u0, u1;
    uniform_pair(seed, stream, index, u0, u1);
    return u0;
}

// Box-Muller pair; z0/z1 are standard normals.
void normal_pair(uint64_t seed, uint64_t stream, uint64_t index, double& z0, double& z1);

} // namespace odefit::rng
