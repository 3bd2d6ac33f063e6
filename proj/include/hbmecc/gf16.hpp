#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>

namespace hbmecc {

// GF(2^16) arithmetic over the reduction polynomial x^16 + x^12 + x^3 + x + 1.
// Addition is bitwise XOR; multiplication goes through log/antilog tables
// keyed to the primitive element alpha = x (0x0002).

using GfSymbol = std::uint16_t;

namespace gf16 {

inline constexpr std::uint32_t kReductionPoly = 0x1100B;
inline constexpr std::uint32_t kGroupOrder = 65535;  // |GF(2^16)*|

// Carry-less multiply with bitwise reduction. Slow; used to build the
// tables and by tests as an independent reference.
constexpr GfSymbol mul_bitwise(GfSymbol a, GfSymbol b) {
    std::uint32_t acc = 0;
    std::uint32_t aa = a;
    std::uint32_t bb = b;
    while (bb != 0) {
        if (bb & 1u) acc ^= aa;
        bb >>= 1;
        aa <<= 1;
        if (aa & 0x10000u) aa ^= kReductionPoly;
    }
    return static_cast<GfSymbol>(acc);
}

struct Tables {
    // log[v] = e with alpha^e = v (v != 0); exp doubled so that
    // exp[e1 + e2] needs no modular reduction for e1, e2 < 65535.
    std::array<std::uint16_t, 65536> log;
    std::array<std::uint16_t, 2 * kGroupOrder> exp;

    Tables() {
        log.fill(0);
        std::uint32_t v = 1;
        for (std::uint32_t e = 0; e < kGroupOrder; ++e) {
            exp[e] = static_cast<std::uint16_t>(v);
            if (e != 0 && v == 1) {
                // alpha cycled back early: the constant is not primitive.
                throw std::logic_error("gf16: reduction polynomial is not primitive");
            }
            log[v] = static_cast<std::uint16_t>(e);
            v = mul_bitwise(static_cast<GfSymbol>(v), 2);
        }
        if (v != 1) {
            throw std::logic_error("gf16: multiplicative group order check failed");
        }
        for (std::uint32_t e = kGroupOrder; e < 2 * kGroupOrder; ++e) {
            exp[e] = exp[e - kGroupOrder];
        }
    }
};

inline const Tables& tables() {
    static const Tables t;  // construction runs the primitivity self-test
    return t;
}

}  // namespace gf16

inline GfSymbol gf_mul(GfSymbol a, GfSymbol b) {
    if (a == 0 || b == 0) return 0;
    const auto& t = gf16::tables();
    return t.exp[static_cast<std::uint32_t>(t.log[a]) + t.log[b]];
}

inline GfSymbol gf_inv(GfSymbol a) {
    if (a == 0) throw std::invalid_argument("gf_inv: zero has no inverse");
    const auto& t = gf16::tables();
    return t.exp[gf16::kGroupOrder - t.log[a]];
}

inline GfSymbol gf_div(GfSymbol a, GfSymbol b) {
    if (b == 0) throw std::invalid_argument("gf_div: division by zero");
    if (a == 0) return 0;
    const auto& t = gf16::tables();
    return t.exp[static_cast<std::uint32_t>(t.log[a]) + gf16::kGroupOrder - t.log[b]];
}

// alpha^e for arbitrary non-negative exponent.
inline GfSymbol gf_alpha_pow(std::uint64_t e) {
    return gf16::tables().exp[e % gf16::kGroupOrder];
}

inline std::uint16_t gf_log(GfSymbol a) {
    if (a == 0) throw std::invalid_argument("gf_log: log of zero");
    return gf16::tables().log[a];
}

}  // namespace hbmecc
