#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "hbmecc/fault.hpp"

namespace hbmecc {

// Importance-adaptive protection: a block of m n-bit values is decomposed
// into bit-planes (plane i = bit i of every value). Planes in the protected
// set S are routed through the chunk/CRC/RS pipeline; the rest bypass ECC
// entirely and are stored raw.

struct ProtectionConfig {
    int bits_per_value = 0;
    std::vector<int> planes;  // protected planes, sorted ascending, deduped

    ProtectionConfig(int n, std::vector<int> protected_planes) : bits_per_value(n), planes(std::move(protected_planes)) {
        if (n < 1 || n > 64) throw std::invalid_argument("ProtectionConfig: bits per value must be in 1..64");
        std::sort(planes.begin(), planes.end());
        planes.erase(std::unique(planes.begin(), planes.end()), planes.end());
        for (int p : planes) {
            if (p < 0 || p >= n) throw std::invalid_argument("ProtectionConfig: plane index out of range");
        }
    }

    double gamma() const { return static_cast<double>(planes.size()) / static_cast<double>(bits_per_value); }

    std::vector<int> bypass_planes() const {
        std::vector<int> out;
        std::size_t next = 0;
        for (int p = 0; p < bits_per_value; ++p) {
            if (next < planes.size() && planes[next] == p) {
                ++next;
            } else {
                out.push_back(p);
            }
        }
        return out;
    }
};

// Plane-major bit streams: plane i of the stream holds bit i of every value
// in value order, planes ascending; bits packed MSB-first into bytes.
struct PlaneBlock {
    int value_count = 0;
    int bits_per_value = 0;
    std::vector<std::uint8_t> protected_bits;
    std::vector<std::uint8_t> bypass_bits;
};

namespace detail {

inline void set_bit(std::vector<std::uint8_t>& bytes, std::size_t idx, bool v) {
    if (v) bytes[idx >> 3] |= static_cast<std::uint8_t>(0x80u >> (idx & 7));
}

inline bool get_bit(const std::vector<std::uint8_t>& bytes, std::size_t idx) {
    return (bytes[idx >> 3] & (0x80u >> (idx & 7))) != 0;
}

inline std::vector<std::uint8_t> pack_planes(std::span<const std::uint64_t> values, std::span<const int> planes) {
    const std::size_t nbits = values.size() * planes.size();
    std::vector<std::uint8_t> out((nbits + 7) / 8, 0);
    std::size_t idx = 0;
    for (int plane : planes) {
        for (const std::uint64_t v : values) {
            set_bit(out, idx++, ((v >> plane) & 1u) != 0);
        }
    }
    return out;
}

inline void unpack_planes(const std::vector<std::uint8_t>& bits, std::span<const int> planes,
                          std::span<std::uint64_t> values) {
    std::size_t idx = 0;
    for (int plane : planes) {
        for (auto& v : values) {
            if (get_bit(bits, idx++)) v |= (std::uint64_t{1} << plane);
        }
    }
}

}  // namespace detail

inline PlaneBlock split_planes(std::span<const std::uint64_t> values, const ProtectionConfig& pc) {
    if (pc.bits_per_value < 64) {
        const std::uint64_t limit = (std::uint64_t{1} << pc.bits_per_value) - 1;
        for (const std::uint64_t v : values) {
            if (v > limit) throw std::invalid_argument("split_planes: value does not fit in the configured width");
        }
    }
    PlaneBlock block;
    block.value_count = static_cast<int>(values.size());
    block.bits_per_value = pc.bits_per_value;
    block.protected_bits = detail::pack_planes(values, pc.planes);
    block.bypass_bits = detail::pack_planes(values, pc.bypass_planes());
    return block;
}

inline std::vector<std::uint64_t> merge_planes(const PlaneBlock& block, const ProtectionConfig& pc) {
    if (block.bits_per_value != pc.bits_per_value) {
        throw std::invalid_argument("merge_planes: block width does not match config");
    }
    const std::size_t m = static_cast<std::size_t>(block.value_count);
    const auto bypass = pc.bypass_planes();
    if (block.protected_bits.size() < (m * pc.planes.size() + 7) / 8 ||
        block.bypass_bits.size() < (m * bypass.size() + 7) / 8) {
        throw std::invalid_argument("merge_planes: block streams shorter than the config requires");
    }
    std::vector<std::uint64_t> values(m, 0);
    detail::unpack_planes(block.protected_bits, pc.planes, values);
    detail::unpack_planes(block.bypass_bits, bypass, values);
    return values;
}

// BF16: bit 15 sign, bits 14..7 exponent, bits 6..0 mantissa.
enum class Bf16Field { kSign, kExponent, kMantissa };

inline std::vector<int> bf16_field_planes(Bf16Field field) {
    switch (field) {
        case Bf16Field::kSign:
            return {15};
        case Bf16Field::kExponent:
            return {7, 8, 9, 10, 11, 12, 13, 14};
        case Bf16Field::kMantissa:
            return {0, 1, 2, 3, 4, 5, 6};
    }
    throw std::invalid_argument("bf16_field_planes: unknown field");
}

inline ProtectionConfig bf16_protection(Bf16Field field) {
    return ProtectionConfig(16, bf16_field_planes(field));
}

inline float bf16_to_float(std::uint16_t bits) {
    return std::bit_cast<float>(static_cast<std::uint32_t>(bits) << 16);
}

inline std::uint16_t float_to_bf16(float v) {  // truncating conversion
    return static_cast<std::uint16_t>(std::bit_cast<std::uint32_t>(v) >> 16);
}

// Smallest positive normal BF16; keeps relative error defined at x = 0.
inline constexpr float kBf16TinyFloor = 1.17549435e-38f;  // 2^-126

struct FieldFlipStats {
    std::uint64_t flipped_bits = 0;
    std::uint64_t values_changed = 0;
    double max_relative_error = 0.0;   // over finite results
    double mean_relative_error = 0.0;  // over all values, finite results only
    std::uint64_t blowup_count = 0;    // relative error > 1e3, or NaN/Inf result
};

// Numeric-deviation proxy: flip each bit of the named BF16 field
// independently at `rate` and measure the per-value relative error
// |x' - x| / max(|x|, tiny).
inline FieldFlipStats field_flip_stats(std::span<const std::uint16_t> values, Bf16Field field, double rate,
                                       std::uint64_t seed) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("field_flip_stats: rate must be in [0, 1]");
    const std::vector<int> planes = bf16_field_planes(field);
    const std::size_t nplanes = planes.size();

    FieldFlipStats stats;
    std::vector<std::uint16_t> mutated(values.begin(), values.end());
    BitErrorSampler sampler(rate, substream(seed, static_cast<std::uint64_t>(field), 0));
    sampler.sample(static_cast<std::uint64_t>(values.size()) * nplanes, [&](std::uint64_t pos) {
        const std::size_t vidx = static_cast<std::size_t>(pos / nplanes);
        const int plane = planes[static_cast<std::size_t>(pos % nplanes)];
        mutated[vidx] ^= static_cast<std::uint16_t>(1u << plane);
        ++stats.flipped_bits;
    });

    double err_sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (mutated[i] == values[i]) continue;
        ++stats.values_changed;
        const float x = bf16_to_float(values[i]);
        const float y = bf16_to_float(mutated[i]);
        if (!std::isfinite(y)) {
            ++stats.blowup_count;
            continue;
        }
        const double rel = std::abs(static_cast<double>(y) - static_cast<double>(x)) /
                           std::max(std::abs(static_cast<double>(x)), static_cast<double>(kBf16TinyFloor));
        if (rel > 1e3) ++stats.blowup_count;
        stats.max_relative_error = std::max(stats.max_relative_error, rel);
        err_sum += rel;
    }
    if (!values.empty()) stats.mean_relative_error = err_sum / static_cast<double>(values.size());
    return stats;
}

}  // namespace hbmecc
