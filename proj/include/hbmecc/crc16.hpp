#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>

namespace hbmecc {

// 34-byte transfer unit: 32 bytes of payload guarded by CRC-16/CCITT-FALSE
// (poly 0x1021, init 0xFFFF, no reflection, no final XOR). Wire layout is
// data followed by the CRC big-endian.

inline constexpr std::size_t kChunkDataBytes = 32;
inline constexpr std::size_t kUnitBytes = 34;
inline constexpr std::size_t kUnitBits = 272;

namespace detail {

inline const std::array<std::uint16_t, 256>& crc16_table() {
    static const auto table = [] {
        std::array<std::uint16_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t crc = i << 8;
            for (int bit = 0; bit < 8; ++bit) {
                crc = (crc & 0x8000u) ? ((crc << 1) ^ 0x1021u) : (crc << 1);
            }
            t[i] = static_cast<std::uint16_t>(crc);
        }
        return t;
    }();
    return table;
}

}  // namespace detail

inline std::uint16_t crc16(std::span<const std::uint8_t> data) {
    const auto& table = detail::crc16_table();
    std::uint16_t crc = 0xFFFF;
    for (std::uint8_t byte : data) {
        crc = static_cast<std::uint16_t>((crc << 8) ^ table[((crc >> 8) ^ byte) & 0xFF]);
    }
    return crc;
}

struct ChunkUnit {
    std::array<std::uint8_t, kChunkDataBytes> data{};
    std::uint16_t crc = 0;

    bool operator==(const ChunkUnit&) const = default;
};

inline ChunkUnit make_unit(std::span<const std::uint8_t> data) {
    if (data.size() != kChunkDataBytes) {
        throw std::invalid_argument("make_unit: payload must be exactly 32 bytes");
    }
    ChunkUnit u;
    std::memcpy(u.data.data(), data.data(), kChunkDataBytes);
    u.crc = crc16(data);
    return u;
}

inline bool check_unit(const ChunkUnit& u) {
    return crc16(u.data) == u.crc;
}

// Wire serialization: data bytes then CRC high byte, CRC low byte.
inline void write_unit(const ChunkUnit& u, std::span<std::uint8_t> out) {
    if (out.size() < kUnitBytes) {
        throw std::invalid_argument("write_unit: need 34 bytes of output");
    }
    std::memcpy(out.data(), u.data.data(), kChunkDataBytes);
    out[32] = static_cast<std::uint8_t>(u.crc >> 8);
    out[33] = static_cast<std::uint8_t>(u.crc & 0xFF);
}

inline ChunkUnit read_unit(std::span<const std::uint8_t> in) {
    if (in.size() < kUnitBytes) {
        throw std::invalid_argument("read_unit: need 34 bytes of input");
    }
    ChunkUnit u;
    std::memcpy(u.data.data(), in.data(), kChunkDataBytes);
    u.crc = static_cast<std::uint16_t>((in[32] << 8) | in[33]);
    return u;
}

// CRC over a raw 34-byte wire image (bytes 0..31), compared to bytes 32..33.
inline bool check_wire_unit(std::span<const std::uint8_t> unit) {
    const std::uint16_t stored = static_cast<std::uint16_t>((unit[32] << 8) | unit[33]);
    return crc16(unit.first(kChunkDataBytes)) == stored;
}

}  // namespace hbmecc
