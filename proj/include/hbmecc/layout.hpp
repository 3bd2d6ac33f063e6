#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <vector>

#include "hbmecc/crc16.hpp"
#include "hbmecc/rs.hpp"

namespace hbmecc {

// Codeword geometry and in-memory placement. A codeword is d 32-byte data
// chunks plus q 16-bit parity symbols packed into r = ceil(2q/32) parity
// chunks (last one zero-padded; the pad is CRC-covered but excluded from the
// RS code by shortening). Each chunk carries its own CRC, giving m_w = d + r
// 34-byte wire units, striped round-robin over s channels.

enum class ParityPreset : std::uint16_t {
    kRate16_17 = 0,   // q = d, information rate 16d / (16d + d) = 16/17
    kFixedParity = 1, // q = 16, one parity chunk regardless of d
    kCustom = 2,
};

struct CodewordConfig {
    int data_chunks = 0;   // d
    int parity_syms = 0;   // q
    int stripe_width = 0;  // s
    ParityPreset preset = ParityPreset::kCustom;

    CodewordConfig(int d, int q, int s, ParityPreset p = ParityPreset::kCustom)
        : data_chunks(d), parity_syms(q), stripe_width(s), preset(p) {
        if (d < 1 || q < 1) throw std::invalid_argument("CodewordConfig: d and q must be positive");
        if (s < 1 || s > 16) throw std::invalid_argument("CodewordConfig: stripe width must be in 1..16");
        if (16 * d + q > 65535) throw std::invalid_argument("CodewordConfig: geometry exceeds field bound");
    }

    static CodewordConfig rate16_17(int payload_bytes, int s) {
        check_payload(payload_bytes);
        const int d = payload_bytes / 32;
        return CodewordConfig(d, d, s, ParityPreset::kRate16_17);
    }

    static CodewordConfig fixed_parity(int payload_bytes, int s) {
        check_payload(payload_bytes);
        return CodewordConfig(payload_bytes / 32, 16, s, ParityPreset::kFixedParity);
    }

    int parity_chunks() const { return (2 * parity_syms + 31) / 32; }  // r
    int wire_chunks() const { return data_chunks + parity_chunks(); }  // m_w
    std::size_t payload_bytes() const { return static_cast<std::size_t>(data_chunks) * kChunkDataBytes; }
    std::size_t wire_bytes() const { return static_cast<std::size_t>(wire_chunks()) * kUnitBytes; }
    RsGeometry geometry() const { return RsGeometry(16 * data_chunks, parity_syms); }
    double information_rate() const {
        return static_cast<double>(16 * data_chunks) / static_cast<double>(16 * data_chunks + parity_syms);
    }

    bool operator==(const CodewordConfig&) const = default;

  private:
    static void check_payload(int payload_bytes) {
        if (payload_bytes < 32 || payload_bytes % 32 != 0) {
            throw std::invalid_argument("CodewordConfig: payload must be a positive multiple of 32 bytes");
        }
    }
};

// Bit image of one codeword: m_w wire units, contiguous, unit i at byte
// offset 34*i. Mutable by fault injection.
struct StoredCodeword {
    std::vector<std::uint8_t> bytes;

    std::span<std::uint8_t> unit(int i) { return {bytes.data() + static_cast<std::size_t>(i) * kUnitBytes, kUnitBytes}; }
    std::span<const std::uint8_t> unit(int i) const {
        return {bytes.data() + static_cast<std::size_t>(i) * kUnitBytes, kUnitBytes};
    }
    std::span<const std::uint8_t> unit_data(int i) const {
        return {bytes.data() + static_cast<std::size_t>(i) * kUnitBytes, kChunkDataBytes};
    }
};

struct ChannelSlot {
    int channel = 0;
    int slot = 0;
    bool operator==(const ChannelSlot&) const = default;
};

inline ChannelSlot map_chunk_to_channel(const CodewordConfig& config, int chunk_index) {
    if (chunk_index < 0 || chunk_index >= config.wire_chunks()) {
        throw std::invalid_argument("map_chunk_to_channel: chunk index out of range");
    }
    return {chunk_index % config.stripe_width, chunk_index / config.stripe_width};
}

// Big-endian byte pairs form symbols, chunk order then byte order.
inline GfSymbol symbol_from_bytes(const std::uint8_t* p) {
    return static_cast<GfSymbol>((static_cast<std::uint16_t>(p[0]) << 8) | p[1]);
}

inline void symbol_to_bytes(GfSymbol s, std::uint8_t* p) {
    p[0] = static_cast<std::uint8_t>(s >> 8);
    p[1] = static_cast<std::uint8_t>(s & 0xFF);
}

// RS-domain view of a stored codeword: 16d data symbols then q parity
// symbols. CRC bytes and the shortening pad are not part of the view.
inline std::vector<GfSymbol> symbol_view(const StoredCodeword& stored, const CodewordConfig& config) {
    const int d = config.data_chunks;
    const int q = config.parity_syms;
    std::vector<GfSymbol> out(static_cast<std::size_t>(16 * d + q));
    std::size_t idx = 0;
    for (int c = 0; c < d; ++c) {
        const auto data = stored.unit_data(c);
        for (int sidx = 0; sidx < 16; ++sidx) out[idx++] = symbol_from_bytes(data.data() + 2 * sidx);
    }
    for (int i = 0; i < q; ++i) {
        const int chunk = d + i / 16;
        const auto data = stored.unit_data(chunk);
        out[idx++] = symbol_from_bytes(data.data() + 2 * (i % 16));
    }
    return out;
}

namespace detail {

// Pack q parity symbols into r data-chunk payloads, zero pad at the tail.
inline std::vector<std::uint8_t> pack_parity_bytes(std::span<const GfSymbol> parity, const CodewordConfig& config) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(config.parity_chunks()) * kChunkDataBytes, 0);
    for (std::size_t i = 0; i < parity.size(); ++i) symbol_to_bytes(parity[i], out.data() + 2 * i);
    return out;
}

}  // namespace detail

inline StoredCodeword build_codeword(std::span<const std::uint8_t> data, const CodewordConfig& config,
                                     const RsCode& rs) {
    if (data.size() != config.payload_bytes()) {
        throw std::invalid_argument("build_codeword: payload size does not match geometry");
    }
    const int d = config.data_chunks;
    std::vector<GfSymbol> syms(static_cast<std::size_t>(16) * static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < syms.size(); ++i) syms[i] = symbol_from_bytes(data.data() + 2 * i);
    const std::vector<GfSymbol> parity = rs.encode(syms);
    const std::vector<std::uint8_t> parity_bytes = detail::pack_parity_bytes(parity, config);

    StoredCodeword stored;
    stored.bytes.resize(config.wire_bytes());
    for (int c = 0; c < d; ++c) {
        const ChunkUnit u = make_unit(data.subspan(static_cast<std::size_t>(c) * kChunkDataBytes, kChunkDataBytes));
        write_unit(u, stored.unit(c));
    }
    for (int c = 0; c < config.parity_chunks(); ++c) {
        const ChunkUnit u = make_unit(
            std::span<const std::uint8_t>(parity_bytes.data() + static_cast<std::size_t>(c) * kChunkDataBytes, kChunkDataBytes));
        write_unit(u, stored.unit(d + c));
    }
    return stored;
}

inline StoredCodeword build_codeword(std::span<const std::uint8_t> data, const CodewordConfig& config) {
    return build_codeword(data, config, RsCode(config.geometry()));
}

// Simulated memory: a flat array of codewords. Linear chunk address a maps
// to codeword a / d, chunk a % d.
struct MemoryStore {
    CodewordConfig config;
    std::vector<StoredCodeword> codewords;

    MemoryStore(CodewordConfig cfg, std::size_t codeword_count) : config(cfg) {
        const std::vector<std::uint8_t> zero(cfg.payload_bytes(), 0);
        const StoredCodeword image = build_codeword(zero, cfg);
        codewords.assign(codeword_count, image);
    }

    struct ChunkAddress {
        std::size_t codeword;
        int chunk;
    };
    ChunkAddress locate(std::size_t linear_chunk) const {
        return {linear_chunk / static_cast<std::size_t>(config.data_chunks),
                static_cast<int>(linear_chunk % static_cast<std::size_t>(config.data_chunks))};
    }
};

// Store dump: 16-byte header (magic "RSCW", d, q as u32 BE, s and preset id
// as u16 BE) followed by all units in chunk order.
inline constexpr std::array<std::uint8_t, 4> kStoreMagic = {'R', 'S', 'C', 'W'};

inline std::vector<std::uint8_t> dump_store(const MemoryStore& store) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + store.codewords.size() * store.config.wire_bytes());
    for (const std::uint8_t b : kStoreMagic) out.push_back(b);
    const auto push_u32 = [&out](std::uint32_t v) {
        out.push_back(static_cast<std::uint8_t>(v >> 24));
        out.push_back(static_cast<std::uint8_t>(v >> 16));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
        out.push_back(static_cast<std::uint8_t>(v));
    };
    const auto push_u16 = [&out](std::uint16_t v) {
        out.push_back(static_cast<std::uint8_t>(v >> 8));
        out.push_back(static_cast<std::uint8_t>(v));
    };
    push_u32(static_cast<std::uint32_t>(store.config.data_chunks));
    push_u32(static_cast<std::uint32_t>(store.config.parity_syms));
    push_u16(static_cast<std::uint16_t>(store.config.stripe_width));
    push_u16(static_cast<std::uint16_t>(store.config.preset));
    for (const auto& cw : store.codewords) {
        out.insert(out.end(), cw.bytes.begin(), cw.bytes.end());
    }
    return out;
}

inline MemoryStore load_store(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 16 || !std::equal(kStoreMagic.begin(), kStoreMagic.end(), bytes.begin())) {
        throw std::invalid_argument("load_store: bad magic");
    }
    const auto u32 = [&bytes](std::size_t off) {
        return (static_cast<std::uint32_t>(bytes[off]) << 24) | (static_cast<std::uint32_t>(bytes[off + 1]) << 16) |
               (static_cast<std::uint32_t>(bytes[off + 2]) << 8) | bytes[off + 3];
    };
    const auto u16 = [&bytes](std::size_t off) {
        return static_cast<std::uint16_t>((bytes[off] << 8) | bytes[off + 1]);
    };
    CodewordConfig cfg(static_cast<int>(u32(4)), static_cast<int>(u32(8)), u16(12),
                       static_cast<ParityPreset>(u16(14)));
    const std::size_t body = bytes.size() - 16;
    if (body % cfg.wire_bytes() != 0) {
        throw std::invalid_argument("load_store: body is not a whole number of codewords");
    }
    MemoryStore store(cfg, 0);
    const std::size_t count = body / cfg.wire_bytes();
    store.codewords.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        store.codewords[i].bytes.assign(bytes.begin() + 16 + static_cast<std::ptrdiff_t>(i * cfg.wire_bytes()),
                                        bytes.begin() + 16 + static_cast<std::ptrdiff_t>((i + 1) * cfg.wire_bytes()));
    }
    return store;
}

}  // namespace hbmecc
