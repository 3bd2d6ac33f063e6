#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hbmecc/layout.hpp"

namespace hbmecc {

// Raw bit-error injection. Errors are i.i.d. per stored bit and transient
// per access epoch: every access draws a fresh substream keyed by
// (master_seed, codeword id, epoch), so whole experiments replay exactly.

struct FaultConfig {
    double ber = 0.0;          // probability a stored bit reads flipped
    std::uint64_t master_seed = 0;

    FaultConfig(double p, std::uint64_t seed) : ber(p), master_seed(seed) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("FaultConfig: ber must be in [0, 1]");
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace detail

// xoshiro256** keyed by SplitMix64 over (master, label_a, label_b). The
// generator family is part of the reproducibility contract: two builds share
// flip sets only if they pin the same construction.
class Substream {
  public:
    Substream(std::uint64_t master, std::uint64_t label_a, std::uint64_t label_b) {
        std::uint64_t h = master;
        h = detail::splitmix64(h) ^ label_a;
        h = detail::splitmix64(h) ^ label_b;
        std::uint64_t seeder = detail::splitmix64(h);
        for (auto& word : s_) word = detail::splitmix64(seeder);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in (0, 1]; never returns 0 so log() is safe.
    double next_unit() { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }

    // Uniform integer in [0, bound).
    std::uint64_t next_below(std::uint64_t bound) { return next() % bound; }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

inline Substream substream(std::uint64_t master_seed, std::uint64_t label_a, std::uint64_t label_b) {
    return Substream(master_seed, label_a, label_b);
}

// Geometric gaps between flipped bits (inversion sampling), so a pass over
// n bits costs O(expected flips) instead of O(n). Required for desk-scale
// runs at BERs down to 1e-9.
class BitErrorSampler {
  public:
    BitErrorSampler(double p, Substream rng) : p_(p), rng_(rng), log1m_p_(p < 1.0 ? std::log1p(-p) : 0.0) {}

    // Positions of flipped bits among [0, nbits), strictly increasing.
    template <typename OnFlip>
    void sample(std::uint64_t nbits, OnFlip&& on_flip) {
        if (p_ <= 0.0 || nbits == 0) return;
        if (p_ >= 1.0) {
            for (std::uint64_t i = 0; i < nbits; ++i) on_flip(i);
            return;
        }
        std::uint64_t pos = 0;
        while (true) {
            const double gap = std::floor(std::log(rng_.next_unit()) / log1m_p_);
            pos += static_cast<std::uint64_t>(gap);
            if (gap >= static_cast<double>(nbits) || pos >= nbits) return;
            on_flip(pos);
            ++pos;
        }
    }

  private:
    double p_;
    Substream rng_;
    double log1m_p_;
};

inline std::vector<std::uint32_t> sample_flip_positions(std::uint64_t nbits, double p, Substream rng) {
    std::vector<std::uint32_t> out;
    BitErrorSampler sampler(p, rng);
    sampler.sample(nbits, [&out](std::uint64_t pos) { out.push_back(static_cast<std::uint32_t>(pos)); });
    return out;
}

// Flip bit `pos` of a codeword image; bit 0 is the MSB of byte 0.
inline void flip_bit(std::span<std::uint8_t> bytes, std::uint64_t pos) {
    bytes[pos >> 3] ^= static_cast<std::uint8_t>(0x80u >> (pos & 7));
}

struct InjectLabel {
    std::uint64_t codeword_id = 0;
    std::uint64_t epoch = 0;
};

// In-place i.i.d. bit flips over the whole stored image; returns the flip
// count. Same (config, label) always produces the same flip set.
inline std::uint64_t inject(StoredCodeword& stored, const FaultConfig& fc, InjectLabel label) {
    const std::uint64_t nbits = static_cast<std::uint64_t>(stored.bytes.size()) * 8;
    std::uint64_t flips = 0;
    BitErrorSampler sampler(fc.ber, substream(fc.master_seed, label.codeword_id, label.epoch));
    sampler.sample(nbits, [&](std::uint64_t pos) {
        flip_bit(stored.bytes, pos);
        ++flips;
    });
    return flips;
}

// P(a unit of `bits` raw bits reads with at least one flipped bit):
// 1 - (1-p)^bits, evaluated stably for tiny p.
inline double unit_error_prob(double p, double bits) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("unit_error_prob: p must be in [0, 1]");
    if (p == 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    return -std::expm1(bits * std::log1p(-p));
}

}  // namespace hbmecc
