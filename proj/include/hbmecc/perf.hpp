#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hbmecc/bitplane.hpp"
#include "hbmecc/controller.hpp"
#include "hbmecc/fault.hpp"
#include "hbmecc/layout.hpp"

namespace hbmecc {

// Analytic reliability model, synthetic trace generation and the
// trace-driven bandwidth/throughput model. Throughput is memory-bound:
// tokens/s = 18.51 * (U / (32/34)) against a 1 TB/s part, where U is useful
// user bytes over total wire bytes.

inline constexpr double kBaselineTokensPerS = 18.51;
inline constexpr double kIdealUtilization = 32.0 / 34.0;

// P(a random k-chunk read escalates) = 1 - (1-p)^(272 k).
inline double p_escalate(double p, int k) {
    if (k < 1) throw std::invalid_argument("p_escalate: k must be >= 1");
    return unit_error_prob(p, 272.0 * k);
}

namespace detail {

// ln P[X > t] for X ~ Binomial(n, ps), summed in log space.
inline double log_binom_tail(int n, int t, double ps) {
    if (ps <= 0.0 || t >= n) return -std::numeric_limits<double>::infinity();
    if (ps >= 1.0) return 0.0;
    const double lp = std::log(ps);
    const double lq = std::log1p(-ps);
    const double lgn = std::lgamma(static_cast<double>(n) + 1.0);
    double lse = -std::numeric_limits<double>::infinity();
    for (int i = t + 1; i <= n; ++i) {
        const double lterm = lgn - std::lgamma(static_cast<double>(i) + 1.0) -
                             std::lgamma(static_cast<double>(n - i) + 1.0) + i * lp + (n - i) * lq;
        if (lterm > lse) {
            lse = lterm + std::log1p(std::exp(lse - lterm));
        } else {
            lse += std::log1p(std::exp(lterm - lse));
        }
    }
    return std::min(lse, 0.0);
}

}  // namespace detail

// P(RS decode fails) for one codeword under raw BER p: symbols err
// independently with ps = 1 - (1-p)^16 and the bounded-distance decoder
// gives up beyond t symbol errors.
inline double decode_failure_rate_log10(double p, const CodewordConfig& config) {
    const double ps = unit_error_prob(p, 16.0);
    const RsGeometry geom = config.geometry();
    return detail::log_binom_tail(geom.n(), geom.t(), ps) / std::log(10.0);
}

inline double decode_failure_rate(double p, const CodewordConfig& config) {
    const double ps = unit_error_prob(p, 16.0);
    const RsGeometry geom = config.geometry();
    const double l = detail::log_binom_tail(geom.n(), geom.t(), ps);
    return std::isinf(l) ? 0.0 : std::exp(l);
}

// ---------------------------------------------------------------------------
// Synthetic traces

struct TraceParams {
    std::uint64_t request_count = 0;
    // Fraction of accessed data chunks carried by sequential whole-codeword
    // streams (not a raw request fraction: sequential and random requests
    // differ in size by up to d/1, and the paper's random-intensity sweep
    // only makes sense chunk-weighted).
    double seq_ratio = 1.0;
    std::array<double, 4> random_k_dist{0.25, 0.25, 0.25, 0.25};  // k = 1..4
    double read_fraction = 1.0;
    std::uint64_t seed = 0;
    std::uint32_t store_codewords = 16384;

    void validate() const {
        if (!(seq_ratio >= 0.0 && seq_ratio <= 1.0)) throw std::invalid_argument("TraceParams: seq_ratio must be in [0, 1]");
        if (!(read_fraction >= 0.0 && read_fraction <= 1.0)) {
            throw std::invalid_argument("TraceParams: read_fraction must be in [0, 1]");
        }
        double sum = 0.0;
        for (double w : random_k_dist) {
            if (w < 0.0) throw std::invalid_argument("TraceParams: k distribution weights must be non-negative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("TraceParams: k distribution must sum to 1");
        if (store_codewords == 0) throw std::invalid_argument("TraceParams: store must hold at least one codeword");
    }
};

struct TraceRequest {
    bool sequential = true;
    bool is_read = true;
    std::uint32_t codeword = 0;
    std::uint16_t offset = 0;
    std::uint16_t k = 0;  // chunks touched (= d for sequential)
};

struct Trace {
    std::vector<TraceRequest> requests;

    std::string serialize() const {
        std::ostringstream os;
        for (const auto& r : requests) {
            os << (r.sequential ? 's' : 'q') << ' ' << (r.is_read ? 'r' : 'w') << ' ' << r.codeword << ' ' << r.offset
               << ' ' << r.k << '\n';
        }
        return os.str();
    }
};

inline Trace gen_trace(const TraceParams& tp, int data_chunks) {
    tp.validate();
    if (data_chunks < 1) throw std::invalid_argument("gen_trace: data_chunks must be >= 1");
    const int kmax = std::min(4, data_chunks);

    std::array<double, 4> kdist{};
    double mass = 0.0;
    for (int i = 0; i < kmax; ++i) mass += tp.random_k_dist[static_cast<std::size_t>(i)];
    if (mass <= 0.0) throw std::invalid_argument("gen_trace: k distribution has no mass within 1..d");
    double mean_k = 0.0;
    for (int i = 0; i < kmax; ++i) {
        kdist[static_cast<std::size_t>(i)] = tp.random_k_dist[static_cast<std::size_t>(i)] / mass;
        mean_k += (i + 1) * kdist[static_cast<std::size_t>(i)];
    }

    // Per-request sequential probability that makes the expected share of
    // chunks served by sequential streams equal seq_ratio.
    const double d = static_cast<double>(data_chunks);
    const double p_seq = (tp.seq_ratio >= 1.0)
                             ? 1.0
                             : tp.seq_ratio * mean_k / (d * (1.0 - tp.seq_ratio) + tp.seq_ratio * mean_k);

    Trace trace;
    trace.requests.reserve(tp.request_count);
    Substream rng = substream(tp.seed, 0x74726163u, 0);  // trace stream
    std::uint64_t seq_cursor = 0;
    for (std::uint64_t i = 0; i < tp.request_count; ++i) {
        TraceRequest req;
        req.sequential = rng.next_unit() <= p_seq;
        req.is_read = rng.next_unit() <= tp.read_fraction;
        if (req.sequential) {
            req.codeword = static_cast<std::uint32_t>(seq_cursor % tp.store_codewords);
            ++seq_cursor;
            req.offset = 0;
            req.k = static_cast<std::uint16_t>(data_chunks);
        } else {
            req.codeword = static_cast<std::uint32_t>(rng.next_below(tp.store_codewords));
            const double u = rng.next_unit();
            int k = kmax;
            double acc = 0.0;
            for (int j = 0; j < kmax; ++j) {
                acc += kdist[static_cast<std::size_t>(j)];
                if (u <= acc) {
                    k = j + 1;
                    break;
                }
            }
            req.k = static_cast<std::uint16_t>(k);
            req.offset = static_cast<std::uint16_t>(rng.next_below(static_cast<std::uint64_t>(data_chunks - k + 1)));
        }
        trace.requests.push_back(req);
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Trace-driven simulation

struct TrafficStats {
    AccessEventLog ctrl;              // controller-side event counters
    std::uint64_t bypass_read = 0;    // raw unprotected plane traffic
    std::uint64_t bypass_written = 0;
    std::uint64_t useful_user_bytes = 0;
    std::uint64_t requests = 0;

    std::uint64_t total_wire_read() const { return ctrl.wire_bytes_read + bypass_read; }
    std::uint64_t total_wire_written() const { return ctrl.wire_bytes_written + bypass_written; }
};

struct PerfResult {
    double utilization = 0.0;
    double normalized_utilization = 0.0;
    double tokens_per_s = 0.0;
};

inline PerfResult tokens_per_s(const TrafficStats& stats) {
    const std::uint64_t wire = stats.total_wire_read() + stats.total_wire_written();
    if (wire == 0) throw std::domain_error("tokens_per_s: no wire traffic, utilization undefined");
    PerfResult r;
    r.utilization = static_cast<double>(stats.useful_user_bytes) / static_cast<double>(wire);
    r.normalized_utilization = r.utilization / kIdealUtilization;
    r.tokens_per_s = kBaselineTokensPerS * r.normalized_utilization;
    return r;
}

namespace detail {

// Reserved label_a for non-injection substreams (payload synthesis).
inline constexpr std::uint64_t kPayloadLabel = ~std::uint64_t{0};

inline void synth_payload(Substream& rng, std::span<std::uint8_t> out) {
    std::size_t i = 0;
    for (; i + 8 <= out.size(); i += 8) {
        const std::uint64_t v = rng.next();
        std::memcpy(out.data() + i, &v, 8);
    }
    if (i < out.size()) {
        const std::uint64_t v = rng.next();
        std::memcpy(out.data() + i, &v, out.size() - i);
    }
}

// Chunk-interleaved protected stream: each 32-byte logical chunk (16
// big-endian BF16 values) contributes its protected planes as one
// contiguous 2*|S|-byte group, so a k-chunk random access maps to a
// contiguous protected byte range. Bypass planes are accounted as raw
// 1:1 wire bytes and are not stored.
struct AdaptiveLayout {
    ProtectionConfig pc;
    int logical_chunks;        // d of the logical block
    int prot_bytes_per_chunk;  // 2 * |S|
    int bypass_bytes_per_chunk;
    CodewordConfig prot_config;

    AdaptiveLayout(const ProtectionConfig& prot, const CodewordConfig& logical)
        : pc(prot),
          logical_chunks(logical.data_chunks),
          prot_bytes_per_chunk(2 * static_cast<int>(prot.planes.size())),
          bypass_bytes_per_chunk(32 - prot_bytes_per_chunk),
          prot_config(make_prot_config(prot, logical)) {
        if (pc.bits_per_value != 16) {
            throw std::invalid_argument("run_trace: adaptive protection expects 16-bit values");
        }
        if (pc.planes.empty()) {
            throw std::invalid_argument("run_trace: adaptive protection needs at least one protected plane");
        }
    }

    static CodewordConfig make_prot_config(const ProtectionConfig& prot, const CodewordConfig& logical) {
        const int prot_bytes = 2 * static_cast<int>(prot.planes.size()) * logical.data_chunks;
        const int d_p = (prot_bytes + 31) / 32;
        const int q_p = logical.preset == ParityPreset::kFixedParity ? 16 : d_p;
        return CodewordConfig(d_p, q_p, logical.stripe_width, logical.preset);
    }

    std::size_t prot_stream_bytes() const {
        return static_cast<std::size_t>(prot_bytes_per_chunk) * static_cast<std::size_t>(logical_chunks);
    }

    // Protected bytes of one logical chunk, planes ascending, value order.
    void chunk_protected_bytes(std::span<const std::uint8_t> chunk, std::span<std::uint8_t> out) const {
        std::array<std::uint64_t, 16> values;
        for (int j = 0; j < 16; ++j) values[static_cast<std::size_t>(j)] = symbol_from_bytes(chunk.data() + 2 * j);
        const PlaneBlock block = split_planes(std::span<const std::uint64_t>(values.data(), 16), pc);
        std::copy(block.protected_bits.begin(), block.protected_bits.end(), out.begin());
    }

    // Padded protected stream (d_p * 32 bytes) for a whole logical block.
    std::vector<std::uint8_t> block_protected_stream(std::span<const std::uint8_t> block) const {
        std::vector<std::uint8_t> out(prot_config.payload_bytes(), 0);
        for (int c = 0; c < logical_chunks; ++c) {
            chunk_protected_bytes(block.subspan(static_cast<std::size_t>(c) * 32, 32),
                                  std::span<std::uint8_t>(out.data() + static_cast<std::size_t>(c) * prot_bytes_per_chunk,
                                                          static_cast<std::size_t>(prot_bytes_per_chunk)));
        }
        return out;
    }

    struct ChunkSpan {
        int first;
        int count;
    };
    ChunkSpan protected_span(int offset, int k) const {
        const int byte_begin = offset * prot_bytes_per_chunk;
        const int byte_end = (offset + k) * prot_bytes_per_chunk;
        const int first = byte_begin / 32;
        const int last = (byte_end + 31) / 32;
        return {first, last - first};
    }
};

}  // namespace detail

// Replay a trace against a simulated store. Ground truth is tracked by the
// harness; data that reaches the host unflagged but wrong is counted as a
// silent corruption. With a ProtectionConfig only the protected planes go
// through the chunk/CRC/RS pipeline; bypass planes add 1:1 wire traffic with
// no CRC or escalation cost.
inline TrafficStats run_trace(const Trace& trace, const CodewordConfig& config, const FaultConfig& fc,
                              SequentialReadPolicy policy, const ProtectionConfig* pc = nullptr,
                              EventRecorder* recorder = nullptr) {
    std::size_t n_cw = 0;
    for (const auto& r : trace.requests) n_cw = std::max(n_cw, static_cast<std::size_t>(r.codeword) + 1);

    TrafficStats stats;
    stats.requests = trace.requests.size();
    if (n_cw == 0) return stats;

    const std::size_t block_bytes = config.payload_bytes();
    std::vector<std::uint8_t> truth(n_cw * block_bytes, 0);
    Substream payload_rng = substream(fc.master_seed, detail::kPayloadLabel, 0);
    std::vector<std::uint8_t> payload(block_bytes);
    std::vector<std::uint8_t> readback(block_bytes);

    if (pc == nullptr) {
        MemoryStore store(config, n_cw);
        Controller ctrl(store, fc);
        ctrl.set_recorder(recorder);
        for (const auto& req : trace.requests) {
            const std::size_t base = static_cast<std::size_t>(req.codeword) * block_bytes;
            const std::size_t span_bytes = static_cast<std::size_t>(req.k) * kChunkDataBytes;
            const std::size_t span_off = static_cast<std::size_t>(req.offset) * kChunkDataBytes;
            stats.useful_user_bytes += span_bytes;
            if (req.is_read) {
                const auto out = std::span<std::uint8_t>(readback.data(), span_bytes);
                const ReadOutcome oc = req.sequential ? ctrl.serve_sequential_read(req.codeword, policy, out)
                                                      : ctrl.serve_random_read(req.codeword, req.offset, req.k, out);
                if (!oc.flagged_corrupt() && std::memcmp(out.data(), truth.data() + base + span_off, span_bytes) != 0) {
                    ++ctrl.log().silent_corruptions;
                }
            } else {
                const auto data = std::span<std::uint8_t>(payload.data(), span_bytes);
                detail::synth_payload(payload_rng, data);
                if (req.sequential) {
                    ctrl.serve_sequential_write(req.codeword, data);
                } else {
                    ctrl.serve_random_write(req.codeword, req.offset, req.k, data);
                }
                std::memcpy(truth.data() + base + span_off, data.data(), span_bytes);
            }
        }
        stats.ctrl = ctrl.log();
        return stats;
    }

    // Importance-adaptive run.
    const detail::AdaptiveLayout lay(*pc, config);
    MemoryStore store(lay.prot_config, n_cw);
    Controller ctrl(store, fc);
    ctrl.set_recorder(recorder);
    const std::size_t prot_block = lay.prot_config.payload_bytes();
    std::vector<std::uint8_t> prot_truth(n_cw * prot_block, 0);
    std::vector<std::uint8_t> prot_buf(prot_block);

    for (const auto& req : trace.requests) {
        const std::size_t base = static_cast<std::size_t>(req.codeword) * block_bytes;
        const std::size_t prot_base = static_cast<std::size_t>(req.codeword) * prot_block;
        stats.useful_user_bytes += static_cast<std::size_t>(req.k) * kChunkDataBytes;
        const auto span = req.sequential ? detail::AdaptiveLayout::ChunkSpan{0, lay.prot_config.data_chunks}
                                         : lay.protected_span(req.offset, req.k);
        const std::size_t span_bytes = static_cast<std::size_t>(span.count) * kChunkDataBytes;
        const std::size_t span_off = static_cast<std::size_t>(span.first) * kChunkDataBytes;
        if (req.is_read) {
            stats.bypass_read += static_cast<std::uint64_t>(lay.bypass_bytes_per_chunk) * req.k;
            const auto out = std::span<std::uint8_t>(prot_buf.data(), span_bytes);
            const ReadOutcome oc = req.sequential
                                       ? ctrl.serve_sequential_read(req.codeword, policy, out)
                                       : ctrl.serve_random_read(req.codeword, span.first, span.count, out);
            if (!oc.flagged_corrupt() &&
                std::memcmp(out.data(), prot_truth.data() + prot_base + span_off, span_bytes) != 0) {
                ++ctrl.log().silent_corruptions;
            }
        } else {
            stats.bypass_written += static_cast<std::uint64_t>(lay.bypass_bytes_per_chunk) * req.k;
            const auto data = std::span<std::uint8_t>(payload.data(), static_cast<std::size_t>(req.k) * kChunkDataBytes);
            detail::synth_payload(payload_rng, data);
            std::memcpy(truth.data() + base + static_cast<std::size_t>(req.offset) * kChunkDataBytes, data.data(),
                        data.size());
            for (int c = req.offset; c < req.offset + req.k; ++c) {
                lay.chunk_protected_bytes(
                    std::span<const std::uint8_t>(truth.data() + base + static_cast<std::size_t>(c) * 32, 32),
                    std::span<std::uint8_t>(prot_truth.data() + prot_base +
                                                static_cast<std::size_t>(c) * lay.prot_bytes_per_chunk,
                                            static_cast<std::size_t>(lay.prot_bytes_per_chunk)));
            }
            if (req.sequential) {
                ctrl.serve_sequential_write(req.codeword,
                                            std::span<const std::uint8_t>(prot_truth.data() + prot_base, prot_block));
            } else {
                ctrl.serve_random_write(req.codeword, span.first, span.count,
                                        std::span<const std::uint8_t>(prot_truth.data() + prot_base + span_off, span_bytes));
            }
        }
    }
    stats.ctrl = ctrl.log();
    return stats;
}

}  // namespace hbmecc
