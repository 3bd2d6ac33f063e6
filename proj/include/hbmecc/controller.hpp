#pragma once

#include <cstdint>
#include <cstring>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hbmecc/fault.hpp"
#include "hbmecc/layout.hpp"
#include "hbmecc/rs.hpp"

namespace hbmecc {

// Host-side controller state machines. Random reads fetch only the target
// units and escalate to a full-codeword fetch + RS decode when any CRC
// fails. Random writes do a CRC-guided differential parity update and fall
// back to a full read-modify-write on CRC failure. Sequential requests move
// whole codewords. Cost is wire bytes; latency is not modeled.

struct AccessEventLog {
    std::uint64_t wire_bytes_read = 0;
    std::uint64_t wire_bytes_written = 0;
    std::uint64_t crc_failures = 0;        // failing unit checks
    std::uint64_t escalations = 0;         // read-path CRC-triggered full fetches
    std::uint64_t rs_decodes = 0;
    std::uint64_t rs_decode_failures = 0;
    std::uint64_t silent_corruptions = 0;  // maintained by the harness against ground truth
    std::uint64_t delta_updates = 0;
    std::uint64_t full_rmw_fallbacks = 0;
    std::uint64_t requests = 0;
};

enum class SequentialReadPolicy {
    kCrcFirst,      // fetch data units, decode only if a CRC fails
    kAlwaysDecode,  // fetch the whole codeword and decode unconditionally
};

struct ReadOutcome {
    bool escalated = false;
    bool crc_failed = false;
    bool decode_attempted = false;
    bool decode_ok = true;  // false only when a decode was attempted and failed
    int error_count = 0;

    bool flagged_corrupt() const { return decode_attempted && !decode_ok; }
};

struct WriteOutcome {
    bool fallback = false;
    bool crc_failed = false;
    bool decode_ok = true;
};

// Optional per-request trace, one CSV row per request.
struct RequestRecord {
    std::uint64_t request_id = 0;
    char kind = 'r';        // r / w
    char klass = 'q';       // q = random, s = sequential
    int k = 0;              // chunks touched
    bool crc_failed = false;
    bool escalated = false;
    bool decode_ok = true;
    std::uint64_t wire_read = 0;
    std::uint64_t wire_written = 0;
};

class EventRecorder {
  public:
    void append(const RequestRecord& r) { rows_.push_back(r); }
    const std::vector<RequestRecord>& rows() const { return rows_; }

    void to_csv(std::ostream& os) const {
        os << "request_id,kind,class,k,crc_failed,escalated,decode_ok,wire_read,wire_written\n";
        for (const auto& r : rows_) {
            os << r.request_id << ',' << (r.kind == 'r' ? "read" : "write") << ','
               << (r.klass == 'q' ? "random" : "sequential") << ',' << r.k << ',' << (r.crc_failed ? 1 : 0) << ','
               << (r.escalated ? 1 : 0) << ',' << (r.decode_ok ? 1 : 0) << ',' << r.wire_read << ',' << r.wire_written
               << '\n';
        }
    }

  private:
    std::vector<RequestRecord> rows_;
};

class Controller {
  public:
    Controller(MemoryStore& store, FaultConfig fc)
        : store_(store), fc_(fc), rs_(store.config.geometry()) {}

    AccessEventLog& log() { return log_; }
    const AccessEventLog& log() const { return log_; }
    const RsCode& code() const { return rs_; }
    std::uint64_t epoch() const { return epoch_; }
    void set_recorder(EventRecorder* rec) { recorder_ = rec; }

    // Read k chunks at a chunk offset within one codeword. `out` receives
    // 32*k bytes; corrupt data is still delivered when flagged in the
    // outcome.
    ReadOutcome serve_random_read(std::size_t cw, int offset, int k, std::span<std::uint8_t> out) {
        const CodewordConfig& cfg = store_.config;
        if (offset < 0 || k < 1 || offset + k > cfg.data_chunks) {
            throw std::invalid_argument("serve_random_read: request out of range");
        }
        const std::uint64_t wr0 = log_.wire_bytes_read;
        ++log_.requests;
        ReadOutcome outcome;
        const StoredCodeword& image = fetch_image(cw);

        log_.wire_bytes_read += kUnitBytes * static_cast<std::uint64_t>(k);
        int failed = 0;
        for (int c = offset; c < offset + k; ++c) {
            if (!check_wire_unit(image.unit(c))) ++failed;
        }
        if (failed == 0) {
            copy_chunks(image, offset, k, out);
        } else {
            log_.crc_failures += static_cast<std::uint64_t>(failed);
            ++log_.escalations;
            outcome.crc_failed = true;
            outcome.escalated = true;
            // The k buffered units are reused; only the rest is fetched.
            log_.wire_bytes_read += kUnitBytes * static_cast<std::uint64_t>(cfg.wire_chunks() - k);
            const DecodeResult dec = decode_image(image);
            if (dec.ok) {
                outcome.error_count = dec.error_count;
                for (int c = offset; c < offset + k; ++c) {
                    for (int s = 0; s < 16; ++s) {
                        symbol_to_bytes(dec.data[static_cast<std::size_t>(16 * c + s)],
                                        out.data() + static_cast<std::size_t>(c - offset) * kChunkDataBytes + 2 * s);
                    }
                }
            } else {
                outcome.decode_ok = false;
                copy_chunks(image, offset, k, out);  // best effort, flagged
            }
            outcome.decode_attempted = true;
        }
        record('r', 'q', k, outcome.crc_failed, outcome.escalated, outcome.decode_ok, wr0, log_.wire_bytes_written);
        return outcome;
    }

    // Overwrite k chunks at a chunk offset. `new_chunks` holds 32*k bytes.
    WriteOutcome serve_random_write(std::size_t cw, int offset, int k, std::span<const std::uint8_t> new_chunks) {
        const CodewordConfig& cfg = store_.config;
        if (offset < 0 || k < 1 || offset + k > cfg.data_chunks) {
            throw std::invalid_argument("serve_random_write: request out of range");
        }
        if (new_chunks.size() != static_cast<std::size_t>(k) * kChunkDataBytes) {
            throw std::invalid_argument("serve_random_write: payload size mismatch");
        }
        const std::uint64_t wr0 = log_.wire_bytes_read;
        const std::uint64_t ww0 = log_.wire_bytes_written;
        ++log_.requests;
        WriteOutcome outcome;
        const int d = cfg.data_chunks;
        const int r = cfg.parity_chunks();
        const int q = cfg.parity_syms;
        const StoredCodeword& image = fetch_image(cw);

        // Fetch the k target units plus all parity units.
        log_.wire_bytes_read += kUnitBytes * static_cast<std::uint64_t>(k + r);
        int failed = 0;
        for (int c = offset; c < offset + k; ++c) {
            if (!check_wire_unit(image.unit(c))) ++failed;
        }
        for (int c = d; c < d + r; ++c) {
            if (!check_wire_unit(image.unit(c))) ++failed;
        }

        StoredCodeword& stored = store_.codewords[cw];
        if (failed == 0) {
            // Differential parity update: P_new = P_old ^ RS(new) ^ RS(old).
            SparseDataVector oldv{16 * d, {}};
            SparseDataVector newv{16 * d, {}};
            oldv.entries.reserve(static_cast<std::size_t>(16 * k));
            newv.entries.reserve(static_cast<std::size_t>(16 * k));
            for (int c = offset; c < offset + k; ++c) {
                const auto old_data = image.unit_data(c);
                for (int s = 0; s < 16; ++s) {
                    const int pos = 16 * c + s;
                    oldv.entries.emplace_back(pos, symbol_from_bytes(old_data.data() + 2 * s));
                    newv.entries.emplace_back(
                        pos, symbol_from_bytes(new_chunks.data() + static_cast<std::size_t>(c - offset) * kChunkDataBytes + 2 * s));
                }
            }
            const std::vector<GfSymbol> delta = rs_.parity_delta(oldv, newv);
            std::vector<GfSymbol> parity(static_cast<std::size_t>(q));
            for (int i = 0; i < q; ++i) {
                const auto pdata = image.unit_data(d + i / 16);
                parity[static_cast<std::size_t>(i)] =
                    static_cast<GfSymbol>(symbol_from_bytes(pdata.data() + 2 * (i % 16)) ^ delta[static_cast<std::size_t>(i)]);
            }
            const std::vector<std::uint8_t> parity_bytes = detail::pack_parity_bytes(parity, cfg);
            for (int c = offset; c < offset + k; ++c) {
                const ChunkUnit u =
                    make_unit(new_chunks.subspan(static_cast<std::size_t>(c - offset) * kChunkDataBytes, kChunkDataBytes));
                write_unit(u, stored.unit(c));
            }
            for (int c = 0; c < r; ++c) {
                const ChunkUnit u = make_unit(
                    std::span<const std::uint8_t>(parity_bytes.data() + static_cast<std::size_t>(c) * kChunkDataBytes, kChunkDataBytes));
                write_unit(u, stored.unit(d + c));
            }
            log_.wire_bytes_written += kUnitBytes * static_cast<std::uint64_t>(k + r);
            ++log_.delta_updates;
        } else {
            // Conventional read-modify-write over the whole codeword.
            log_.crc_failures += static_cast<std::uint64_t>(failed);
            ++log_.full_rmw_fallbacks;
            outcome.fallback = true;
            outcome.crc_failed = true;
            log_.wire_bytes_read += kUnitBytes * static_cast<std::uint64_t>(cfg.wire_chunks() - k - r);
            const DecodeResult dec = decode_image(image);
            std::vector<std::uint8_t> payload(cfg.payload_bytes());
            if (dec.ok) {
                for (int s = 0; s < 16 * d; ++s) {
                    symbol_to_bytes(dec.data[static_cast<std::size_t>(s)], payload.data() + 2 * s);
                }
            } else {
                outcome.decode_ok = false;
                for (int c = 0; c < d; ++c) {
                    std::memcpy(payload.data() + static_cast<std::size_t>(c) * kChunkDataBytes, image.unit_data(c).data(),
                                kChunkDataBytes);
                }
            }
            std::memcpy(payload.data() + static_cast<std::size_t>(offset) * kChunkDataBytes, new_chunks.data(),
                        new_chunks.size());
            stored = build_codeword(payload, cfg, rs_);
            log_.wire_bytes_written += kUnitBytes * static_cast<std::uint64_t>(cfg.wire_chunks());
        }
        record('w', 'q', k, outcome.crc_failed, outcome.fallback, outcome.decode_ok, wr0, ww0);
        return outcome;
    }

    // Whole-payload read; `out` receives 32*d bytes.
    ReadOutcome serve_sequential_read(std::size_t cw, SequentialReadPolicy policy, std::span<std::uint8_t> out) {
        const CodewordConfig& cfg = store_.config;
        const std::uint64_t wr0 = log_.wire_bytes_read;
        ++log_.requests;
        ReadOutcome outcome;
        const int d = cfg.data_chunks;
        const StoredCodeword& image = fetch_image(cw);

        if (policy == SequentialReadPolicy::kCrcFirst) {
            log_.wire_bytes_read += kUnitBytes * static_cast<std::uint64_t>(d);
            int failed = 0;
            for (int c = 0; c < d; ++c) {
                if (!check_wire_unit(image.unit(c))) ++failed;
            }
            if (failed == 0) {
                copy_chunks(image, 0, d, out);
                record('r', 's', d, false, false, true, wr0, log_.wire_bytes_written);
                return outcome;
            }
            log_.crc_failures += static_cast<std::uint64_t>(failed);
            ++log_.escalations;
            outcome.crc_failed = true;
            outcome.escalated = true;
            log_.wire_bytes_read += kUnitBytes * static_cast<std::uint64_t>(cfg.wire_chunks() - d);
        } else {
            log_.wire_bytes_read += kUnitBytes * static_cast<std::uint64_t>(cfg.wire_chunks());
        }

        const DecodeResult dec = decode_image(image);
        outcome.decode_attempted = true;
        if (dec.ok) {
            outcome.error_count = dec.error_count;
            for (int s = 0; s < 16 * d; ++s) {
                symbol_to_bytes(dec.data[static_cast<std::size_t>(s)], out.data() + 2 * s);
            }
        } else {
            outcome.decode_ok = false;
            copy_chunks(image, 0, d, out);
        }
        record('r', 's', d, outcome.crc_failed, outcome.escalated, outcome.decode_ok, wr0, log_.wire_bytes_written);
        return outcome;
    }

    // RS encode + per-chunk CRC in one pass, full codeword written back.
    void serve_sequential_write(std::size_t cw, std::span<const std::uint8_t> data) {
        const CodewordConfig& cfg = store_.config;
        if (data.size() != cfg.payload_bytes()) {
            throw std::invalid_argument("serve_sequential_write: payload size mismatch");
        }
        const std::uint64_t ww0 = log_.wire_bytes_written;
        ++log_.requests;
        ++epoch_;  // writes burn an epoch too, keeping replay alignment
        store_.codewords[cw] = build_codeword(data, cfg, rs_);
        log_.wire_bytes_written += cfg.wire_bytes();
        record('w', 's', cfg.data_chunks, false, false, true, log_.wire_bytes_read, ww0);
    }

  private:
    // Materialize the transient per-access view of a codeword: the stored
    // image plus this epoch's injected bit errors.
    const StoredCodeword& fetch_image(std::size_t cw) {
        const StoredCodeword& stored = store_.codewords[cw];
        const std::uint64_t e = epoch_++;
        scratch_flips_.clear();
        BitErrorSampler sampler(fc_.ber, substream(fc_.master_seed, cw, e));
        sampler.sample(static_cast<std::uint64_t>(stored.bytes.size()) * 8,
                       [this](std::uint64_t pos) { scratch_flips_.push_back(static_cast<std::uint32_t>(pos)); });
        if (scratch_flips_.empty()) return stored;
        scratch_image_.bytes = stored.bytes;
        for (const std::uint32_t pos : scratch_flips_) flip_bit(scratch_image_.bytes, pos);
        return scratch_image_;
    }

    DecodeResult decode_image(const StoredCodeword& image) {
        ++log_.rs_decodes;
        const std::vector<GfSymbol> view = symbol_view(image, store_.config);
        DecodeResult res = rs_.decode(view);
        if (!res.ok) ++log_.rs_decode_failures;
        return res;
    }

    static void copy_chunks(const StoredCodeword& image, int offset, int k, std::span<std::uint8_t> out) {
        for (int c = offset; c < offset + k; ++c) {
            std::memcpy(out.data() + static_cast<std::size_t>(c - offset) * kChunkDataBytes, image.unit_data(c).data(),
                        kChunkDataBytes);
        }
    }

    void record(char kind, char klass, int k, bool crc_failed, bool escalated, bool decode_ok, std::uint64_t wr0,
                std::uint64_t ww0) {
        if (recorder_ == nullptr) return;
        RequestRecord rec;
        rec.request_id = log_.requests - 1;
        rec.kind = kind;
        rec.klass = klass;
        rec.k = k;
        rec.crc_failed = crc_failed;
        rec.escalated = escalated;
        rec.decode_ok = decode_ok;
        rec.wire_read = log_.wire_bytes_read - wr0;
        rec.wire_written = log_.wire_bytes_written - ww0;
        recorder_->append(rec);
    }

    MemoryStore& store_;
    FaultConfig fc_;
    RsCode rs_;
    AccessEventLog log_;
    std::uint64_t epoch_ = 0;
    EventRecorder* recorder_ = nullptr;
    std::vector<std::uint32_t> scratch_flips_;
    StoredCodeword scratch_image_;
};

}  // namespace hbmecc
