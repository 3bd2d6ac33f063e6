#pragma once

#include <cstdint>
#include <mutex>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hbmecc/gf16.hpp"

namespace hbmecc {

// Systematic shortened Reed-Solomon code over GF(2^16).
//
// Generator polynomial g(x) = prod_{i=1..q} (x - alpha^i). Data symbol j is
// the coefficient of x^(q+j), parity symbol i the coefficient of x^i, so a
// codeword is c(x) = D(x)*x^q + (D(x)*x^q mod g(x)) and parity of the unit
// vector at data position j equals x^(q+j) mod g(x). The decoder is
// syndromes + Berlekamp-Massey + Chien search + Forney, with early exit on
// zero syndromes.

struct RsGeometry {
    int d_syms = 0;
    int q_syms = 0;

    RsGeometry(int data_symbols, int parity_symbols)
        : d_syms(data_symbols), q_syms(parity_symbols) {
        if (d_syms < 1 || q_syms < 1) {
            throw std::invalid_argument("RsGeometry: need at least one data and one parity symbol");
        }
        if (d_syms + q_syms > 65535) {
            throw std::invalid_argument("RsGeometry: codeword exceeds GF(2^16) length bound");
        }
    }

    int t() const { return q_syms / 2; }
    int n() const { return d_syms + q_syms; }

    bool operator==(const RsGeometry&) const = default;
};

// Sparse data vector: (position, value) pairs over a d_syms-long vector,
// positions strictly increasing. Unlisted positions are zero.
struct SparseDataVector {
    int length = 0;
    std::vector<std::pair<int, GfSymbol>> entries;

    void validate() const {
        int prev = -1;
        for (const auto& [pos, val] : entries) {
            (void)val;
            if (pos <= prev || pos >= length) {
                throw std::invalid_argument("SparseDataVector: positions must be strictly increasing and in range");
            }
            prev = pos;
        }
    }
};

struct DecodeResult {
    bool ok = false;
    std::vector<GfSymbol> data;  // valid when ok
    int error_count = 0;         // corrected symbols (data + parity)
    bool locator_ran = false;    // false on the zero-syndrome fast path
};

class RsCode {
  public:
    explicit RsCode(RsGeometry geom) : geom_(geom), gen_(static_cast<std::size_t>(geom.q_syms) + 1, 0) {
        // g(x) = prod_{i=1..q} (x - alpha^i); alpha^i == -alpha^i in char 2.
        gen_[0] = 1;
        int deg = 0;
        for (int i = 1; i <= geom_.q_syms; ++i) {
            const GfSymbol root = gf_alpha_pow(static_cast<std::uint64_t>(i));
            gen_[static_cast<std::size_t>(deg) + 1] = gen_[static_cast<std::size_t>(deg)];
            for (int j = deg; j >= 1; --j) {
                gen_[static_cast<std::size_t>(j)] =
                    static_cast<GfSymbol>(gen_[static_cast<std::size_t>(j) - 1] ^ gf_mul(gen_[static_cast<std::size_t>(j)], root));
            }
            gen_[0] = gf_mul(gen_[0], root);
            ++deg;
        }
    }

    const RsGeometry& geometry() const { return geom_; }

    // Parity of a dense data vector (LFSR division by g).
    std::vector<GfSymbol> encode(std::span<const GfSymbol> data) const {
        if (static_cast<int>(data.size()) != geom_.d_syms) {
            throw std::invalid_argument("rs_encode: data length does not match geometry");
        }
        const int q = geom_.q_syms;
        std::vector<GfSymbol> rem(static_cast<std::size_t>(q), 0);
        for (int j = geom_.d_syms - 1; j >= 0; --j) {
            const GfSymbol fb = static_cast<GfSymbol>(data[static_cast<std::size_t>(j)] ^ rem[static_cast<std::size_t>(q) - 1]);
            for (int i = q - 1; i >= 1; --i) {
                rem[static_cast<std::size_t>(i)] =
                    static_cast<GfSymbol>(rem[static_cast<std::size_t>(i) - 1] ^ gf_mul(fb, gen_[static_cast<std::size_t>(i)]));
            }
            rem[0] = gf_mul(fb, gen_[0]);
        }
        return rem;
    }

    // received = data || parity, length n.
    DecodeResult decode(std::span<const GfSymbol> received) const {
        const int k = geom_.d_syms;
        const int q = geom_.q_syms;
        const int n = geom_.n();
        if (static_cast<int>(received.size()) != n) {
            throw std::invalid_argument("rs_decode: received length does not match geometry");
        }

        // Degree-ordered codeword: poly[i] = coeff of x^i.
        std::vector<GfSymbol> poly(static_cast<std::size_t>(n));
        for (int i = 0; i < q; ++i) poly[static_cast<std::size_t>(i)] = received[static_cast<std::size_t>(k + i)];
        for (int j = 0; j < k; ++j) poly[static_cast<std::size_t>(q + j)] = received[static_cast<std::size_t>(j)];

        std::vector<GfSymbol> synd(static_cast<std::size_t>(q));
        bool any = false;
        for (int j = 0; j < q; ++j) {
            const GfSymbol x = gf_alpha_pow(static_cast<std::uint64_t>(j) + 1);
            GfSymbol acc = 0;
            for (int i = n - 1; i >= 0; --i) {
                acc = static_cast<GfSymbol>(gf_mul(acc, x) ^ poly[static_cast<std::size_t>(i)]);
            }
            synd[static_cast<std::size_t>(j)] = acc;
            any = any || acc != 0;
        }

        DecodeResult res;
        if (!any) {
            res.ok = true;
            res.data.assign(received.begin(), received.begin() + k);
            return res;  // error_count 0, locator_ran false
        }
        res.locator_ran = true;

        // Berlekamp-Massey for the error locator Lambda.
        std::vector<GfSymbol> lambda{1};
        std::vector<GfSymbol> prev{1};
        int L = 0;
        int m = 1;
        GfSymbol b = 1;
        for (int step = 0; step < q; ++step) {
            GfSymbol delta = synd[static_cast<std::size_t>(step)];
            for (int i = 1; i <= L && i < static_cast<int>(lambda.size()); ++i) {
                delta = static_cast<GfSymbol>(delta ^ gf_mul(lambda[static_cast<std::size_t>(i)], synd[static_cast<std::size_t>(step - i)]));
            }
            if (delta == 0) {
                ++m;
                continue;
            }
            const GfSymbol coef = gf_div(delta, b);
            std::vector<GfSymbol> next = lambda;
            if (next.size() < prev.size() + static_cast<std::size_t>(m)) {
                next.resize(prev.size() + static_cast<std::size_t>(m), 0);
            }
            for (std::size_t i = 0; i < prev.size(); ++i) {
                next[i + static_cast<std::size_t>(m)] =
                    static_cast<GfSymbol>(next[i + static_cast<std::size_t>(m)] ^ gf_mul(coef, prev[i]));
            }
            if (2 * L <= step) {
                prev = std::move(lambda);
                L = step + 1 - L;
                b = delta;
                m = 1;
            } else {
                ++m;
            }
            lambda = std::move(next);
        }
        while (!lambda.empty() && lambda.back() == 0) lambda.pop_back();
        const int deg = static_cast<int>(lambda.size()) - 1;
        if (deg <= 0 || deg > geom_.t() || deg != L) {
            return res;  // uncorrectable
        }

        // Chien search over codeword degrees 0..n-1: error at degree e iff
        // Lambda(alpha^-e) == 0.
        std::vector<int> error_degs;
        error_degs.reserve(static_cast<std::size_t>(deg));
        for (int e = 0; e < n; ++e) {
            const std::uint32_t xinv_log = (gf16::kGroupOrder - static_cast<std::uint32_t>(e) % gf16::kGroupOrder) % gf16::kGroupOrder;
            GfSymbol acc = lambda[0];
            for (int i = 1; i <= deg; ++i) {
                if (lambda[static_cast<std::size_t>(i)] == 0) continue;
                const std::uint64_t elog = (static_cast<std::uint64_t>(xinv_log) * static_cast<std::uint64_t>(i)) % gf16::kGroupOrder;
                acc = static_cast<GfSymbol>(acc ^ gf_mul(lambda[static_cast<std::size_t>(i)], gf_alpha_pow(elog)));
            }
            if (acc == 0) error_degs.push_back(e);
        }
        if (static_cast<int>(error_degs.size()) != deg) {
            return res;  // roots outside the shortened word or a repeated root
        }

        // Forney: Omega = S(x) * Lambda(x) mod x^q, with S(x) = sum S_j x^j.
        std::vector<GfSymbol> omega(static_cast<std::size_t>(q), 0);
        for (int i = 0; i < static_cast<int>(lambda.size()); ++i) {
            if (lambda[static_cast<std::size_t>(i)] == 0) continue;
            for (int j = 0; i + j < q; ++j) {
                omega[static_cast<std::size_t>(i + j)] = static_cast<GfSymbol>(
                    omega[static_cast<std::size_t>(i + j)] ^ gf_mul(lambda[static_cast<std::size_t>(i)], synd[static_cast<std::size_t>(j)]));
            }
        }

        std::vector<GfSymbol> magnitudes(error_degs.size());
        for (std::size_t idx = 0; idx < error_degs.size(); ++idx) {
            const int e = error_degs[idx];
            const std::uint32_t xinv_log = (gf16::kGroupOrder - static_cast<std::uint32_t>(e)) % gf16::kGroupOrder;
            GfSymbol om = 0;
            for (int i = 0; i < q; ++i) {
                if (omega[static_cast<std::size_t>(i)] == 0) continue;
                const std::uint64_t elog = (static_cast<std::uint64_t>(xinv_log) * static_cast<std::uint64_t>(i)) % gf16::kGroupOrder;
                om = static_cast<GfSymbol>(om ^ gf_mul(omega[static_cast<std::size_t>(i)], gf_alpha_pow(elog)));
            }
            // Lambda'(x) keeps odd-degree terms only (char 2).
            GfSymbol lp = 0;
            for (int i = 1; i <= deg; i += 2) {
                const std::uint64_t elog = (static_cast<std::uint64_t>(xinv_log) * static_cast<std::uint64_t>(i - 1)) % gf16::kGroupOrder;
                lp = static_cast<GfSymbol>(lp ^ gf_mul(lambda[static_cast<std::size_t>(i)], gf_alpha_pow(elog)));
            }
            if (lp == 0) return res;
            const GfSymbol mag = gf_div(om, lp);
            if (mag == 0) return res;  // inconsistent correction
            magnitudes[idx] = mag;
        }

        // Apply and re-verify the syndromes incrementally; a surviving
        // nonzero syndrome means the locator was bogus.
        for (std::size_t idx = 0; idx < error_degs.size(); ++idx) {
            poly[static_cast<std::size_t>(error_degs[idx])] =
                static_cast<GfSymbol>(poly[static_cast<std::size_t>(error_degs[idx])] ^ magnitudes[idx]);
        }
        for (int j = 0; j < q; ++j) {
            GfSymbol s = synd[static_cast<std::size_t>(j)];
            for (std::size_t idx = 0; idx < error_degs.size(); ++idx) {
                const std::uint64_t elog =
                    (static_cast<std::uint64_t>(error_degs[idx]) * (static_cast<std::uint64_t>(j) + 1)) % gf16::kGroupOrder;
                s = static_cast<GfSymbol>(s ^ gf_mul(magnitudes[idx], gf_alpha_pow(elog)));
            }
            if (s != 0) return res;
        }

        res.ok = true;
        res.error_count = deg;
        res.data.resize(static_cast<std::size_t>(k));
        for (int j = 0; j < k; ++j) res.data[static_cast<std::size_t>(j)] = poly[static_cast<std::size_t>(q + j)];
        return res;
    }

    // Parity delta RS(new) ^ RS(old) for two sparse vectors over the same
    // position set; XOR into the old parity to get the new parity. Cost is
    // q multiplies per touched position via cached generator columns.
    std::vector<GfSymbol> parity_delta(const SparseDataVector& oldv, const SparseDataVector& newv) const {
        if (oldv.length != geom_.d_syms || newv.length != geom_.d_syms) {
            throw std::invalid_argument("rs_parity_delta: vector length does not match geometry");
        }
        oldv.validate();
        newv.validate();
        if (oldv.entries.size() != newv.entries.size()) {
            throw std::invalid_argument("rs_parity_delta: position sets differ");
        }
        for (std::size_t i = 0; i < oldv.entries.size(); ++i) {
            if (oldv.entries[i].first != newv.entries[i].first) {
                throw std::invalid_argument("rs_parity_delta: position sets differ");
            }
        }
        const int q = geom_.q_syms;
        const auto& cols = columns();
        std::vector<GfSymbol> delta(static_cast<std::size_t>(q), 0);
        for (std::size_t i = 0; i < oldv.entries.size(); ++i) {
            const GfSymbol diff = static_cast<GfSymbol>(oldv.entries[i].second ^ newv.entries[i].second);
            if (diff == 0) continue;
            const std::size_t base = static_cast<std::size_t>(oldv.entries[i].first) * static_cast<std::size_t>(q);
            for (int j = 0; j < q; ++j) {
                delta[static_cast<std::size_t>(j)] =
                    static_cast<GfSymbol>(delta[static_cast<std::size_t>(j)] ^ gf_mul(diff, cols[base + static_cast<std::size_t>(j)]));
            }
        }
        return delta;
    }

    // Column j of the systematic generator's parity block: x^(q+j) mod g.
    std::span<const GfSymbol> generator_column(int data_pos) const {
        const auto& cols = columns();
        return {cols.data() + static_cast<std::size_t>(data_pos) * static_cast<std::size_t>(geom_.q_syms),
                static_cast<std::size_t>(geom_.q_syms)};
    }

  private:
    const std::vector<GfSymbol>& columns() const {
        std::call_once(columns_once_, [this] {
            const int q = geom_.q_syms;
            const int k = geom_.d_syms;
            columns_.assign(static_cast<std::size_t>(k) * static_cast<std::size_t>(q), 0);
            // x^q mod g = g - x^q; then step col(m+1) = x*col(m) mod g.
            std::vector<GfSymbol> cur(gen_.begin(), gen_.begin() + q);
            for (int j = 0; j < k; ++j) {
                std::copy(cur.begin(), cur.end(), columns_.begin() + static_cast<std::size_t>(j) * static_cast<std::size_t>(q));
                if (j + 1 == k) break;
                const GfSymbol fb = cur[static_cast<std::size_t>(q) - 1];
                for (int i = q - 1; i >= 1; --i) {
                    cur[static_cast<std::size_t>(i)] =
                        static_cast<GfSymbol>(cur[static_cast<std::size_t>(i) - 1] ^ gf_mul(fb, gen_[static_cast<std::size_t>(i)]));
                }
                cur[0] = gf_mul(fb, gen_[0]);
            }
        });
        return columns_;
    }

    RsGeometry geom_;
    std::vector<GfSymbol> gen_;
    mutable std::once_flag columns_once_;
    mutable std::vector<GfSymbol> columns_;
};

inline std::vector<GfSymbol> rs_encode(std::span<const GfSymbol> data, const RsGeometry& geom) {
    return RsCode(geom).encode(data);
}

inline DecodeResult rs_decode(std::span<const GfSymbol> received, const RsGeometry& geom) {
    return RsCode(geom).decode(received);
}

inline std::vector<GfSymbol> rs_parity_delta(const SparseDataVector& oldv, const SparseDataVector& newv,
                                             const RsGeometry& geom) {
    return RsCode(geom).parity_delta(oldv, newv);
}

}  // namespace hbmecc
