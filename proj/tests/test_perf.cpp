#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hbmecc/perf.hpp"

using namespace hbmecc;

TEST_CASE("p_escalate matches the published operating points") {
    CHECK(p_escalate(1e-4, 1) == Catch::Approx(0.0268).margin(5e-4));
    CHECK(p_escalate(1e-4, 4) == Catch::Approx(0.1031).margin(1e-3));
    CHECK(p_escalate(0.0, 3) == 0.0);
    CHECK_THROWS_AS(p_escalate(1e-4, 0), std::invalid_argument);
}

TEST_CASE("decode_failure_rate basics") {
    const CodewordConfig cfg = CodewordConfig::rate16_17(512, 16);
    CHECK(decode_failure_rate(0.0, cfg) == 0.0);
    CHECK(decode_failure_rate(1.0, cfg) == 1.0);

    // Same total length, more parity: strictly lower failure rate.
    const CodewordConfig weak(4, 16, 4);   // N = 80, t = 8
    const CodewordConfig strong(3, 32, 4); // N = 80, t = 16
    const double fw = decode_failure_rate(1e-3, weak);
    const double fs = decode_failure_rate(1e-3, strong);
    CHECK(fs < fw);

    // Monotone in p.
    double prev = 0.0;
    for (const double p : {1e-6, 1e-5, 1e-4, 1e-3, 1e-2}) {
        const double f = decode_failure_rate(p, cfg);
        CHECK(f >= prev);
        prev = f;
    }
}

TEST_CASE("decode_failure_rate agrees with Monte Carlo at p=1e-3") {
    const CodewordConfig cfg = CodewordConfig::rate16_17(128, 4);  // N=68, t=2
    const double p = 1e-3;
    const double analytic = decode_failure_rate(p, cfg);
    const int trials = 30000;
    int exceed = 0;
    const int n = 16 * cfg.data_chunks + cfg.parity_syms;
    for (int trial = 0; trial < trials; ++trial) {
        // Count symbols hit by at least one raw bit flip.
        int symbol_errors = 0;
        int last_symbol = -1;
        BitErrorSampler sampler(p, substream(1001, 0, static_cast<std::uint64_t>(trial)));
        sampler.sample(static_cast<std::uint64_t>(n) * 16, [&](std::uint64_t pos) {
            const int sym = static_cast<int>(pos / 16);
            if (sym != last_symbol) {
                ++symbol_errors;
                last_symbol = sym;
            }
        });
        if (symbol_errors > cfg.geometry().t()) ++exceed;
    }
    const double mc = static_cast<double>(exceed) / trials;
    const double sigma = std::sqrt(analytic * (1 - analytic) / trials);
    CHECK(std::abs(mc - analytic) <= 3 * sigma);
}

TEST_CASE("gen_trace determinism and edge ratios") {
    TraceParams tp;
    tp.request_count = 5000;
    tp.seq_ratio = 0.5;
    tp.seed = 42;
    tp.store_codewords = 64;
    const Trace a = gen_trace(tp, 16);
    const Trace b = gen_trace(tp, 16);
    CHECK(a.serialize() == b.serialize());

    tp.seq_ratio = 1.0;
    const Trace all_seq = gen_trace(tp, 16);
    std::uint32_t expect = 0;
    for (const auto& r : all_seq.requests) {
        REQUIRE(r.sequential);
        REQUIRE(r.k == 16);
        REQUIRE(r.codeword == expect % 64);  // ascending with wraparound
        ++expect;
    }

    tp.seq_ratio = 0.0;
    const Trace all_rand = gen_trace(tp, 16);
    for (const auto& r : all_rand.requests) REQUIRE_FALSE(r.sequential);
}

TEST_CASE("random k histogram matches the configured distribution") {
    TraceParams tp;
    tp.request_count = 20000;
    tp.seq_ratio = 0.0;
    tp.random_k_dist = {0.4, 0.3, 0.2, 0.1};
    tp.seed = 43;
    const Trace trace = gen_trace(tp, 16);
    std::array<int, 4> counts{};
    for (const auto& r : trace.requests) {
        REQUIRE(r.offset + r.k <= 16);
        ++counts[static_cast<std::size_t>(r.k - 1)];
    }
    for (int i = 0; i < 4; ++i) {
        const double p = tp.random_k_dist[static_cast<std::size_t>(i)];
        const double sigma = std::sqrt(p * (1 - p) * static_cast<double>(tp.request_count));
        CHECK(std::abs(counts[static_cast<std::size_t>(i)] - p * tp.request_count) <= 3 * sigma);
    }
}

TEST_CASE("sequential chunk share tracks seq_ratio") {
    TraceParams tp;
    tp.request_count = 40000;
    tp.seq_ratio = 0.99;
    tp.seed = 44;
    const Trace trace = gen_trace(tp, 16);
    std::uint64_t seq_chunks = 0, total_chunks = 0;
    for (const auto& r : trace.requests) {
        total_chunks += r.k;
        if (r.sequential) seq_chunks += r.k;
    }
    const double share = static_cast<double>(seq_chunks) / static_cast<double>(total_chunks);
    CHECK(share == Catch::Approx(0.99).margin(0.004));
}

TEST_CASE("k distribution clamps to small codewords") {
    TraceParams tp;
    tp.request_count = 2000;
    tp.seq_ratio = 0.0;
    tp.seed = 45;
    const Trace trace = gen_trace(tp, 2);
    for (const auto& r : trace.requests) {
        REQUIRE(r.k <= 2);
        REQUIRE(r.offset + r.k <= 2);
    }
}

TEST_CASE("fault-free sequential run hits the ideal utilization exactly") {
    TraceParams tp;
    tp.request_count = 500;
    tp.seq_ratio = 1.0;
    tp.seed = 46;
    tp.store_codewords = 32;
    const CodewordConfig cfg = CodewordConfig::fixed_parity(512, 16);
    const Trace trace = gen_trace(tp, cfg.data_chunks);
    const TrafficStats stats = run_trace(trace, cfg, FaultConfig(0.0, 1), SequentialReadPolicy::kCrcFirst);
    CHECK(stats.ctrl.wire_bytes_read == 500ull * 16 * kUnitBytes);
    CHECK(stats.useful_user_bytes == 500ull * 512);
    CHECK(stats.ctrl.escalations == 0);
    CHECK(stats.ctrl.silent_corruptions == 0);
    const PerfResult perf = tokens_per_s(stats);
    CHECK(perf.utilization == Catch::Approx(kIdealUtilization).epsilon(1e-12));
    CHECK(perf.normalized_utilization == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(perf.tokens_per_s == Catch::Approx(18.51).epsilon(1e-12));
}

TEST_CASE("tokens_per_s model") {
    TrafficStats st;
    st.useful_user_bytes = 3200;
    st.ctrl.wire_bytes_read = 3400;
    CHECK(tokens_per_s(st).tokens_per_s == Catch::Approx(18.51).epsilon(1e-12));
    st.ctrl.wire_bytes_read = 6800;  // half the ideal utilization
    CHECK(tokens_per_s(st).tokens_per_s == Catch::Approx(9.255).epsilon(1e-12));
    TrafficStats empty;
    CHECK_THROWS_AS(tokens_per_s(empty), std::domain_error);
}

TEST_CASE("run_trace is deterministic") {
    TraceParams tp;
    tp.request_count = 2000;
    tp.seq_ratio = 0.9;
    tp.read_fraction = 0.7;
    tp.seed = 47;
    tp.store_codewords = 64;
    const CodewordConfig cfg = CodewordConfig::fixed_parity(256, 8);
    const Trace trace = gen_trace(tp, cfg.data_chunks);
    const FaultConfig fc(1e-3, 47);
    const TrafficStats a = run_trace(trace, cfg, fc, SequentialReadPolicy::kCrcFirst);
    const TrafficStats b = run_trace(trace, cfg, fc, SequentialReadPolicy::kCrcFirst);
    CHECK(a.ctrl.wire_bytes_read == b.ctrl.wire_bytes_read);
    CHECK(a.ctrl.wire_bytes_written == b.ctrl.wire_bytes_written);
    CHECK(a.ctrl.escalations == b.ctrl.escalations);
    CHECK(a.ctrl.rs_decodes == b.ctrl.rs_decodes);
    CHECK(a.ctrl.rs_decode_failures == b.ctrl.rs_decode_failures);
    CHECK(a.ctrl.silent_corruptions == b.ctrl.silent_corruptions);
    CHECK(a.useful_user_bytes == b.useful_user_bytes);
}

TEST_CASE("utilization is non-increasing in the raw BER") {
    TraceParams tp;
    tp.request_count = 20000;
    tp.seq_ratio = 0.99;
    tp.seed = 48;
    const CodewordConfig cfg = CodewordConfig::fixed_parity(512, 16);
    const Trace trace = gen_trace(tp, cfg.data_chunks);
    double prev = 2.0;
    for (const double p : {0.0, 1e-5, 1e-4, 1e-3}) {
        const TrafficStats st = run_trace(trace, cfg, FaultConfig(p, 48), SequentialReadPolicy::kCrcFirst);
        const double u = tokens_per_s(st).utilization;
        CHECK(u <= prev + 1e-12);
        prev = u;
    }
}

TEST_CASE("utilization is non-increasing in the random-access share at BER 1e-3") {
    const CodewordConfig cfg = CodewordConfig::fixed_parity(512, 16);
    double prev = 2.0;
    for (const double seq : {1.0, 0.95, 0.9}) {
        TraceParams tp;
        tp.request_count = 10000;
        tp.seq_ratio = seq;
        tp.seed = 52;
        const Trace trace = gen_trace(tp, cfg.data_chunks);
        const TrafficStats st = run_trace(trace, cfg, FaultConfig(1e-3, 52), SequentialReadPolicy::kCrcFirst);
        const double u = tokens_per_s(st).utilization;
        CHECK(u <= prev + 1e-9);
        prev = u;
    }
}

TEST_CASE("sequential crc_first escalation fraction matches the analytic rate") {
    const CodewordConfig cfg = CodewordConfig::fixed_parity(512, 16);  // d = 16
    TraceParams tp;
    tp.request_count = 2000;
    tp.seq_ratio = 1.0;
    tp.seed = 53;
    const Trace trace = gen_trace(tp, cfg.data_chunks);
    const TrafficStats st = run_trace(trace, cfg, FaultConfig(1e-3, 53), SequentialReadPolicy::kCrcFirst);
    const double analytic = unit_error_prob(1e-3, 272.0 * 16);  // ~0.987
    const double mc = static_cast<double>(st.ctrl.escalations) / static_cast<double>(st.requests);
    const double sigma = std::sqrt(analytic * (1 - analytic) / static_cast<double>(st.requests));
    // CRC escapes shave a few 1e-5 off the observed rate; covered by 3 sigma.
    CHECK(std::abs(mc - analytic) <= 3 * sigma + 1e-4);
}

TEST_CASE("exponent-only protection beats full protection on utilization") {
    TraceParams tp;
    tp.request_count = 10000;
    tp.seq_ratio = 0.99;
    tp.seed = 49;
    const CodewordConfig cfg = CodewordConfig::fixed_parity(256, 8);
    const Trace trace = gen_trace(tp, cfg.data_chunks);
    const FaultConfig fc(1e-3, 49);
    const TrafficStats full = run_trace(trace, cfg, fc, SequentialReadPolicy::kCrcFirst);
    const ProtectionConfig pc = bf16_protection(Bf16Field::kExponent);
    const TrafficStats adaptive = run_trace(trace, cfg, fc, SequentialReadPolicy::kCrcFirst, &pc);
    CHECK(tokens_per_s(adaptive).normalized_utilization > tokens_per_s(full).normalized_utilization);
    // Bypass traffic is exactly (1 - gamma) of the logical bytes read.
    std::uint64_t expected_bypass = 0;
    for (const auto& r : trace.requests) {
        if (r.is_read) expected_bypass += 16ull * r.k;
    }
    CHECK(adaptive.bypass_read == expected_bypass);
}

TEST_CASE("adaptive writes keep the protected store consistent") {
    TraceParams tp;
    tp.request_count = 3000;
    tp.seq_ratio = 0.5;
    tp.read_fraction = 0.5;
    tp.seed = 50;
    tp.store_codewords = 32;
    const CodewordConfig cfg = CodewordConfig::fixed_parity(256, 8);
    const Trace trace = gen_trace(tp, cfg.data_chunks);
    const ProtectionConfig pc = bf16_protection(Bf16Field::kExponent);
    // Fault-free: nothing silent, every read matches the protected truth.
    const TrafficStats st = run_trace(trace, cfg, FaultConfig(0.0, 50), SequentialReadPolicy::kCrcFirst, &pc);
    CHECK(st.ctrl.silent_corruptions == 0);
    CHECK(st.ctrl.rs_decode_failures == 0);
    CHECK(st.ctrl.full_rmw_fallbacks == 0);
}

TEST_CASE("adaptive mixed traffic under faults stays deterministic and consistent") {
    TraceParams tp;
    tp.request_count = 4000;
    tp.seq_ratio = 0.9;
    tp.read_fraction = 0.6;
    tp.seed = 51;
    tp.store_codewords = 64;
    const CodewordConfig cfg = CodewordConfig::fixed_parity(256, 8);
    const Trace trace = gen_trace(tp, cfg.data_chunks);
    const ProtectionConfig pc = bf16_protection(Bf16Field::kExponent);
    const FaultConfig fc(1e-3, 51);
    const TrafficStats a = run_trace(trace, cfg, fc, SequentialReadPolicy::kCrcFirst, &pc);
    const TrafficStats b = run_trace(trace, cfg, fc, SequentialReadPolicy::kCrcFirst, &pc);
    CHECK(a.ctrl.wire_bytes_read == b.ctrl.wire_bytes_read);
    CHECK(a.ctrl.silent_corruptions == b.ctrl.silent_corruptions);
    CHECK(a.bypass_written == b.bypass_written);
    // Controller traffic moves in whole units; bypass traffic does not.
    CHECK(a.ctrl.wire_bytes_read % kUnitBytes == 0);
    CHECK(a.ctrl.wire_bytes_written % kUnitBytes == 0);
    CHECK(a.ctrl.rs_decodes >= a.ctrl.escalations);
    CHECK(a.ctrl.full_rmw_fallbacks > 0);  // at 1e-3 some writes must fall back
    CHECK(a.useful_user_bytes <= a.total_wire_read() + a.total_wire_written());
}

TEST_CASE("event log counters satisfy their additivity invariants under noise") {
    TraceParams tp;
    tp.request_count = 5000;
    tp.seq_ratio = 0.8;
    tp.read_fraction = 0.7;
    tp.seed = 54;
    tp.store_codewords = 128;
    const CodewordConfig cfg = CodewordConfig::fixed_parity(512, 16);
    const Trace trace = gen_trace(tp, cfg.data_chunks);
    const TrafficStats st = run_trace(trace, cfg, FaultConfig(1e-3, 54), SequentialReadPolicy::kCrcFirst);
    CHECK(st.ctrl.requests == 5000);
    CHECK(st.ctrl.escalations <= st.ctrl.crc_failures);
    CHECK(st.ctrl.rs_decodes >= st.ctrl.escalations);
    CHECK(st.ctrl.rs_decode_failures <= st.ctrl.rs_decodes);
    CHECK(st.ctrl.delta_updates + st.ctrl.full_rmw_fallbacks > 0);
}
