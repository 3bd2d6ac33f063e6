#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hbmecc/bitplane.hpp"
#include "hbmecc/perf.hpp"

namespace hbmecc {

// Config-driven experiment runner. A config names one experiment and its
// parameter grid; the runner executes every grid point (optionally across
// worker threads), then a single writer emits rows in grid order. Output is
// written to a temp file and renamed on success, so a failed run never
// leaves a partial CSV behind.

struct ConfigError : std::runtime_error {
    std::vector<std::string> diagnostics;

    explicit ConfigError(std::vector<std::string> diags)
        : std::runtime_error(join(diags)), diagnostics(std::move(diags)) {}

    static std::string join(const std::vector<std::string>& diags) {
        std::string out = "config error:";
        for (const auto& d : diags) {
            out += "\n  - ";
            out += d;
        }
        return out;
    }
};

enum class ExperimentKind {
    kFailureCurve,
    kSweepCodeword,
    kSweepRandomRatio,
    kAdaptiveBandwidth,
    kBitfieldSweep,
    kSingleRun,
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::kSingleRun;
    std::string kind_name = "single_run";

    std::vector<std::string> preset{"fixed_parity"};
    std::vector<std::string> policy{"crc_first"};
    std::vector<std::string> protection{"full"};
    std::vector<int> codeword_bytes;
    std::vector<double> ber;
    std::vector<double> seq_ratio{0.99};
    double read_fraction = 1.0;
    std::array<double, 4> random_k_distribution{0.25, 0.25, 0.25, 0.25};
    std::uint64_t requests = 20000;
    std::uint32_t store_codewords = 16384;
    int stripe_width = 16;

    std::vector<std::string> fields{"sign", "exponent", "mantissa"};
    std::vector<double> rates;
    std::uint64_t values = 1000000;

    std::uint64_t master_seed = 1;
    std::string out;
    std::string event_log;
};

namespace detail {

inline const std::set<std::string>& allowed_keys(ExperimentKind kind) {
    static const std::set<std::string> common = {"experiment", "master_seed", "out"};
    static const std::set<std::string> perf = [] {
        std::set<std::string> s = common;
        s.insert({"preset", "policy", "protection", "codeword_bytes", "ber", "seq_ratio", "read_fraction",
                  "random_k_distribution", "requests", "store_codewords", "stripe_width"});
        return s;
    }();
    static const std::set<std::string> curve = [] {
        std::set<std::string> s = common;
        s.insert({"preset", "codeword_bytes", "ber"});
        return s;
    }();
    static const std::set<std::string> bitfield = [] {
        std::set<std::string> s = common;
        s.insert({"fields", "rates", "values"});
        return s;
    }();
    static const std::set<std::string> single = [] {
        std::set<std::string> s = perf;
        s.insert("event_log");
        return s;
    }();
    switch (kind) {
        case ExperimentKind::kFailureCurve:
            return curve;
        case ExperimentKind::kBitfieldSweep:
            return bitfield;
        case ExperimentKind::kSingleRun:
            return single;
        default:
            return perf;
    }
}

inline bool parse_kind(const std::string& name, ExperimentKind& kind) {
    if (name == "failure_curve") kind = ExperimentKind::kFailureCurve;
    else if (name == "sweep_codeword") kind = ExperimentKind::kSweepCodeword;
    else if (name == "sweep_random_ratio") kind = ExperimentKind::kSweepRandomRatio;
    else if (name == "adaptive_bandwidth") kind = ExperimentKind::kAdaptiveBandwidth;
    else if (name == "bitfield_sweep") kind = ExperimentKind::kBitfieldSweep;
    else if (name == "single_run") kind = ExperimentKind::kSingleRun;
    else return false;
    return true;
}

class ConfigReader {
  public:
    explicit ConfigReader(const nlohmann::json& j) : j_(j) {}

    std::vector<std::string>& diags() { return diags_; }

    bool has(const char* key) const { return j_.contains(key); }

    // Numeric list: scalar, array, or {"logspace": {"min","max","points"}}.
    void num_list(const char* key, std::vector<double>& out, double lo, double hi, bool required) {
        if (!j_.contains(key)) {
            if (required) diags_.push_back(std::string("missing required key \"") + key + "\"");
            return;
        }
        const auto& v = j_.at(key);
        std::vector<double> vals;
        if (v.is_number()) {
            vals.push_back(v.get<double>());
        } else if (v.is_array()) {
            for (const auto& e : v) {
                if (!e.is_number()) {
                    diags_.push_back(std::string("\"") + key + "\": expected numbers");
                    return;
                }
                vals.push_back(e.get<double>());
            }
        } else if (v.is_object() && v.contains("logspace")) {
            const auto& ls = v.at("logspace");
            for (const char* f : {"min", "max", "points"}) {
                if (!ls.contains(f) || !ls.at(f).is_number()) {
                    diags_.push_back(std::string("\"") + key + ".logspace\": needs numeric min, max, points");
                    return;
                }
            }
            const double mn = ls.at("min").get<double>();
            const double mx = ls.at("max").get<double>();
            const int points = ls.at("points").get<int>();
            if (!(mn > 0.0) || !(mx >= mn) || points < 2) {
                diags_.push_back(std::string("\"") + key + ".logspace\": need 0 < min <= max and points >= 2");
                return;
            }
            for (int i = 0; i < points; ++i) {
                vals.push_back(mn * std::pow(mx / mn, static_cast<double>(i) / (points - 1)));
            }
        } else {
            diags_.push_back(std::string("\"") + key + "\": expected a number, an array, or a logspace object");
            return;
        }
        if (vals.empty()) {
            diags_.push_back(std::string("\"") + key + "\": list must not be empty");
            return;
        }
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (!(vals[i] >= lo && vals[i] <= hi)) {
                std::ostringstream os;
                os << "\"" << key << "[" << i << "]\": value " << vals[i] << " out of range [" << lo << ", " << hi << "]";
                diags_.push_back(os.str());
                return;
            }
        }
        out = std::move(vals);
    }

    void int_list(const char* key, std::vector<int>& out, long lo, long hi, bool required) {
        if (!j_.contains(key)) {
            if (required) diags_.push_back(std::string("missing required key \"") + key + "\"");
            return;
        }
        const auto& v = j_.at(key);
        std::vector<int> vals;
        const auto take = [&](const nlohmann::json& e) {
            if (!e.is_number_integer()) {
                diags_.push_back(std::string("\"") + key + "\": expected integers");
                return false;
            }
            const long val = e.get<long>();
            if (val < lo || val > hi) {
                std::ostringstream os;
                os << "\"" << key << "\": value " << val << " out of range [" << lo << ", " << hi << "]";
                diags_.push_back(os.str());
                return false;
            }
            vals.push_back(static_cast<int>(val));
            return true;
        };
        if (v.is_number_integer()) {
            if (!take(v)) return;
        } else if (v.is_array()) {
            for (const auto& e : v) {
                if (!take(e)) return;
            }
        } else {
            diags_.push_back(std::string("\"") + key + "\": expected an integer or an array of integers");
            return;
        }
        if (vals.empty()) {
            diags_.push_back(std::string("\"") + key + "\": list must not be empty");
            return;
        }
        out = std::move(vals);
    }

    void token_list(const char* key, std::vector<std::string>& out, const std::set<std::string>& allowed) {
        if (!j_.contains(key)) return;
        const auto& v = j_.at(key);
        std::vector<std::string> vals;
        const auto take = [&](const nlohmann::json& e) {
            if (!e.is_string() || allowed.find(e.get<std::string>()) == allowed.end()) {
                std::string msg = std::string("\"") + key + "\": expected one of {";
                bool first = true;
                for (const auto& a : allowed) {
                    if (!first) msg += ", ";
                    msg += a;
                    first = false;
                }
                msg += "}";
                diags_.push_back(msg);
                return false;
            }
            vals.push_back(e.get<std::string>());
            return true;
        };
        if (v.is_string()) {
            if (!take(v)) return;
        } else if (v.is_array()) {
            for (const auto& e : v) {
                if (!take(e)) return;
            }
        } else {
            diags_.push_back(std::string("\"") + key + "\": expected a string or an array of strings");
            return;
        }
        if (vals.empty()) {
            diags_.push_back(std::string("\"") + key + "\": list must not be empty");
            return;
        }
        out = std::move(vals);
    }

    void number(const char* key, double& out, double lo, double hi) {
        if (!j_.contains(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_number()) {
            diags_.push_back(std::string("\"") + key + "\": expected a number");
            return;
        }
        const double val = v.get<double>();
        if (!(val >= lo && val <= hi)) {
            std::ostringstream os;
            os << "\"" << key << "\": value " << val << " out of range [" << lo << ", " << hi << "]";
            diags_.push_back(os.str());
            return;
        }
        out = val;
    }

    void uinteger(const char* key, std::uint64_t& out, std::uint64_t lo, std::uint64_t hi) {
        if (!j_.contains(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
            diags_.push_back(std::string("\"") + key + "\": expected a non-negative integer");
            return;
        }
        const std::uint64_t val = v.get<std::uint64_t>();
        if (val < lo || val > hi) {
            std::ostringstream os;
            os << "\"" << key << "\": value " << val << " out of range [" << lo << ", " << hi << "]";
            diags_.push_back(os.str());
            return;
        }
        out = val;
    }

    void string(const char* key, std::string& out) {
        if (!j_.contains(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_string()) {
            diags_.push_back(std::string("\"") + key + "\": expected a string");
            return;
        }
        out = v.get<std::string>();
    }

  private:
    const nlohmann::json& j_;
    std::vector<std::string> diags_;
};

inline CodewordConfig codeword_from_tokens(const std::string& preset, int payload_bytes, int stripe_width) {
    if (preset == "rate16_17") return CodewordConfig::rate16_17(payload_bytes, stripe_width);
    return CodewordConfig::fixed_parity(payload_bytes, stripe_width);
}

inline SequentialReadPolicy policy_from_token(const std::string& policy) {
    return policy == "always_decode" ? SequentialReadPolicy::kAlwaysDecode : SequentialReadPolicy::kCrcFirst;
}

inline std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace detail

inline ExperimentConfig validate_config(const nlohmann::json& j) {
    std::vector<std::string> diags;
    if (!j.is_object()) {
        diags.push_back("top-level config must be a JSON object");
        throw ConfigError(std::move(diags));
    }
    ExperimentConfig cfg;
    if (!j.contains("experiment") || !j.at("experiment").is_string() ||
        !detail::parse_kind(j.at("experiment").get<std::string>(), cfg.kind)) {
        diags.push_back(
            "\"experiment\" must be one of {failure_curve, sweep_codeword, sweep_random_ratio, adaptive_bandwidth, "
            "bitfield_sweep, single_run}");
        throw ConfigError(std::move(diags));
    }
    cfg.kind_name = j.at("experiment").get<std::string>();

    const auto& allowed = detail::allowed_keys(cfg.kind);
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (allowed.find(key) == allowed.end()) {
            diags.push_back("unknown key \"" + key + "\" for experiment \"" + cfg.kind_name + "\"");
        }
    }

    detail::ConfigReader r(j);
    r.diags() = std::move(diags);

    r.uinteger("master_seed", cfg.master_seed, 0, ~std::uint64_t{0});
    r.string("out", cfg.out);

    const bool is_perf = cfg.kind == ExperimentKind::kSweepCodeword || cfg.kind == ExperimentKind::kSweepRandomRatio ||
                         cfg.kind == ExperimentKind::kAdaptiveBandwidth || cfg.kind == ExperimentKind::kSingleRun;

    if (cfg.kind == ExperimentKind::kFailureCurve || is_perf) {
        r.num_list("ber", cfg.ber, 0.0, 1.0, true);
        r.int_list("codeword_bytes", cfg.codeword_bytes, 32, 65535 * 2, true);
        for (int b : cfg.codeword_bytes) {
            if (b % 32 != 0) {
                r.diags().push_back("\"codeword_bytes\": values must be multiples of 32");
                break;
            }
        }
        if (cfg.kind == ExperimentKind::kFailureCurve) cfg.preset = {"rate16_17"};
        r.token_list("preset", cfg.preset, {"rate16_17", "fixed_parity"});
    }
    if (is_perf) {
        r.token_list("policy", cfg.policy, {"crc_first", "always_decode"});
        r.token_list("protection", cfg.protection, {"full", "exponent_only"});
        if (cfg.kind == ExperimentKind::kAdaptiveBandwidth && !j.contains("protection")) {
            cfg.protection = {"full", "exponent_only"};
        }
        r.num_list("seq_ratio", cfg.seq_ratio, 0.0, 1.0, cfg.kind == ExperimentKind::kSweepRandomRatio);
        r.number("read_fraction", cfg.read_fraction, 0.0, 1.0);
        if (j.contains("random_k_distribution")) {
            std::vector<double> kd;
            r.num_list("random_k_distribution", kd, 0.0, 1.0, false);
            if (kd.size() == 4) {
                double sum = 0.0;
                for (std::size_t i = 0; i < 4; ++i) sum += kd[i];
                if (std::abs(sum - 1.0) > 1e-9) {
                    r.diags().push_back("\"random_k_distribution\": weights must sum to 1");
                } else {
                    for (std::size_t i = 0; i < 4; ++i) cfg.random_k_distribution[i] = kd[i];
                }
            } else if (!kd.empty()) {
                r.diags().push_back("\"random_k_distribution\": expected exactly 4 weights for k = 1..4");
            }
        }
        r.uinteger("requests", cfg.requests, 1, 100000000);
        std::uint64_t sc = cfg.store_codewords;
        r.uinteger("store_codewords", sc, 1, 1u << 24);
        cfg.store_codewords = static_cast<std::uint32_t>(sc);
        std::uint64_t sw = static_cast<std::uint64_t>(cfg.stripe_width);
        r.uinteger("stripe_width", sw, 1, 16);
        cfg.stripe_width = static_cast<int>(sw);
    }
    if (cfg.kind == ExperimentKind::kBitfieldSweep) {
        r.token_list("fields", cfg.fields, {"sign", "exponent", "mantissa"});
        r.num_list("rates", cfg.rates, 0.0, 1.0, true);
        r.uinteger("values", cfg.values, 1, 1000000000);
    }
    if (cfg.kind == ExperimentKind::kSingleRun) {
        r.string("event_log", cfg.event_log);
        const auto single = [&r](const char* key, std::size_t n) {
            if (n != 1) r.diags().push_back(std::string("\"") + key + "\": single_run takes exactly one value");
        };
        if (!cfg.ber.empty()) single("ber", cfg.ber.size());
        if (!cfg.codeword_bytes.empty()) single("codeword_bytes", cfg.codeword_bytes.size());
        single("preset", cfg.preset.size());
        single("policy", cfg.policy.size());
        single("protection", cfg.protection.size());
        single("seq_ratio", cfg.seq_ratio.size());
    }
    if (cfg.out.empty()) cfg.out = cfg.kind_name + ".csv";

    if (!r.diags().empty()) throw ConfigError(std::move(r.diags()));
    return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot open config file \"" + path + "\""});
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError({std::string("JSON parse error: ") + e.what()});
    }
    return validate_config(j);
}

// Canonical echo of the parsed config (keys sorted) for golden comparisons.
inline std::string print_config(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["experiment"] = cfg.kind_name;
    j["master_seed"] = cfg.master_seed;
    j["out"] = cfg.out;
    const bool is_perf = cfg.kind == ExperimentKind::kSweepCodeword || cfg.kind == ExperimentKind::kSweepRandomRatio ||
                         cfg.kind == ExperimentKind::kAdaptiveBandwidth || cfg.kind == ExperimentKind::kSingleRun;
    if (cfg.kind == ExperimentKind::kFailureCurve || is_perf) {
        j["ber"] = cfg.ber;
        j["codeword_bytes"] = cfg.codeword_bytes;
        j["preset"] = cfg.preset;
    }
    if (is_perf) {
        j["policy"] = cfg.policy;
        j["protection"] = cfg.protection;
        j["seq_ratio"] = cfg.seq_ratio;
        j["read_fraction"] = cfg.read_fraction;
        j["random_k_distribution"] = cfg.random_k_distribution;
        j["requests"] = cfg.requests;
        j["store_codewords"] = cfg.store_codewords;
        j["stripe_width"] = cfg.stripe_width;
        if (cfg.kind == ExperimentKind::kSingleRun && !cfg.event_log.empty()) j["event_log"] = cfg.event_log;
    }
    if (cfg.kind == ExperimentKind::kBitfieldSweep) {
        j["fields"] = cfg.fields;
        j["rates"] = cfg.rates;
        j["values"] = cfg.values;
    }
    return j.dump(2) + "\n";
}

namespace detail {

struct PerfPoint {
    std::string preset;
    std::string policy;
    std::string protection;
    int codeword_bytes = 0;
    double ber = 0.0;
    double seq_ratio = 0.0;
};

inline std::string run_perf_point(const ExperimentConfig& cfg, const PerfPoint& pt, std::uint64_t seed,
                                  EventRecorder* recorder) {
    const CodewordConfig cw = codeword_from_tokens(pt.preset, pt.codeword_bytes, cfg.stripe_width);
    TraceParams tp;
    tp.request_count = cfg.requests;
    tp.seq_ratio = pt.seq_ratio;
    tp.random_k_dist = cfg.random_k_distribution;
    tp.read_fraction = cfg.read_fraction;
    tp.seed = seed;
    tp.store_codewords = cfg.store_codewords;
    const Trace trace = gen_trace(tp, cw.data_chunks);
    const FaultConfig fc(pt.ber, seed);

    TrafficStats stats;
    CodewordConfig used = cw;
    if (pt.protection == "exponent_only") {
        const ProtectionConfig pc = bf16_protection(Bf16Field::kExponent);
        used = detail::AdaptiveLayout::make_prot_config(pc, cw);
        stats = run_trace(trace, cw, fc, policy_from_token(pt.policy), &pc, recorder);
    } else {
        stats = run_trace(trace, cw, fc, policy_from_token(pt.policy), nullptr, recorder);
    }
    const PerfResult perf = tokens_per_s(stats);

    std::ostringstream os;
    os << pt.preset << ',' << pt.codeword_bytes << ',' << used.data_chunks << ',' << used.parity_syms << ','
       << fmt6(pt.ber) << ',' << fmt6(pt.seq_ratio) << ',' << fmt6(cfg.read_fraction) << ',' << pt.policy << ','
       << pt.protection << ',' << seed << ',' << stats.requests << ',' << stats.total_wire_read() << ','
       << stats.total_wire_written() << ',' << stats.useful_user_bytes << ',' << stats.ctrl.escalations << ','
       << stats.ctrl.rs_decodes << ',' << stats.ctrl.rs_decode_failures << ',' << stats.ctrl.silent_corruptions << ','
       << fmt6(perf.utilization) << ',' << fmt6(perf.normalized_utilization) << ',' << fmt6(perf.tokens_per_s);
    return os.str();
}

inline void write_rows_atomically(const std::string& path, const std::string& header,
                                  const std::vector<std::string>& rows) {
    namespace fs = std::filesystem;
    const std::string tmp = path + ".tmp";
    try {
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw std::runtime_error("cannot open output file \"" + tmp + "\"");
            out << header << '\n';
            for (const auto& row : rows) out << row << '\n';
            if (!out) throw std::runtime_error("write failed for \"" + tmp + "\"");
        }
        fs::rename(tmp, path);
    } catch (...) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw;
    }
}

}  // namespace detail

inline constexpr char kPerfCsvHeader[] =
    "preset,codeword_bytes,d,q,ber,seq_ratio,read_fraction,policy,protection,seed,requests,wire_read,wire_written,"
    "useful_bytes,escalations,rs_decodes,decode_failures,silent_corruptions,utilization,norm_utilization,tokens_per_s";

inline constexpr char kBitfieldCsvHeader[] =
    "field,rate,seed,flipped_bits,values_changed,max_rel_err,mean_rel_err,blowup_count";

inline constexpr char kFailureCurveCsvHeader[] = "p,size,analytic_failure_rate";

// Executes the whole grid; rows come out in grid enumeration order no matter
// how many workers ran them.
inline std::string run_experiment(const ExperimentConfig& cfg, int jobs = 1) {
    jobs = std::max(1, jobs);

    std::vector<std::string> rows;
    std::string header;

    if (cfg.kind == ExperimentKind::kFailureCurve) {
        header = kFailureCurveCsvHeader;
        std::vector<int> sizes = cfg.codeword_bytes;
        std::sort(sizes.begin(), sizes.end());
        std::vector<double> bers = cfg.ber;
        std::sort(bers.begin(), bers.end());
        for (int size : sizes) {
            const CodewordConfig cw = detail::codeword_from_tokens(cfg.preset.front(), size, cfg.stripe_width);
            for (double p : bers) {
                rows.push_back(detail::fmt6(p) + "," + std::to_string(size) + "," +
                               detail::fmt6(decode_failure_rate(p, cw)));
            }
        }
        detail::write_rows_atomically(cfg.out, header, rows);
        return cfg.out;
    }

    if (cfg.kind == ExperimentKind::kBitfieldSweep) {
        header = kBitfieldCsvHeader;
        struct Point {
            std::string field;
            double rate;
        };
        std::vector<Point> grid;
        for (const auto& f : cfg.fields) {
            for (double rate : cfg.rates) grid.push_back({f, rate});
        }
        rows.resize(grid.size());
        const auto worker = [&](std::size_t idx) {
            const auto& pt = grid[idx];
            const std::uint64_t seed = substream(cfg.master_seed, 0x706F696E74u, idx).next();
            const Bf16Field field = pt.field == "sign"       ? Bf16Field::kSign
                                    : pt.field == "exponent" ? Bf16Field::kExponent
                                                             : Bf16Field::kMantissa;
            // Normal-range BF16 values: magnitudes in [2^-6, 2^7), random sign.
            std::vector<std::uint16_t> vals(cfg.values);
            Substream rng = substream(seed, 0x76616Cu, 0);
            for (auto& v : vals) {
                const std::uint64_t r = rng.next();
                const std::uint16_t sign = static_cast<std::uint16_t>((r >> 63) << 15);
                const std::uint16_t exp = static_cast<std::uint16_t>(121 + (r % 14));  // biased exponent
                const std::uint16_t man = static_cast<std::uint16_t>((r >> 32) & 0x7F);
                v = static_cast<std::uint16_t>(sign | (exp << 7) | man);
            }
            const FieldFlipStats st = field_flip_stats(vals, field, pt.rate, seed);
            std::ostringstream os;
            os << pt.field << ',' << detail::fmt6(pt.rate) << ',' << seed << ',' << st.flipped_bits << ','
               << st.values_changed << ',' << detail::fmt6(st.max_relative_error) << ','
               << detail::fmt6(st.mean_relative_error) << ',' << st.blowup_count;
            rows[idx] = os.str();
        };
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const int nthreads = std::min<std::size_t>(jobs, grid.size());
        for (int t = 0; t < nthreads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < grid.size(); i = next.fetch_add(1)) worker(i);
            });
        }
        for (auto& th : pool) th.join();
        detail::write_rows_atomically(cfg.out, header, rows);
        return cfg.out;
    }

    // Trace-driven experiments share the perf schema.
    header = kPerfCsvHeader;
    std::vector<detail::PerfPoint> grid;
    for (const auto& preset : cfg.preset) {
        for (const auto& protection : cfg.protection) {
            for (const auto& policy : cfg.policy) {
                for (int size : cfg.codeword_bytes) {
                    for (double ber : cfg.ber) {
                        for (double sr : cfg.seq_ratio) {
                            grid.push_back({preset, policy, protection, size, ber, sr});
                        }
                    }
                }
            }
        }
    }
    rows.resize(grid.size());

    EventRecorder recorder;
    const bool record = cfg.kind == ExperimentKind::kSingleRun && !cfg.event_log.empty();
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < grid.size(); i = next.fetch_add(1)) {
            const std::uint64_t seed = substream(cfg.master_seed, 0x706F696E74u, i).next();
            rows[i] = detail::run_perf_point(cfg, grid[i], seed, record && i == 0 ? &recorder : nullptr);
        }
    };
    std::vector<std::thread> pool;
    const int nthreads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(jobs), grid.size()));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    detail::write_rows_atomically(cfg.out, header, rows);
    if (record) {
        std::ostringstream os;
        recorder.to_csv(os);
        const std::string content = os.str();
        const std::string tmp = cfg.event_log + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out << content;
        }
        std::filesystem::rename(tmp, cfg.event_log);
    }
    return cfg.out;
}

}  // namespace hbmecc
