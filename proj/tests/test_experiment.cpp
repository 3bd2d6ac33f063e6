#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "hbmecc/experiment.hpp"

using namespace hbmecc;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string temp_path(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}

nlohmann::json small_sweep_json(const std::string& out) {
    return nlohmann::json{{"experiment", "sweep_codeword"},
                          {"preset", "fixed_parity"},
                          {"codeword_bytes", nlohmann::json::array({64, 128})},
                          {"ber", nlohmann::json::array({0.0, 1e-3})},
                          {"seq_ratio", nlohmann::json::array({0.99})},
                          {"requests", 400},
                          {"store_codewords", 256},
                          {"master_seed", 99},
                          {"out", out}};
}

}  // namespace

TEST_CASE("missing required keys are named in diagnostics") {
    nlohmann::json j{{"experiment", "sweep_codeword"}, {"codeword_bytes", nlohmann::json::array({64})}};
    try {
        validate_config(j);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("\"ber\"") != std::string::npos);
    }
}

TEST_CASE("out-of-range values are rejected with a range diagnostic") {
    nlohmann::json j = small_sweep_json("x.csv");
    j["ber"] = 1.5;
    try {
        validate_config(j);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("ber") != std::string::npos);
        CHECK(msg.find("out of range") != std::string::npos);
    }
}

TEST_CASE("unknown keys are errors, not silently ignored") {
    nlohmann::json j = small_sweep_json("x.csv");
    j["bber"] = 3;
    try {
        validate_config(j);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("bber") != std::string::npos);
    }
    nlohmann::json wrong_exp{{"experiment", "bitfield_sweep"}, {"rates", 1e-3}, {"ber", nlohmann::json::array({1e-3})}};
    CHECK_THROWS_AS(validate_config(wrong_exp), ConfigError);
}

TEST_CASE("print_config echo is canonical and stable") {
    const ExperimentConfig cfg = validate_config(small_sweep_json("x.csv"));
    const std::string echo1 = print_config(cfg);
    const std::string echo2 = print_config(validate_config(small_sweep_json("x.csv")));
    CHECK(echo1 == echo2);
    CHECK(echo1.find("\"experiment\": \"sweep_codeword\"") != std::string::npos);
    CHECK(echo1.find("\"requests\": 400") != std::string::npos);
}

TEST_CASE("a small sweep writes the pinned schema and is rerun-identical") {
    const std::string out = temp_path("hbmecc_test_sweep.csv");
    fs::remove(out);
    const ExperimentConfig cfg = validate_config(small_sweep_json(out));
    REQUIRE(run_experiment(cfg, 1) == out);
    const std::string first = read_file(out);
    CHECK(first.rfind(std::string(kPerfCsvHeader) + "\n", 0) == 0);
    // 2 sizes x 2 bers
    CHECK(std::count(first.begin(), first.end(), '\n') == 5);

    REQUIRE(run_experiment(cfg, 1) == out);
    CHECK(read_file(out) == first);

    // Concurrent execution emits identical bytes.
    REQUIRE(run_experiment(cfg, 4) == out);
    CHECK(read_file(out) == first);
    fs::remove(out);
}

TEST_CASE("failure_curve emits its own schema sorted by size then p") {
    const std::string out = temp_path("hbmecc_test_curve.csv");
    fs::remove(out);
    nlohmann::json j{{"experiment", "failure_curve"},
                     {"codeword_bytes", nlohmann::json::array({512, 64})},
                     {"ber", nlohmann::json::array({1e-3, 1e-4})},
                     {"out", out}};
    run_experiment(validate_config(j), 1);
    const std::string content = read_file(out);
    REQUIRE(content.rfind("p,size,analytic_failure_rate\n", 0) == 0);
    const auto p64 = content.find(",64,");
    const auto p512 = content.find(",512,");
    CHECK(p64 != std::string::npos);
    CHECK(p512 != std::string::npos);
    CHECK(p64 < p512);
    fs::remove(out);
}

TEST_CASE("bitfield sweep emits the FieldFlipStats schema") {
    const std::string out = temp_path("hbmecc_test_bits.csv");
    fs::remove(out);
    nlohmann::json j{{"experiment", "bitfield_sweep"},
                     {"fields", nlohmann::json::array({"sign", "exponent"})},
                     {"rates", nlohmann::json::array({1e-4})},
                     {"values", 20000},
                     {"master_seed", 3},
                     {"out", out}};
    run_experiment(validate_config(j), 2);
    const std::string content = read_file(out);
    CHECK(content.rfind(std::string(kBitfieldCsvHeader) + "\n", 0) == 0);
    CHECK(content.find("sign,") != std::string::npos);
    CHECK(content.find("exponent,") != std::string::npos);
    fs::remove(out);
}

TEST_CASE("single_run writes a per-request event log when asked") {
    const std::string out = temp_path("hbmecc_test_single.csv");
    const std::string log = temp_path("hbmecc_test_events.csv");
    fs::remove(out);
    fs::remove(log);
    nlohmann::json j{{"experiment", "single_run"},
                     {"preset", "fixed_parity"},
                     {"codeword_bytes", 128},
                     {"ber", 1e-3},
                     {"seq_ratio", 0.9},
                     {"requests", 300},
                     {"store_codewords", 64},
                     {"master_seed", 5},
                     {"event_log", log},
                     {"out", out}};
    run_experiment(validate_config(j), 1);
    const std::string events = read_file(log);
    CHECK(events.rfind("request_id,kind,class,k,crc_failed,escalated,decode_ok,wire_read,wire_written\n", 0) == 0);
    CHECK(std::count(events.begin(), events.end(), '\n') == 301);
    // Reruns with the same master seed replay the event log byte for byte.
    run_experiment(validate_config(j), 1);
    CHECK(read_file(log) == events);
    fs::remove(out);
    fs::remove(log);
}

TEST_CASE("failed runs leave no partial output behind") {
    const std::string out = "/nonexistent-dir/hbmecc_test.csv";
    ExperimentConfig cfg = validate_config(small_sweep_json(out));
    CHECK_THROWS(run_experiment(cfg, 1));
    CHECK_FALSE(fs::exists(out));
    CHECK_FALSE(fs::exists(out + ".tmp"));
}

TEST_CASE("bundled configs validate") {
    for (const char* name : {"failure_curve", "sweep_codeword", "sweep_random_ratio", "adaptive_bandwidth",
                             "bitfield_sweep", "single_run"}) {
        const std::string path = std::string(HBMECC_CONFIG_DIR) + "/" + name + ".json";
        INFO(path);
        CHECK_NOTHROW(load_config_file(path));
    }
}

TEST_CASE("print_config of the bundled single_run matches the golden echo") {
    const ExperimentConfig cfg = load_config_file(std::string(HBMECC_CONFIG_DIR) + "/single_run.json");
    const std::string golden = read_file(std::string(HBMECC_GOLDEN_DIR) + "/single_run_echo.json");
    CHECK(print_config(cfg) == golden);
}
