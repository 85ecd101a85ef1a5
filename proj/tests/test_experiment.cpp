#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracle.hpp"
#include "rebal/experiment.hpp"

using namespace rebal;
using nlohmann::json;
namespace fs = std::filesystem;

#ifndef REBAL_SOURCE_DIR
#error "REBAL_SOURCE_DIR must point at the repository root"
#endif

namespace {

json baseline() {
    return {
        {"channels", {{"L", {{"capacity", 1000}, {"local", 500}, {"remote", 500}}},
                      {"R", {{"capacity", 1000}, {"local", 500}, {"remote", 500}}}}},
        {"fees", {{"relay_prop", 0.01}, {"swap_prop", 0.005}, {"swap_fixed", 2}}},
        {"clock", {{"check_period", 10}, {"confirmation_time", 10}}},
        {"arrivals",
         {{"LtoR", {{"rate", 10}, {"count", 400}}}, {"RtoL", {{"rate", 2.5}, {"count", 100}}}}},
        {"policy", {{"name", "autoloop"}, {"low", 0.3}, {"high", 0.7}, {"safety_margin", 2}}},
    };
}

std::string error_path(const json& doc) {
    try {
        parse_config(doc);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "<accepted>";
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / ("rebal-test-" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

RunOptions no_files() {
    RunOptions o;
    o.write_files = false;
    return o;
}

}  // namespace

TEST_CASE("config parsing") {
    SUBCASE("baseline is valid with the usual defaults") {
        const ExperimentConfig c = parse_config(baseline());
        CHECK(c.fees.swap_prop == 0.005);
        CHECK(c.fees.swap_fixed == 2);
        CHECK(c.policy.autoloop.low == 0.3);
        CHECK(c.policy.loopmax.safety_margin == 2);
        CHECK(c.initial.onchain == 4000);
        CHECK(c.rebel.min_swap_fraction == 0.2);
        CHECK(c.seeds == std::vector<std::uint64_t>{0});
        // The normalized source parses back to the same config.
        CHECK(parse_config(c.source).source == c.source);
    }
    SUBCASE("balances must add up") {
        json d = baseline();
        d["channels"]["L"]["local"] = 600;
        CHECK(error_path(d) == "channels.L");
    }
    SUBCASE("autoloop band") {
        json d = baseline();
        d["policy"]["low"] = 0.7;
        CHECK(error_path(d) == "policy.low");
        d["policy"]["low"] = 0.8;
        CHECK(error_path(d) == "policy.low");
    }
    SUBCASE("unknown and mistyped fields") {
        json d = baseline();
        d["fees"]["relay_porp"] = 0.01;
        CHECK(error_path(d) == "fees.relay_porp");
        d = baseline();
        d["fees"]["relay_prop"] = "cheap";
        CHECK(error_path(d) == "fees.relay_prop");
        d = baseline();
        d["policy"]["name"] = "greedy";
        CHECK(error_path(d) == "policy.name");
        d = baseline();
        d["seeds"] = json::array({1, -2});
        CHECK(error_path(d) == "seeds.1");
    }
    SUBCASE("count mode needs counts") {
        json d = baseline();
        d["arrivals"]["LtoR"].erase("count");
        CHECK(error_path(d) == "arrivals.LtoR.count");
        d["horizon"] = {{"max_time", 1000}};
        CHECK(error_path(d) == "<accepted>");
    }
    SUBCASE("clock ordering") {
        json d = baseline();
        d["clock"]["confirmation_time"] = 20;
        CHECK(error_path(d) == "clock.check_period");
    }
    SUBCASE("override") {
        const ExperimentConfig c = parse_config(baseline());
        CHECK(with_override(c, "fees.swap_fixed", 5).fees.swap_fixed == 5);
        CHECK(with_override(c, "policy.name", "none").policy.name == "none");
        CHECK_THROWS_AS(with_override(c, "fees.nope", 1), ConfigError);
        CHECK_THROWS_AS(with_override(c, "fees", 1), ConfigError);
        CHECK_THROWS_AS(with_override(c, "policy.low", 0.9), ConfigError);
    }
}

TEST_CASE("shipped configs load") {
    const fs::path dir = fs::path(REBAL_SOURCE_DIR) / "configs";
    std::size_t n = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        CAPTURE(entry.path().string());
        CHECK_NOTHROW(load_config(entry.path()));
        ++n;
    }
    CHECK(n >= 6);
    const ExperimentConfig c = load_config(dir / "skewed-high.json");
    CHECK(c.initial.channels[Side::L].capacity == 1000);
    CHECK(c.fees.swap_prop == 0.005);
    CHECK(c.clock.check_period == 10);
    CHECK(c.policy.autoloop.high == 0.7);
}

TEST_CASE("replications") {
    TempDir tmp("replications");
    json d = baseline();
    d["seeds"] = json::array({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    d["output_dir"] = tmp.path.string();
    const ExperimentResult r = run_experiment(parse_config(d));
    REQUIRE(r.runs.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(r.runs[i].seed == i);
        REQUIRE(r.runs[i].trace_file);
        CHECK(fs::exists(*r.runs[i].trace_file));
    }
    CHECK(fs::exists(tmp.path / "summary.json"));
    std::size_t csvs = 0;
    for (const auto& e : fs::directory_iterator(tmp.path)) csvs += e.path().extension() == ".csv";
    CHECK(csvs == 10);

    CHECK(r.final_fortune.min <= r.final_fortune.mean);
    CHECK(r.final_fortune.mean <= r.final_fortune.max);
    double lo = INFINITY, hi = -INFINITY, sum = 0;
    for (const auto& run : r.runs) {
        lo = std::min(lo, run.final_fortune);
        hi = std::max(hi, run.final_fortune);
        sum += run.final_fortune;
    }
    CHECK(r.final_fortune.min == lo);
    CHECK(r.final_fortune.max == hi);
    CHECK(r.final_fortune.mean == doctest::Approx(sum / 10));

    std::ifstream in(tmp.path / "summary.json");
    const json s = json::parse(in);
    CHECK(s["final_fortune"]["min"] == lo);
    CHECK(s["runs"].size() == 10);

    // Thread count does not change results.
    RunOptions serial = no_files();
    serial.threads = 1;
    const ExperimentResult r1 = run_experiment(parse_config(d), serial);
    for (std::size_t i = 0; i < 10; ++i) CHECK(r1.runs[i].final_fortune == r.runs[i].final_fortune);
}

TEST_CASE("single seed summary") {
    const ExperimentResult r = run_experiment(parse_config(baseline()), no_files());
    REQUIRE(r.runs.size() == 1);
    CHECK(r.final_fortune.mean == r.final_fortune.min);
    CHECK(r.final_fortune.mean == r.final_fortune.max);

    const Stats s = summarize({0.1, 0.2, 0.7});
    CHECK(s.min <= s.mean);
    CHECK(s.mean <= s.max);
}

TEST_CASE("no traffic leaves the fortune alone") {
    for (const char* policy : {"none", "autoloop", "loopmax"}) {
        json d = baseline();
        d["arrivals"]["LtoR"]["rate"] = 0;
        d["arrivals"]["RtoL"]["rate"] = 0;
        d["horizon"] = {{"max_time", 500}};
        d["policy"]["name"] = policy;
        d["seeds"] = json::array({0, 1});
        const ExperimentResult r = run_experiment(parse_config(d), no_files());
        for (const auto& run : r.runs) CHECK(run.final_fortune == run.initial_fortune);
    }
}

TEST_CASE("sweeps") {
    const ExperimentConfig c = parse_config(baseline());
    CHECK(sweep(c, "fees.relay_prop", {}, {}, no_files()).empty());

    const auto rows = sweep(c, "fees.swap_fixed", {json(1), json(4)}, {"none", "loopmax"}, no_files());
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].policy == "none");
    // Without rebalancing the miner fee is irrelevant.
    CHECK(rows[0].final_fortune.mean == rows[1].final_fortune.mean);

    CHECK_THROWS_AS(sweep(c, "fees.nope", {json(1)}, {}, no_files()), ConfigError);
    CHECK_THROWS_AS(sweep(c, "fees.nope", {}, {}, no_files()), ConfigError);

    std::ostringstream csv;
    write_sweep_csv(csv, "fees.swap_fixed", rows);
    const std::string text = csv.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);
}

TEST_CASE("profitability thresholds") {
    auto th = profitability_thresholds({0, 0.01, 0.005, 2});
    REQUIRE(th.swap_in);
    REQUIRE(th.swap_out);
    CHECK(*th.swap_in == doctest::Approx(400).epsilon(1e-12));
    CHECK(*th.swap_out == doctest::Approx(2 / 0.00505).epsilon(1e-12));
    CHECK(*th.swap_out == doctest::Approx(396.0396).epsilon(1e-6));

    th = profitability_thresholds({0, 0.00003, 0.005, 2});
    CHECK_FALSE(th.swap_in);
    CHECK_FALSE(th.swap_out);

    for (double f : {0.0, 0.001, 0.003, 0.004, 0.0049, 0.005, 0.006, 0.02}) {
        CAPTURE(f);
        th = profitability_thresholds({0, f, 0.005, 2});
        const double in = oracle::swap_in_threshold(f, 0.005, 2);
        const double out = oracle::swap_out_threshold(f, 0.005, 2);
        CHECK(th.swap_in.has_value() == std::isfinite(in));
        CHECK(th.swap_out.has_value() == std::isfinite(out));
        if (th.swap_in) CHECK(*th.swap_in == doctest::Approx(in));
        if (th.swap_out) CHECK(*th.swap_out == doctest::Approx(out));
    }
}

TEST_CASE("symmetric depletion scenario") {
    SUBCASE("high fee gets stuck after two") {
        const DepletionResult r = scenario_appendix_a({DepletionScenario::Pattern::Alternating, 0.5, 100});
        const auto want = oracle::symmetric_depletion(0.5, 100);
        CHECK(r.outcomes == want);
        CHECK(r.successes == 2);
        REQUIRE(r.stuck_from);
        CHECK(*r.stuck_from == 2);
        CHECK(validate_trace(r.trace).empty());
    }
    SUBCASE("free relaying never gets stuck") {
        const DepletionResult r = scenario_appendix_a({DepletionScenario::Pattern::Alternating, 0.0, 10000});
        CHECK(r.successes == 10000);
        CHECK_FALSE(r.stuck_from);
    }
    SUBCASE("small fee matches the oracle") {
        const DepletionResult r = scenario_appendix_a({DepletionScenario::Pattern::Alternating, 0.05, 60});
        CHECK(r.outcomes == oracle::symmetric_depletion(0.05, 60));
    }
    SUBCASE("one direction only") {
        for (auto p : {DepletionScenario::Pattern::LtoROnly, DepletionScenario::Pattern::RtoLOnly}) {
            const DepletionResult r = scenario_appendix_a({p, 0.0, 10});
            CHECK(r.successes == 1);  // floor(20 / 20)
            REQUIRE(r.stuck_from);
            CHECK(*r.stuck_from == 1);
        }
    }
    SUBCASE("config file agrees") {
        const ExperimentConfig c = load_config(fs::path(REBAL_SOURCE_DIR) / "configs" / "appendix-a.json");
        RunOptions o = no_files();
        const ExperimentResult r = run_experiment(c, o);
        // Two forwards at 50% fee: 10 each.
        CHECK(r.runs[0].relay_fees == doctest::Approx(20));
    }
}
