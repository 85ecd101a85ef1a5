#include <doctest.h>

#include <algorithm>
#include <sstream>
#include <string>

#include "rebal/engine.hpp"
#include "rebal/trace.hpp"

using namespace rebal;

namespace {

MetricsTrace sample_trace() {
    SimulationSetup s;
    s.initial = make_state(1000, 300, 700, 1000, 650, 350, 4000);
    s.fees = FeeSchedule{0, 0.01, 0.005, 2};
    s.arrivals[Direction::LtoR].rate = 10;
    s.arrivals[Direction::LtoR].count_limit = 600;
    s.arrivals[Direction::RtoL].rate = 2.5;
    s.arrivals[Direction::RtoL].count_limit = 150;
    s.seeds = StreamSeeds::derive(11);
    AutoloopPolicy p({});
    return run(s, p);
}

}  // namespace

TEST_CASE("number formatting round-trips") {
    for (double x : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 495.5223880597015, 1e-300, 123456789.125})
        CHECK(std::stod(format_number(x)) == x);
    CHECK(format_number(20) == "20");
}

TEST_CASE("trace csv round trip") {
    const MetricsTrace t = sample_trace();
    REQUIRE(t.rows.size() > 5);
    const std::string csv = trace_to_csv(t);

    std::istringstream header(csv);
    std::string first;
    std::getline(header, first);
    CHECK(static_cast<std::size_t>(std::count(first.begin(), first.end(), ',')) + 1 ==
          trace_columns().size());

    std::istringstream in(csv);
    const MetricsTrace back = read_trace_csv(in);
    CHECK(back.initial_fortune == t.initial_fortune);
    REQUIRE(back.rows.size() == t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) CHECK(back.rows[i] == t.rows[i]);
    CHECK(trace_to_csv(back) == csv);
}

TEST_CASE("validate_trace") {
    MetricsTrace t = sample_trace();
    CHECK(validate_trace(t).empty());

    SUBCASE("tampered fortune") {
        t.rows[3].fortune_after += 0.5;
        CHECK_FALSE(validate_trace(t).empty());
    }
    SUBCASE("broken capacity") {
        t.rows[2].b_ln += 1;
        CHECK_FALSE(validate_trace(t).empty());
    }
    SUBCASE("decreasing cumulative column") {
        t.rows[4].cum_relay_fees = 0;
        CHECK_FALSE(validate_trace(t).empty());
    }
}

TEST_CASE("malformed csv") {
    std::istringstream empty("");
    CHECK_THROWS(read_trace_csv(empty));
    std::istringstream wrong("a,b,c\n1,2,3\n");
    CHECK_THROWS(read_trace_csv(wrong));

    const std::string csv = trace_to_csv(sample_trace());
    std::istringstream short_row(csv.substr(0, csv.size() - 20) + "\n");
    CHECK_THROWS(read_trace_csv(short_row));
}
