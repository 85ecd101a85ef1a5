#include <doctest.h>

#include <cmath>
#include <random>

#include "oracle.hpp"
#include "rebal/engine.hpp"
#include "rebal/trace.hpp"

using namespace rebal;

namespace {

SimulationSetup skewed(std::uint64_t seed, std::uint64_t n_lr = 400, std::uint64_t n_rl = 100) {
    SimulationSetup s;
    s.initial = make_state(1000, 500, 500, 1000, 500, 500, 4000);
    s.fees = FeeSchedule{0, 0.01, 0.005, 2};
    s.arrivals[Direction::LtoR].rate = 10;
    s.arrivals[Direction::LtoR].count_limit = n_lr;
    s.arrivals[Direction::RtoL].rate = 2.5;
    s.arrivals[Direction::RtoL].count_limit = n_rl;
    s.seeds = StreamSeeds::derive(seed);
    return s;
}

ArrivalProcess periodic(double offset, double period, double amount, std::uint64_t n) {
    ArrivalProcess p;
    p.timing = ArrivalProcess::Timing::Periodic;
    p.offset = offset;
    p.period = period;
    p.amount = AmountDistribution::constant(amount);
    p.count_limit = n;
    return p;
}

}  // namespace

TEST_CASE("event order") {
    const Event completion{10, EventKind::SwapCompletion, 7, {}};
    const Event epoch{10, EventKind::ControlEpoch, 1, {}};
    CHECK(event_before(completion, epoch));
    CHECK_FALSE(event_before(epoch, completion));

    const Event a{5, EventKind::TxArrival, 3, {}};
    const Event b{5, EventKind::TxArrival, 4, {}};
    CHECK(event_before(a, b));
    CHECK_FALSE(event_before(b, a));
    CHECK_FALSE(event_before(a, a));

    const Event early{4, EventKind::TxArrival, 9, {}};
    CHECK(event_before(early, completion));

    const Event arrival_at_epoch{10, EventKind::TxArrival, 9, {}};
    CHECK(event_before(completion, arrival_at_epoch));
    CHECK(event_before(arrival_at_epoch, epoch));
}

TEST_CASE("arrival generation") {
    SUBCASE("exponential gaps") {
        ArrivalProcess p;
        p.rate = 10;
        std::mt19937_64 timing(1), amounts(2);
        double now = 0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) now = generate_arrival(p, Direction::LtoR, timing, amounts, now).arrival_time;
        CHECK(now / n == doctest::Approx(0.1).epsilon(0.05));
    }
    SUBCASE("gaussian amounts are positive") {
        ArrivalProcess p;
        p.rate = 1;
        p.amount = AmountDistribution::gaussian(25, 20);
        std::mt19937_64 timing(3), amounts(4);
        for (int i = 0; i < 20000; ++i)
            REQUIRE(generate_arrival(p, Direction::RtoL, timing, amounts, 0).amount > 0);
    }
    SUBCASE("uniform amounts stay in range") {
        ArrivalProcess p;
        p.rate = 1;
        p.amount = AmountDistribution::uniform(0, 50);
        std::mt19937_64 timing(5), amounts(6);
        for (int i = 0; i < 20000; ++i) {
            const double a = generate_arrival(p, Direction::LtoR, timing, amounts, 0).amount;
            REQUIRE(a > 0);
            REQUIRE(a <= 50);
        }
    }
    SUBCASE("count limit exhausts the stream") {
        ArrivalProcess p;
        p.rate = 1;
        p.count_limit = 3;
        ArrivalStream s(Direction::LtoR, p, 1, 2);
        CHECK(s.next(0));
        CHECK(s.next(0));
        CHECK(s.next(0));
        CHECK_FALSE(s.next(0));
    }
    SUBCASE("invalid processes") {
        ArrivalProcess p;
        p.rate = -1;
        CHECK_THROWS_AS(p.validate(), std::invalid_argument);
        p.rate = 1;
        p.amount = AmountDistribution::uniform(5, 5);
        CHECK_THROWS_AS(p.validate(), std::invalid_argument);
        p.amount = AmountDistribution::gaussian(25, 0);
        CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    }
}

TEST_CASE("no traffic keeps the fortune") {
    SimulationSetup s;
    s.initial = make_state(1000, 500, 500, 1000, 500, 500, 4000);
    s.fees = FeeSchedule{0, 0.01, 0.005, 2};
    s.clock.max_time = 100;
    NonePolicy none;
    const MetricsTrace t = run(s, none);
    CHECK(t.rows.size() == 10);
    for (const auto& r : t.rows) CHECK(r.fortune_after == t.initial_fortune);

    s.clock.max_time.reset();
    CHECK(run(s, none).rows.empty());
}

TEST_CASE("a single forwarded transaction adds its fee") {
    SimulationSetup s;
    s.initial = make_state(1000, 500, 500, 1000, 500, 500, 0);
    s.fees = FeeSchedule{0, 0.01, 0.005, 2};
    s.arrivals[Direction::LtoR] = periodic(1, 1, 10, 1);
    NonePolicy none;
    const MetricsTrace t = run(s, none);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.final_fortune() - t.initial_fortune == doctest::Approx(oracle::relay_fee(10, 0, 0.01)));
    CHECK(t.rows[0].relay_fees == doctest::Approx(0.1));
    CHECK(t.rows[0].b_ln == doctest::Approx(490));
    CHECK(t.rows[0].b_rn == doctest::Approx(509.9));
}

TEST_CASE("runs are deterministic") {
    AutoloopPolicy a1({}), a2({});
    const std::string x = trace_to_csv(run(skewed(42), a1));
    const std::string y = trace_to_csv(run(skewed(42), a2));
    CHECK(x == y);
    AutoloopPolicy a3({});
    CHECK(trace_to_csv(run(skewed(43), a3)) != x);
}

TEST_CASE("streams are independent per direction") {
    auto arrivals_of = [](const SimulationSetup& s, Direction d) {
        std::vector<std::pair<double, double>> out;
        Simulation sim(s);
        sim.set_observer([&](const EventRecord& e) {
            if (e.kind == EventRecord::Kind::TxArrival && e.transaction->direction == d)
                out.emplace_back(e.transaction->arrival_time, e.transaction->amount);
        });
        while (sim.advance()) {
        }
        return out;
    };
    SimulationSetup a = skewed(1);
    SimulationSetup b = a;
    b.seeds.timing[Direction::RtoL] ^= 0x9e3779b97f4a7c15ULL;
    b.seeds.amounts[Direction::RtoL] += 1;
    CHECK(arrivals_of(a, Direction::LtoR) == arrivals_of(b, Direction::LtoR));
    CHECK(arrivals_of(a, Direction::RtoL) != arrivals_of(b, Direction::RtoL));
}

TEST_CASE("epoch and completion timing") {
    SimulationSetup s = skewed(5);
    s.clock = SimClockConfig{10, 7, std::nullopt};
    AutoloopPolicy policy({0.45, 0.55});
    std::vector<double> epochs;
    std::vector<std::pair<double, double>> swaps;  // (start, completion)
    PerSide<bool> busy{};
    bool overlap = false;
    Simulation sim(s);
    sim.set_observer([&](const EventRecord& e) {
        if (e.kind == EventRecord::Kind::ControlEpoch) epochs.push_back(e.time);
        if (e.kind == EventRecord::Kind::SwapStart) {
            if (busy[e.swap->side]) overlap = true;
            busy[e.swap->side] = true;
        }
        if (e.kind == EventRecord::Kind::SwapCompletion) {
            busy[e.swap->side] = false;
            swaps.emplace_back(e.swap->start_time, e.time);
        }
    });
    while (auto ctx = sim.advance()) sim.act(policy.decide(*ctx));
    for (std::size_t i = 0; i < epochs.size(); ++i) CHECK(epochs[i] == 10.0 * static_cast<double>(i));
    REQUIRE_FALSE(swaps.empty());
    for (const auto& [start, done] : swaps) CHECK(done == start + 7);
    CHECK_FALSE(overlap);
}

TEST_CASE("time horizon") {
    SimulationSetup s = skewed(9);
    s.arrivals[Direction::LtoR].count_limit.reset();
    s.arrivals[Direction::RtoL].count_limit.reset();
    s.clock.max_time = 95;
    NonePolicy none;
    double last_arrival = 0;
    const MetricsTrace t = run(s, none, [&](const EventRecord& e) {
        if (e.kind == EventRecord::Kind::TxArrival) last_arrival = e.time;
    });
    CHECK(t.rows.size() == 10);
    CHECK(t.rows.back().t_end == 100);
    CHECK(last_arrival <= 100);
    CHECK(last_arrival > 90);

    s.clock.max_time = 0;
    CHECK(run(s, none).rows.empty());
}

TEST_CASE("count horizon settles the last swap") {
    SimulationSetup s;
    s.initial = make_state(1000, 100, 900, 1000, 500, 500, 4000);
    s.fees = FeeSchedule{0, 0.01, 0.005, 2};
    s.arrivals[Direction::LtoR] = periodic(1, 1, 5, 3);
    AutoloopPolicy policy({});
    const MetricsTrace t = run(s, policy);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].swap_l.kind == "in");
    CHECK(t.rows[0].swap_l.outcome == "ok");
    CHECK(t.rows[0].lock_l == 0);
    CHECK(t.rows[0].onchain_locked == 0);
}

TEST_CASE("stepwise accounting holds on random runs") {
    for (std::uint64_t seed : {1, 2, 3}) {
        LoopmaxPolicy p({2});
        const MetricsTrace t = run(skewed(seed, 2000, 500), p);
        CHECK(validate_trace(t).empty());
    }
}

TEST_CASE("manual stepping") {
    Simulation sim(skewed(4));
    CHECK_THROWS_AS(sim.act({}), std::logic_error);
    auto ctx = sim.advance();
    REQUIRE(ctx);
    CHECK(ctx->now == 0);
    CHECK(sim.epoch() == 0);
    SwapDecision d;
    d[Side::L] = SwapRequest{SwapKind::SwapOut, 100000};
    const ValidationResult v = sim.act(d);
    CHECK(v.violations.size() == 1);
    CHECK_THROWS_AS(sim.act({}), std::logic_error);
    ctx = sim.advance();
    REQUIRE(ctx);
    CHECK(sim.trace().rows.size() == 1);
    CHECK(sim.trace().rows[0].downgrades == 1);
    CHECK(sim.last_ledger().has_value());
}

TEST_CASE("setup validation") {
    SimulationSetup s = skewed(1);
    s.arrivals[Direction::LtoR].count_limit.reset();
    CHECK_THROWS_AS(Simulation{s}, std::invalid_argument);
    s = skewed(1);
    s.clock.confirmation_time = 20;
    CHECK_THROWS_AS(Simulation{s}, std::invalid_argument);
}
