#include <doctest.h>

#include <random>

#include "oracle.hpp"
#include "rebal/estimators.hpp"

using namespace rebal;

namespace {

const FeeSchedule kFees{0.0, 0.01, 0.005, 2.0};

Transaction arrival(Direction d, double amount, double t) { return {d, amount, t}; }

}  // namespace

TEST_CASE("arrival accumulation") {
    DemandEstimates e = make_estimates();
    e = record_arrival(e, arrival(Direction::LtoR, 100, 1), true, kFees);
    CHECK(e.totals[Direction::LtoR].arrived == 100);
    CHECK(e.totals[Direction::LtoR].succeeded == 100);
    CHECK(e.totals[Direction::LtoR].arrived_after_fee == doctest::Approx(99));

    e = record_arrival(e, arrival(Direction::LtoR, 40, 2), false, kFees);
    CHECK(e.totals[Direction::LtoR].arrived == 140);
    CHECK(e.totals[Direction::LtoR].succeeded == 100);

    DemandEstimates f = make_estimates();
    accumulate_arrival(f, arrival(Direction::RtoL, 30, 1), true, kFees);
    accumulate_arrival(f, arrival(Direction::RtoL, 70, 2), true, kFees);
    CHECK(f.totals[Direction::RtoL].arrived == 100);
    CHECK(f.totals[Direction::LtoR].arrived == 0);
}

TEST_CASE("net demand") {
    DemandEstimates e = make_estimates();
    CHECK(net_demand(e, 0).into_l == 0);
    CHECK(net_demand(e, 50).into_r == 0);

    e = record_arrival(e, arrival(Direction::LtoR, 100, 1), true, kFees);
    const NetDemand n = net_demand(e, 100);
    CHECK(n.into_l == doctest::Approx(-1.0));
    CHECK(n.into_r == doctest::Approx(0.99));
    CHECK(n.local_drift(Side::L) == -n.remote_drift(Side::L));
    CHECK(net_demand(e, 0).into_l == 0);

    const FeeSchedule free{0, 0, 0, 0};
    DemandEstimates s = make_estimates();
    s = record_arrival(s, arrival(Direction::LtoR, 100, 1), true, free);
    s = record_arrival(s, arrival(Direction::RtoL, 100, 2), false, free);
    CHECK(net_demand(s, 10).into_l == 0.0);
    CHECK(net_demand(s, 10).into_r == 0.0);
}

TEST_CASE("success rates") {
    DemandEstimates e = make_estimates();
    CHECK(success_rates(e, 100).l_to_r == 0);
    for (int i = 0; i < 5; ++i) e = record_arrival(e, arrival(Direction::LtoR, 100, i), true, kFees);
    CHECK(success_rates(e, 100).l_to_r == doctest::Approx(5));
    CHECK(success_rates(e, 0).l_to_r == 0);

    DemandEstimates d = make_estimates();
    d = record_arrival(d, arrival(Direction::RtoL, 80, 1), false, kFees);
    CHECK(success_rates(d, 10).r_to_l == 0);
}

TEST_CASE("simple future balance") {
    ChannelState c{1000, 900, 100, {}};
    CHECK(future_balance_simple(c, -5, 10) == doctest::Approx(50));
    CHECK(future_balance_simple(c, -20, 10) == 0);
    CHECK(future_balance_simple(c, 0, 10) == 100);
    CHECK(future_balance_simple(c, 500, 10) == 1000);
}

TEST_CASE("refined future balance") {
    // b_LN = 100, b_NR = 200
    const NodeState s = make_state(1000, 900, 100, 1000, 200, 800, 0);
    auto b = future_balance_refined(s, {10, 0}, 10, kFees);
    CHECK(b[Side::L] == doctest::Approx(0).epsilon(1e-12));

    auto same = future_balance_refined(s, {0, 0}, 10, kFees);
    CHECK(same[Side::L] == 100);
    CHECK(same[Side::R] == 800);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 5000; ++i) {
        const double cl = 100 + 1000 * u(rng), cr = 100 + 1000 * u(rng);
        const double ll = cl * u(rng), lr = cr * u(rng);
        const double slr = i % 7 == 0 ? 0.0 : 50 * u(rng);
        const double srl = i % 5 == 0 ? 0.0 : 50 * u(rng);
        const double T = 20 * u(rng);
        const NodeState st = make_state(cl, ll, cl - ll, cr, lr, cr - lr, 0);
        const auto got = future_balance_refined(st, {slr, srl}, T, kFees);
        double want_ln = 0, want_rn = 0;
        oracle::refined(cl - ll, ll, lr, cr - lr, cl, cr, slr, srl, T, 0.01, want_ln, want_rn);
        CHECK(got[Side::L] == doctest::Approx(want_ln).epsilon(1e-9));
        CHECK(got[Side::R] == doctest::Approx(want_rn).epsilon(1e-9));
        CHECK(got[Side::L] >= 0);
        CHECK(got[Side::L] <= cl);
        CHECK(got[Side::R] >= 0);
        CHECK(got[Side::R] <= cr);
    }
}

TEST_CASE("forecasts never decrease with the current neighbor balance") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 2000; ++i) {
        const double slr = 40 * u(rng), srl = 40 * u(rng), T = 10;
        const double lr = 1000 * u(rng);
        const double a = 1000 * u(rng), b = 1000 * u(rng);
        const double lo = std::min(a, b), hi = std::max(a, b);
        // b_LN = lo vs hi, same R channel
        const NodeState s1 = make_state(1000, 1000 - lo, lo, 1000, lr, 1000 - lr, 0);
        const NodeState s2 = make_state(1000, 1000 - hi, hi, 1000, lr, 1000 - lr, 0);
        CHECK(future_balance_refined(s1, {slr, srl}, T, kFees)[Side::L] <=
              future_balance_refined(s2, {slr, srl}, T, kFees)[Side::L] + 1e-9);
        const double drift = 80 * u(rng) - 40;
        CHECK(future_balance_simple(s1.channels[Side::L], drift, T) <=
              future_balance_simple(s2.channels[Side::L], drift, T));
    }
}

TEST_CASE("windowed estimates forget old traffic") {
    DemandEstimates e = make_estimates(10.0);
    accumulate_arrival(e, arrival(Direction::LtoR, 100, 1), true, kFees);
    accumulate_arrival(e, arrival(Direction::LtoR, 50, 15), true, kFees);
    // At t = 20 only the arrival at 15 is inside (10, 20].
    CHECK(success_rates(e, 20).l_to_r == doctest::Approx(5));
    // Before a full window has elapsed the divisor is the elapsed time.
    DemandEstimates f = make_estimates(10.0);
    accumulate_arrival(f, arrival(Direction::LtoR, 20, 1), true, kFees);
    CHECK(success_rates(f, 4).l_to_r == doctest::Approx(5));
}

TEST_CASE("snapshot bundles every estimate") {
    DemandEstimates e = make_estimates();
    accumulate_arrival(e, arrival(Direction::LtoR, 100, 1), true, kFees);
    const NodeState s = make_state(1000, 500, 500, 1000, 500, 500, 0);
    const DemandSnapshot snap = snapshot(e, s, 100, 10, kFees);
    CHECK(snap.net.into_l == doctest::Approx(-1));
    CHECK(snap.success.l_to_r == doctest::Approx(1));
    CHECK(snap.future_simple[Side::L] == doctest::Approx(490));
    CHECK(snap.future_refined[Side::L] == doctest::Approx(490));
    CHECK(snap.future_refined[Side::R] == doctest::Approx(509.9));
}
