#include "rebal/estimators.hpp"

#include <algorithm>

namespace rebal {

namespace {

struct Window {
    PerDirection<DirectionTotals> totals;
    Minutes span = 0.0;
};

Window current(const DemandEstimates& est, Minutes now) {
    if (!est.window) return {est.totals, now};
    Window w;
    w.span = std::min(now, *est.window);
    const Minutes cutoff = now - *est.window;
    for (const auto& e : est.recent) {
        if (e.time <= cutoff || e.time > now) continue;
        DirectionTotals& t = w.totals[e.direction];
        t.arrived += e.amounts.arrived;
        t.arrived_after_fee += e.amounts.arrived_after_fee;
        t.succeeded += e.amounts.succeeded;
    }
    return w;
}

// Amount that flows at `rate` for `horizon` unless one of the two balances
// it draws on runs out first: rate * min{horizon, a/rate, b/rate}.
Currency capped_flow(double rate, Minutes horizon, Currency a, Currency b) {
    if (!(rate > 0.0)) return 0.0;
    return std::min({rate * horizon, a, b});
}

Currency clamp_balance(Currency x, Currency capacity) {
    return std::max(0.0, std::min(x, capacity));
}

}  // namespace

DemandEstimates make_estimates(std::optional<Minutes> window) {
    if (window && !(*window > 0.0)) throw std::invalid_argument("estimator window must be > 0");
    DemandEstimates est;
    est.window = window;
    return est;
}

void accumulate_arrival(DemandEstimates& est, const Transaction& tx, bool success,
                        const FeeSchedule& fees) {
    DirectionTotals delta;
    delta.arrived = tx.amount;
    delta.arrived_after_fee = tx.amount - relay_fee(tx.amount, fees);
    delta.succeeded = success ? tx.amount : 0.0;

    DirectionTotals& t = est.totals[tx.direction];
    t.arrived += delta.arrived;
    t.arrived_after_fee += delta.arrived_after_fee;
    t.succeeded += delta.succeeded;

    if (est.window) {
        est.recent.push_back({tx.arrival_time, tx.direction, delta});
        const Minutes cutoff = tx.arrival_time - *est.window;
        while (!est.recent.empty() && est.recent.front().time <= cutoff) est.recent.pop_front();
    }
}

DemandEstimates record_arrival(DemandEstimates est, const Transaction& tx, bool success,
                               const FeeSchedule& fees) {
    accumulate_arrival(est, tx, success, fees);
    return est;
}

NetDemand net_demand(const DemandEstimates& est, Minutes now) {
    const Window w = current(est, now);
    if (!(w.span > 0.0)) return {};
    const DirectionTotals& lr = w.totals[Direction::LtoR];
    const DirectionTotals& rl = w.totals[Direction::RtoL];
    return {(rl.arrived_after_fee - lr.arrived) / w.span,
            (lr.arrived_after_fee - rl.arrived) / w.span};
}

SuccessRates success_rates(const DemandEstimates& est, Minutes now) {
    const Window w = current(est, now);
    if (!(w.span > 0.0)) return {};
    return {w.totals[Direction::LtoR].succeeded / w.span,
            w.totals[Direction::RtoL].succeeded / w.span};
}

Currency future_balance_simple(const ChannelState& channel, double remote_drift, Minutes horizon) {
    return clamp_balance(channel.remote + remote_drift * horizon, channel.capacity);
}

PerSide<Currency> future_balance_refined(const NodeState& state, const SuccessRates& rates,
                                         Minutes horizon, const FeeSchedule& fees) {
    const ChannelState& l = state.channels[Side::L];
    const ChannelState& r = state.channels[Side::R];
    const double keep = 1.0 - fees.relay_prop;

    // L-to-R drains b_LN and b_NR; R-to-L drains b_RN and b_NL.
    const Currency l_to_r = capped_flow(rates.l_to_r, horizon, l.remote, r.local);
    const Currency r_to_l = capped_flow(rates.r_to_l, horizon, r.remote, l.local);

    PerSide<Currency> out;
    out[Side::L] = clamp_balance(l.remote - l_to_r + keep * r_to_l, l.capacity);
    out[Side::R] = clamp_balance(r.remote - r_to_l + keep * l_to_r, r.capacity);
    return out;
}

DemandSnapshot snapshot(const DemandEstimates& est, const NodeState& state, Minutes now,
                        Minutes confirmation_time, const FeeSchedule& fees) {
    DemandSnapshot s;
    s.net = net_demand(est, now);
    s.success = success_rates(est, now);
    for (Side side : kSides) {
        s.future_simple[side] = future_balance_simple(state.channels[side],
                                                      s.net.remote_drift(side), confirmation_time);
    }
    s.future_refined = future_balance_refined(state, s.success, confirmation_time, fees);
    return s;
}

}  // namespace rebal
