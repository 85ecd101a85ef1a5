// Empirical demand statistics observed by the relay node.
//
// Rates are running averages from time 0 (or over a trailing window when one
// is configured). Before any time has elapsed every rate is zero.
#pragma once

#include <deque>
#include <optional>

#include "rebal/model.hpp"

namespace rebal {

struct DirectionTotals {
    Currency arrived = 0.0;          // every generated amount
    Currency arrived_after_fee = 0.0;  // amount minus relay fee
    Currency succeeded = 0.0;        // amounts actually forwarded
};

struct DemandEstimates {
    std::optional<Minutes> window;  // nullopt: full history
    PerDirection<DirectionTotals> totals;

    struct Entry {
        Minutes time = 0.0;
        Direction direction = Direction::LtoR;
        DirectionTotals amounts;
    };
    std::deque<Entry> recent;  // only populated with a window
};

DemandEstimates make_estimates(std::optional<Minutes> window = std::nullopt);

DemandEstimates record_arrival(DemandEstimates est, const Transaction& tx, bool success,
                               const FeeSchedule& fees);
// In-place form used by the simulation loop.
void accumulate_arrival(DemandEstimates& est, const Transaction& tx, bool success,
                        const FeeSchedule& fees);

// Signed net inflow rate into each neighbor's side of its channel, i.e. the
// drift of b_LN and b_RN. The node-side drifts are the negations.
struct NetDemand {
    double into_l = 0.0;  // d b_LN / dt
    double into_r = 0.0;  // d b_RN / dt

    // Drift of the neighbor's balance in the channel with `side`.
    double remote_drift(Side side) const { return side == Side::L ? into_l : into_r; }
    // Drift of the node's own balance in that channel.
    double local_drift(Side side) const { return -remote_drift(side); }
};

NetDemand net_demand(const DemandEstimates& est, Minutes now);

struct SuccessRates {
    double l_to_r = 0.0;
    double r_to_l = 0.0;
};

SuccessRates success_rates(const DemandEstimates& est, Minutes now);

// Neighbor balance extrapolated by the net drift over `horizon`, clamped to
// [0, capacity].
Currency future_balance_simple(const ChannelState& channel, double remote_drift, Minutes horizon);

// Neighbor balances after `horizon`, assuming each direction keeps flowing
// at its empirical success rate until it runs out of balance.
PerSide<Currency> future_balance_refined(const NodeState& state, const SuccessRates& rates,
                                         Minutes horizon, const FeeSchedule& fees);

// Everything a policy needs about demand, evaluated at one instant.
struct DemandSnapshot {
    NetDemand net;
    SuccessRates success;
    PerSide<Currency> future_simple;   // remote balances after T_conf
    PerSide<Currency> future_refined;  // remote balances after T_conf
};

DemandSnapshot snapshot(const DemandEstimates& est, const NodeState& state, Minutes now,
                        Minutes confirmation_time, const FeeSchedule& fees);

}  // namespace rebal
