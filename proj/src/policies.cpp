#include "rebal/policies.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rebal {

void AutoloopParams::validate() const {
    if (!(low >= 0.0 && low < high && high <= 1.0))
        throw std::invalid_argument("autoloop thresholds must satisfy 0 <= low < high <= 1");
}

void LoopmaxParams::validate() const {
    if (!(safety_margin >= 0.0)) throw std::invalid_argument("loopmax safety margin must be >= 0");
}

SwapDecision decide_none(const PolicyContext&) { return no_op_decision(); }

SwapDecision decide_autoloop(const PolicyContext& ctx, const AutoloopParams& params) {
    SwapDecision d;
    for (Side side : kSides) {
        const ChannelState& ch = ctx.state.channels[side];
        const Currency midpoint = ch.capacity * (params.low + params.high) / 2.0;
        if (ch.local < params.low * ch.capacity) {
            d[side] = SwapRequest{SwapKind::SwapIn, midpoint - ch.local};
        } else if (ch.local > params.high * ch.capacity) {
            d[side] = SwapRequest{SwapKind::SwapOut, ch.local - midpoint};
        }
    }
    return d;
}

SwapDecision decide_loopmax(const PolicyContext& ctx, const LoopmaxParams& params) {
    SwapDecision d;
    const Minutes lead = ctx.check_period + ctx.confirmation_time;
    const Currency affordable = phi_inverse(ctx.state.onchain, ctx.fees).value;

    for (Side side : kSides) {
        const ChannelState& ch = ctx.state.channels[side];
        const double drift = ctx.demand.net.local_drift(side);
        const Currency margin = std::abs(drift) * params.safety_margin;

        if (drift < 0.0) {
            const Minutes to_depletion = ch.local / -drift;
            if (to_depletion < lead) {
                const Currency amount = std::min(affordable, ch.remote - margin);
                if (amount > 0.0) d[side] = SwapRequest{SwapKind::SwapIn, amount};
            }
        } else if (drift > 0.0) {
            const Minutes to_saturation = ch.remote / drift;
            if (to_saturation < lead) {
                const Currency amount = ch.local - margin;
                if (amount > 0.0) d[side] = SwapRequest{SwapKind::SwapOut, amount};
            }
        }
    }
    return d;
}

// ---------------------------------------------------------------------------

bool in_range(const RawAction& a) {
    return a.l >= -1.0 && a.l <= 1.0 && a.r >= -1.0 && a.r <= 1.0;
}

PerSide<ActionBounds> action_bounds(const PolicyContext& ctx) {
    PerSide<ActionBounds> b;
    const Currency affordable = phi_inverse(ctx.state.onchain, ctx.fees).value;
    for (Side side : kSides) {
        const ChannelState& ch = ctx.state.channels[side];
        b[side].lower = -ch.local;
        b[side].upper = std::min({ctx.demand.future_refined[side], affordable, ch.capacity});
    }
    return b;
}

SwapDecision process_raw_action(const RawAction& raw, const PolicyContext& ctx,
                                double min_swap_fraction) {
    if (!in_range(raw)) throw std::invalid_argument("raw action outside [-1, 1]");
    const PerSide<ActionBounds> bounds = action_bounds(ctx);
    const Currency smallest_out = min_swap_out(ctx.fees);

    SwapDecision d;
    for (Side side : kSides) {
        const ChannelState& ch = ctx.state.channels[side];
        const double r = raw[side];
        const Currency threshold = min_swap_fraction * ch.capacity;
        if (r < 0.0) {
            const Currency amount = -r * ch.local;
            if (amount >= threshold && amount >= smallest_out && amount > 0.0)
                d[side] = SwapRequest{SwapKind::SwapOut, amount};
        } else {
            const Currency amount = r * bounds[side].upper;
            if (amount > threshold && amount > 0.0) d[side] = SwapRequest{SwapKind::SwapIn, amount};
        }
    }
    return d;
}

Currency compute_reward(const StepLedger& ledger, Currency penalty) {
    return ledger.fortune_change() - ledger.lost_fees - penalty * ledger.failed_swaps;
}

// ---------------------------------------------------------------------------

AutoloopPolicy::AutoloopPolicy(AutoloopParams params) : params_(params) { params_.validate(); }

LoopmaxPolicy::LoopmaxPolicy(LoopmaxParams params) : params_(params) { params_.validate(); }

RawActionPolicy::RawActionPolicy(Source source, double min_swap_fraction)
    : source_(std::move(source)), min_swap_fraction_(min_swap_fraction) {}

SwapDecision RawActionPolicy::decide(const PolicyContext& ctx) {
    return process_raw_action(source_(ctx), ctx, min_swap_fraction_);
}

}  // namespace rebal
