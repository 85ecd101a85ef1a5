#include "rebal/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rebal {

namespace {

// Rounding residue below this (relative to the quantities involved) is
// treated as zero when releasing escrow.
constexpr double kResidue = 1e-12;

Currency& source_remote(NodeState& s, Direction d) {
    return s.channels[source_side(d)].remote;
}

void require_non_negative(Currency x, const char* what) {
    if (!(x >= 0.0)) throw std::domain_error(std::string(what) + " must be non-negative");
}

Currency release(Currency held, Currency amount) {
    Currency left = held - amount;
    if (left < 0.0 && -left <= kResidue * std::max(1.0, amount)) left = 0.0;
    return left;
}

}  // namespace

const char* to_string(Side s) { return s == Side::L ? "L" : "R"; }

const char* to_string(Direction d) { return d == Direction::LtoR ? "LtoR" : "RtoL"; }

const char* to_string(SwapKind k) { return k == SwapKind::SwapIn ? "in" : "out"; }

const char* to_string(SwapStatus s) {
    switch (s) {
        case SwapStatus::Pending: return "pending";
        case SwapStatus::Succeeded: return "ok";
        case SwapStatus::FailedRefunded: return "refunded";
    }
    return "?";
}

const char* to_string(Constraint c) {
    switch (c) {
        case Constraint::NonNegative: return "non_negative";
        case Constraint::MinSwapOut: return "min_swap_out";
        case Constraint::SwapOutWithinLocal: return "swap_out_within_local";
        case Constraint::OnChainCoversSwapIns: return "onchain_covers_swap_ins";
        case Constraint::WithinCapacity: return "within_capacity";
        case Constraint::ChannelBusy: return "channel_busy";
    }
    return "?";
}

void FeeSchedule::validate() const {
    if (!(relay_base >= 0.0)) throw std::invalid_argument("relay_base must be >= 0");
    if (!(relay_prop >= 0.0 && relay_prop < 1.0))
        throw std::invalid_argument("relay_prop must be in [0, 1)");
    if (!(swap_prop >= 0.0 && swap_prop < 1.0))
        throw std::invalid_argument("swap_prop must be in [0, 1)");
    if (!(swap_fixed >= 0.0)) throw std::invalid_argument("swap_fixed must be >= 0");
}

Currency ChannelState::locked() const {
    if (pending && pending->kind == SwapKind::SwapOut) return pending->amount;
    return 0.0;
}

Currency NodeState::fortune() const {
    Currency total = onchain + onchain_locked;
    for (Side s : kSides) total += channels[s].local + channels[s].locked();
    return total;
}

NodeState make_state(Currency cap_l, Currency local_l, Currency remote_l, Currency cap_r,
                     Currency local_r, Currency remote_r, Currency onchain) {
    NodeState s;
    s.channels[Side::L] = {cap_l, local_l, remote_l, std::nullopt};
    s.channels[Side::R] = {cap_r, local_r, remote_r, std::nullopt};
    s.onchain = onchain;
    if (auto err = check_state(s)) throw std::invalid_argument(*err);
    return s;
}

// ---------------------------------------------------------------------------

Currency relay_fee(Currency amount, const FeeSchedule& fees) {
    require_non_negative(amount, "relay amount");
    if (amount == 0.0) return 0.0;
    return fees.relay_base + fees.relay_prop * amount;
}

Currency swap_fee(Currency net_amount, const FeeSchedule& fees) {
    require_non_negative(net_amount, "swap net amount");
    if (net_amount == 0.0) return 0.0;
    return net_amount * fees.swap_prop + fees.swap_fixed;
}

Currency phi(Currency net_amount, const FeeSchedule& fees) {
    return net_amount + swap_fee(net_amount, fees);
}

PhiInverse phi_inverse(Currency gross, const FeeSchedule& fees) {
    require_non_negative(gross, "swap gross amount");
    if (gross == 0.0) return {};
    if (gross <= fees.swap_fixed) return {0.0, true};
    Currency net = (gross - fees.swap_fixed) / (1.0 + fees.swap_prop);
    // Keep phi(net) <= gross so that a swap sized from an on-chain balance
    // is always affordable.
    while (net > 0.0 && phi(net, fees) > gross) net = std::nextafter(net, 0.0);
    return {net, false};
}

Currency min_swap_out(const FeeSchedule& fees) {
    return fees.swap_fixed / (1.0 - fees.swap_prop);
}

// ---------------------------------------------------------------------------

TxResult process_transaction(const NodeState& state, const Transaction& tx,
                             const FeeSchedule& fees) {
    if (!(tx.amount > 0.0)) throw std::invalid_argument("transaction amount must be positive");

    TxResult out{state, false, 0.0, 0.0};
    const Currency fee = relay_fee(tx.amount, fees);
    const Currency forwarded = tx.amount - fee;

    const Side in = source_side(tx.direction);
    const Side outside = other(in);
    const ChannelState& src = state.channels[in];
    const ChannelState& dst = state.channels[outside];

    const bool feasible = tx.amount <= src.remote && forwarded >= 0.0 && forwarded <= dst.local;
    if (!feasible) {
        out.lost_fee = fee;
        return out;
    }

    NodeState& s = out.state;
    source_remote(s, tx.direction) -= tx.amount;
    s.channels[in].local += tx.amount;
    s.channels[outside].local -= forwarded;
    s.channels[outside].remote += forwarded;
    out.success = true;
    out.relay_fee_earned = fee;
    return out;
}

// ---------------------------------------------------------------------------

ValidationResult validate_swap_decision(const NodeState& state, const SwapDecision& decision,
                                        const FeeSchedule& fees) {
    ValidationResult result;
    result.accepted = decision;

    auto reject = [&](Side side, Constraint c) {
        result.violations.push_back({side, c});
        result.accepted[side].reset();
    };

    for (Side side : kSides) {
        const auto& req = decision[side];
        if (!req) continue;
        const ChannelState& ch = state.channels[side];
        if (ch.busy()) {
            reject(side, Constraint::ChannelBusy);
            continue;
        }
        if (!(req->amount >= 0.0)) {
            reject(side, Constraint::NonNegative);
            continue;
        }
        if (req->amount == 0.0) {
            result.accepted[side].reset();
            continue;
        }
        if (req->amount > ch.capacity) {
            reject(side, Constraint::WithinCapacity);
            continue;
        }
        if (req->kind == SwapKind::SwapOut) {
            if (req->amount < min_swap_out(fees)) {
                reject(side, Constraint::MinSwapOut);
            } else if (req->amount > ch.local) {
                reject(side, Constraint::SwapOutWithinLocal);
            }
        }
    }

    Currency budget = state.onchain;
    for (Side side : kSides) {
        const auto& req = result.accepted[side];
        if (!req || req->kind != SwapKind::SwapIn) continue;
        const Currency cost = phi(req->amount, fees);
        if (cost > budget) {
            reject(side, Constraint::OnChainCoversSwapIns);
        } else {
            budget -= cost;
        }
    }
    return result;
}

SwapStart begin_swap(const NodeState& state, Side side, SwapKind kind, Currency amount,
                     Minutes now, const FeeSchedule& fees, Minutes confirmation_time) {
    if (!(amount > 0.0)) throw SwapRejected("swap amount must be positive");
    const ChannelState& ch = state.channels[side];
    if (ch.busy()) throw SwapRejected(std::string("channel ") + to_string(side) + " busy");

    SwapStart out{state, {}};
    SwapOperation& op = out.op;
    op.kind = kind;
    op.side = side;
    op.amount = amount;
    op.start_time = now;
    op.complete_time = now + confirmation_time;
    op.status = SwapStatus::Pending;

    if (kind == SwapKind::SwapIn) {
        op.net_amount = amount;
        op.fee = swap_fee(amount, fees);
        const Currency escrow = phi(amount, fees);
        if (escrow > state.onchain) throw SwapRejected("insufficient on-chain funds for swap-in");
        out.state.onchain -= escrow;
        out.state.onchain_locked += escrow;
    } else {
        if (amount > ch.local) throw SwapRejected("insufficient local balance for swap-out");
        const PhiInverse net = phi_inverse(amount, fees);
        if (net.below_minimum) throw SwapRejected("swap-out amount does not cover its fee");
        op.net_amount = net.value;
        op.fee = amount - net.value;
        out.state.channels[side].local -= amount;
    }
    out.state.channels[side].pending = op;
    return out;
}

SwapFinish complete_swap(const NodeState& state, const SwapOperation& op, const FeeSchedule&) {
    const ChannelState& ch = state.channels[op.side];
    if (!ch.pending || *ch.pending != op || op.status != SwapStatus::Pending)
        throw std::logic_error("completing a swap that is not pending on its channel");

    SwapFinish out{state, op};
    NodeState& s = out.state;
    ChannelState& c = s.channels[op.side];
    const Currency escrow = op.amount + op.fee;

    if (op.kind == SwapKind::SwapIn) {
        s.onchain_locked = release(s.onchain_locked, escrow);
        if (c.remote >= op.amount) {
            c.remote -= op.amount;
            c.local += op.amount;
            out.op.status = SwapStatus::Succeeded;
        } else {
            s.onchain += escrow;
            out.op.status = SwapStatus::FailedRefunded;
        }
    } else {
        s.onchain += op.net_amount;
        c.remote += op.amount;
        out.op.status = SwapStatus::Succeeded;
    }
    c.pending.reset();
    return out;
}

// ---------------------------------------------------------------------------

void LedgerAccumulator::record_transaction(const TxResult& r) {
    relay_ += r.relay_fee_earned;
    lost_ += r.lost_fee;
}

void LedgerAccumulator::record_swap_completion(const SwapOperation& op) {
    if (op.status == SwapStatus::Succeeded) {
        swap_fees_ += op.fee;
    } else if (op.status == SwapStatus::FailedRefunded) {
        ++failed_;
    }
}

StepLedger LedgerAccumulator::close(Currency fortune_after) const {
    StepLedger l;
    l.relay_fees_earned = relay_;
    l.lost_fees = lost_;
    l.swap_fees_paid = swap_fees_;
    l.failed_swaps = failed_;
    l.fortune_before = fortune_before_;
    l.fortune_after = fortune_after;
    l.total_arriving_fees = relay_ + lost_;

    const double scale = std::max({1.0, std::abs(fortune_before_), std::abs(fortune_after),
                                   l.total_arriving_fees, l.fee_cost()});
    const double gap = l.fortune_change() + l.fee_cost() - l.total_arriving_fees;
    if (std::abs(gap) > kRelativeTolerance * scale) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "fortune/fee identity broken: change " << l.fortune_change() << " + cost "
            << l.fee_cost() << " != arriving fees " << l.total_arriving_fees;
        throw InvariantViolation(msg.str());
    }
    return l;
}

// ---------------------------------------------------------------------------

std::optional<std::string> check_state(const NodeState& state, double rel_tol) {
    std::ostringstream msg;
    msg.precision(17);
    Currency pending_escrow = 0.0;
    for (Side side : kSides) {
        const ChannelState& c = state.channels[side];
        if (!(c.local >= 0.0) || !(c.remote >= 0.0)) {
            msg << "negative balance in channel " << to_string(side);
            return msg.str();
        }
        const Currency sum = c.local + c.remote + c.locked();
        if (std::abs(sum - c.capacity) > rel_tol * std::max(1.0, c.capacity)) {
            msg << "channel " << to_string(side) << " holds " << sum << " but capacity is "
                << c.capacity;
            return msg.str();
        }
        if (c.pending && c.pending->kind == SwapKind::SwapIn)
            pending_escrow += c.pending->amount + c.pending->fee;
    }
    if (!(state.onchain >= 0.0) || !(state.onchain_locked >= 0.0)) return "negative on-chain balance";
    if (std::abs(state.onchain_locked - pending_escrow) >
        rel_tol * std::max(1.0, pending_escrow)) {
        msg << "on-chain escrow " << state.onchain_locked << " does not match pending swap-ins "
            << pending_escrow;
        return msg.str();
    }
    return std::nullopt;
}

std::string describe(const NodeState& state) {
    std::ostringstream os;
    os.precision(17);
    for (Side side : kSides) {
        const ChannelState& c = state.channels[side];
        os << to_string(side) << "{cap=" << c.capacity << " local=" << c.local
           << " remote=" << c.remote;
        if (c.pending) {
            os << " pending=" << to_string(c.pending->kind) << ":" << c.pending->amount << "@"
               << c.pending->complete_time;
        }
        os << "} ";
    }
    os << "onchain=" << state.onchain << " locked=" << state.onchain_locked
       << " fortune=" << state.fortune();
    return os.str();
}

}  // namespace rebal
