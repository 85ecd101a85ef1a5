#include "rebal/engine.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rebal {

void AmountDistribution::validate() const {
    switch (kind) {
        case Kind::Uniform:
            if (!(a < b) || !(b > 0.0))
                throw std::invalid_argument("uniform amounts need lo < hi and hi > 0");
            break;
        case Kind::Gaussian:
            if (!(b > 0.0)) throw std::invalid_argument("gaussian amounts need std > 0");
            break;
        case Kind::Constant:
            if (!(a > 0.0)) throw std::invalid_argument("constant amount must be > 0");
            break;
    }
}

bool ArrivalProcess::active() const {
    if (count_limit && *count_limit == 0) return false;
    return timing == Timing::Periodic ? period > 0.0 : rate > 0.0;
}

void ArrivalProcess::validate() const {
    if (timing == Timing::Poisson && !(rate >= 0.0))
        throw std::invalid_argument("arrival rate must be >= 0");
    if (timing == Timing::Periodic && (!(period > 0.0) || !(offset >= 0.0)))
        throw std::invalid_argument("periodic arrivals need period > 0 and offset >= 0");
    amount.validate();
}

void SimClockConfig::validate() const {
    if (!(confirmation_time > 0.0)) throw std::invalid_argument("confirmation time must be > 0");
    if (!(check_period >= confirmation_time))
        throw std::invalid_argument("check period must be >= confirmation time");
    if (max_time && !(*max_time >= 0.0)) throw std::invalid_argument("max_time must be >= 0");
}

StreamSeeds StreamSeeds::derive(std::uint64_t master) {
    auto sub = [master](std::uint32_t stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(master),
                          static_cast<std::uint32_t>(master >> 32), stream};
        std::array<std::uint32_t, 2> words{};
        seq.generate(words.begin(), words.end());
        return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
    };
    StreamSeeds s;
    s.timing[Direction::LtoR] = sub(1);
    s.timing[Direction::RtoL] = sub(2);
    s.amounts[Direction::LtoR] = sub(3);
    s.amounts[Direction::RtoL] = sub(4);
    return s;
}

void SimulationSetup::validate() const {
    fees.validate();
    clock.validate();
    for (Direction d : kDirections) arrivals[d].validate();
    if (auto err = check_state(initial)) throw std::invalid_argument("initial state: " + *err);
    for (Side s : kSides)
        if (initial.channels[s].busy())
            throw std::invalid_argument("initial state must not have pending swaps");
    if (!clock.max_time) {
        for (Direction d : kDirections)
            if (arrivals[d].active() && !arrivals[d].count_limit)
                throw std::invalid_argument(
                    "without a time horizon every active arrival stream needs a count limit");
    }
    if (estimator_window && !(*estimator_window > 0.0))
        throw std::invalid_argument("estimator window must be > 0");
    if (!(failed_swap_penalty >= 0.0)) throw std::invalid_argument("penalty must be >= 0");
}

// ---------------------------------------------------------------------------

namespace {

Currency draw(const AmountDistribution& dist, std::mt19937_64& rng) {
    switch (dist.kind) {
        case AmountDistribution::Kind::Constant:
            return dist.a;
        case AmountDistribution::Kind::Uniform: {
            std::uniform_real_distribution<double> u(dist.a, dist.b);
            for (;;) {
                const double x = u(rng);
                if (x > 0.0) return x;
            }
        }
        case AmountDistribution::Kind::Gaussian: {
            std::normal_distribution<double> g(dist.a, dist.b);
            for (;;) {
                const double x = g(rng);
                if (x > 0.0) return x;
            }
        }
    }
    throw std::logic_error("unknown amount distribution");
}

}  // namespace

Transaction generate_arrival(const ArrivalProcess& process, Direction direction,
                             std::mt19937_64& timing_rng, std::mt19937_64& amount_rng,
                             Minutes now) {
    Transaction tx;
    tx.direction = direction;
    if (process.timing == ArrivalProcess::Timing::Poisson) {
        std::exponential_distribution<double> gap(process.rate);
        tx.arrival_time = now + gap(timing_rng);
    } else {
        tx.arrival_time = now + process.period;
    }
    tx.amount = draw(process.amount, amount_rng);
    return tx;
}

ArrivalStream::ArrivalStream(Direction direction, ArrivalProcess process,
                             std::uint64_t timing_seed, std::uint64_t amount_seed)
    : direction_(direction),
      process_(process),
      timing_rng_(timing_seed),
      amount_rng_(amount_seed) {}

std::optional<Transaction> ArrivalStream::next(Minutes now) {
    if (!process_.active()) return std::nullopt;
    if (process_.count_limit && generated_ >= *process_.count_limit) return std::nullopt;
    Transaction tx;
    if (process_.timing == ArrivalProcess::Timing::Periodic) {
        // Anchored to the schedule rather than `now` so spacing never drifts.
        tx = generate_arrival(process_, direction_, timing_rng_, amount_rng_, 0.0);
        tx.arrival_time = process_.offset + static_cast<double>(generated_) * process_.period;
    } else {
        tx = generate_arrival(process_, direction_, timing_rng_, amount_rng_, now);
    }
    ++generated_;
    return tx;
}

// ---------------------------------------------------------------------------

const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::SwapCompletion: return "swap_completion";
        case EventKind::TxArrival: return "tx_arrival";
        case EventKind::ControlEpoch: return "control_epoch";
    }
    return "?";
}

bool event_before(const Event& a, const Event& b) {
    if (a.time != b.time) return a.time < b.time;
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.sequence < b.sequence;
}

// ---------------------------------------------------------------------------

Simulation::Simulation(SimulationSetup setup) : setup_(std::move(setup)) {
    setup_.validate();
    state_ = setup_.initial;
    estimates_ = make_estimates(setup_.estimator_window);

    stop_time_ = std::numeric_limits<double>::infinity();
    if (setup_.clock.max_time) {
        const auto steps = static_cast<std::uint64_t>(
            std::ceil(*setup_.clock.max_time / setup_.clock.check_period));
        final_epoch_ = steps;
        stop_time_ = static_cast<double>(steps) * setup_.clock.check_period;
    }

    trace_.initial_fortune = state_.fortune();
    ledger_ = LedgerAccumulator(trace_.initial_fortune);

    for (Direction d : kDirections) {
        if (!setup_.arrivals[d].active()) continue;
        streams_[d].emplace(d, setup_.arrivals[d], setup_.seeds.timing[d], setup_.seeds.amounts[d]);
        schedule_arrival(d, 0.0);
    }
    push(0.0, EventKind::ControlEpoch, std::uint64_t{0});
}

void Simulation::push(Minutes time, EventKind kind, decltype(Event::payload) payload) {
    queue_.push(Event{time, kind, sequence_++, std::move(payload)});
}

void Simulation::schedule_arrival(Direction d, Minutes now) {
    arrival_scheduled_[d] = false;
    if (!streams_[d]) return;
    auto tx = streams_[d]->next(now);
    if (!tx || tx->arrival_time > stop_time_) return;
    arrival_scheduled_[d] = true;
    push(tx->arrival_time, EventKind::TxArrival, *tx);
}

bool Simulation::arrivals_exhausted() const {
    return !arrival_scheduled_[Direction::LtoR] && !arrival_scheduled_[Direction::RtoL];
}

bool Simulation::is_final_epoch(std::uint64_t i) const {
    if (final_epoch_) return i >= *final_epoch_;
    const bool idle = !state_.channels[Side::L].busy() && !state_.channels[Side::R].busy();
    return arrivals_exhausted() && idle;
}

void Simulation::notify(const EventRecord& r) const {
    if (observer_) observer_(r);
}

void Simulation::audit(const char* where) const {
    if (auto err = check_state(state_)) {
        std::ostringstream msg;
        msg << "invariant violated after " << where << ": " << *err << " [" << describe(state_)
            << "]";
        throw InvariantViolation(msg.str());
    }
}

void Simulation::handle(const Event& e) {
    switch (e.kind) {
        case EventKind::TxArrival: {
            const auto& tx = std::get<Transaction>(e.payload);
            const NodeState before = state_;
            TxResult result = process_transaction(state_, tx, setup_.fees);
            state_ = result.state;
            ledger_.record_transaction(result);
            accumulate_arrival(estimates_, tx, result.success, setup_.fees);
            audit("transaction");
            if (observer_) {
                EventRecord r;
                r.kind = EventRecord::Kind::TxArrival;
                r.time = e.time;
                r.before = &before;
                r.after = &state_;
                r.tx = std::move(result);
                r.transaction = tx;
                notify(r);
            }
            schedule_arrival(tx.direction, tx.arrival_time);
            break;
        }
        case EventKind::SwapCompletion: {
            const auto& op = std::get<SwapOperation>(e.payload);
            const NodeState before = state_;
            SwapFinish done = complete_swap(state_, op, setup_.fees);
            state_ = done.state;
            ledger_.record_swap_completion(done.op);
            SwapRecord& rec = op.side == Side::L ? draft_.swap_l : draft_.swap_r;
            rec.outcome = to_string(done.op.status);
            audit("swap completion");
            if (observer_) {
                EventRecord r;
                r.kind = EventRecord::Kind::SwapCompletion;
                r.time = e.time;
                r.before = &before;
                r.after = &state_;
                r.swap = done.op;
                notify(r);
            }
            break;
        }
        case EventKind::ControlEpoch:
            break;
    }
}

void Simulation::close_step(Minutes now) {
    StepLedger ledger;
    try {
        ledger = ledger_.close(state_.fortune());
    } catch (const InvariantViolation& e) {
        throw InvariantViolation(std::string(e.what()) + " [" + describe(state_) + "]");
    }
    cum_relay_ += ledger.relay_fees_earned;
    cum_lost_ += ledger.lost_fees;
    cum_swap_fees_ += ledger.swap_fees_paid;
    cum_failed_ += ledger.failed_swaps;

    TraceRow& row = draft_;
    row.t_end = now;
    const ChannelState& l = state_.channels[Side::L];
    const ChannelState& r = state_.channels[Side::R];
    row.cap_l = l.capacity;
    row.cap_r = r.capacity;
    row.b_ln = l.remote;
    row.b_nl = l.local;
    row.b_nr = r.local;
    row.b_rn = r.remote;
    row.onchain = state_.onchain;
    row.onchain_locked = state_.onchain_locked;
    row.lock_l = l.locked();
    row.lock_r = r.locked();
    row.fortune_before = ledger.fortune_before;
    row.fortune_after = ledger.fortune_after;
    row.relay_fees = ledger.relay_fees_earned;
    row.lost_fees = ledger.lost_fees;
    row.swap_fees = ledger.swap_fees_paid;
    row.arriving_fees = ledger.total_arriving_fees;
    row.failed_swaps = ledger.failed_swaps;
    row.cum_relay_fees = cum_relay_;
    row.cum_lost_fees = cum_lost_;
    row.cum_swap_fees = cum_swap_fees_;
    row.cum_failed_swaps = cum_failed_;
    row.reward = compute_reward(ledger, setup_.failed_swap_penalty);
    trace_.rows.push_back(row);
    draft_open_ = false;

    last_ledger_ = ledger;
    ledger_ = LedgerAccumulator(ledger.fortune_after);
}

std::optional<PolicyContext> Simulation::advance() {
    if (finished_) return std::nullopt;
    while (!queue_.empty()) {
        const Event e = queue_.top();
        queue_.pop();
        if (e.kind != EventKind::ControlEpoch) {
            handle(e);
            continue;
        }

        const auto i = std::get<std::uint64_t>(e.payload);
        if (draft_open_) close_step(e.time);
        epoch_ = i;
        now_ = e.time;
        if (observer_) {
            EventRecord r;
            r.kind = EventRecord::Kind::ControlEpoch;
            r.time = e.time;
            r.before = &state_;
            r.after = &state_;
            notify(r);
        }
        if (is_final_epoch(i)) {
            finished_ = true;
            return std::nullopt;
        }
        push(static_cast<double>(i + 1) * setup_.clock.check_period, EventKind::ControlEpoch, i + 1);

        PolicyContext ctx = context();

        draft_ = TraceRow{};
        draft_.step = i;
        draft_.t_start = e.time;
        draft_.net_ln = ctx.demand.net.into_l;
        draft_.net_rn = ctx.demand.net.into_r;
        draft_.succ_lr = ctx.demand.success.l_to_r;
        draft_.succ_rl = ctx.demand.success.r_to_l;
        draft_.bhat_ln = ctx.demand.future_refined[Side::L];
        draft_.bhat_rn = ctx.demand.future_refined[Side::R];
        draft_open_ = true;
        decided_ = false;
        return ctx;
    }
    throw std::logic_error("event queue drained before the final epoch");
}

PolicyContext Simulation::context() const {
    PolicyContext ctx;
    ctx.state = state_;
    ctx.demand = snapshot(estimates_, state_, now_, setup_.clock.confirmation_time, setup_.fees);
    ctx.now = now_;
    ctx.check_period = setup_.clock.check_period;
    ctx.confirmation_time = setup_.clock.confirmation_time;
    ctx.fees = setup_.fees;
    return ctx;
}

ValidationResult Simulation::act(const SwapDecision& decision) {
    if (finished_ || !draft_open_) throw std::logic_error("act() called outside a control epoch");
    if (decided_) throw std::logic_error("act() called twice in one step");
    decided_ = true;

    ValidationResult v = validate_swap_decision(state_, decision, setup_.fees);
    draft_.downgrades = v.violations.size();

    const Minutes now = draft_.t_start;
    const Minutes next_epoch = static_cast<double>(epoch_ + 1) * setup_.clock.check_period;
    for (Side side : kSides) {
        const auto& req = v.accepted[side];
        if (!req) continue;
        const NodeState before = state_;
        SwapStart start = begin_swap(state_, side, req->kind, req->amount, now, setup_.fees,
                                     setup_.clock.confirmation_time);
        state_ = start.state;
        SwapRecord& rec = side == Side::L ? draft_.swap_l : draft_.swap_r;
        rec.kind = to_string(req->kind);
        rec.amount = req->amount;
        rec.outcome = to_string(SwapStatus::Pending);
        audit("swap start");
        // Completion never slips past the next epoch through rounding.
        push(std::min(start.op.complete_time, next_epoch), EventKind::SwapCompletion, start.op);
        if (observer_) {
            EventRecord r;
            r.kind = EventRecord::Kind::SwapStart;
            r.time = now;
            r.before = &before;
            r.after = &state_;
            r.swap = start.op;
            notify(r);
        }
    }
    return v;
}

MetricsTrace run(const SimulationSetup& setup, Policy& policy, const EventObserver& observer) {
    Simulation sim(setup);
    if (observer) sim.set_observer(observer);
    while (auto ctx = sim.advance()) sim.act(policy.decide(*ctx));
    return sim.take_trace();
}

}  // namespace rebal
