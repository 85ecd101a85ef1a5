// Discrete-event simulation of the relay node.
//
// Three event kinds share one queue: transaction arrivals (one independent
// stream per direction), swap completions, and control epochs at
// i * check_period. At equal times completions run first, then arrivals,
// then the epoch, so a decision sees everything that happened up to and
// including its own instant.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <random>
#include <variant>
#include <vector>

#include "rebal/estimators.hpp"
#include "rebal/model.hpp"
#include "rebal/policies.hpp"
#include "rebal/trace.hpp"

namespace rebal {

struct AmountDistribution {
    enum class Kind : std::uint8_t { Uniform, Gaussian, Constant };
    Kind kind = Kind::Gaussian;
    double a = 25.0;  // lo | mean | value
    double b = 20.0;  // hi | std  | unused

    static AmountDistribution uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }
    static AmountDistribution gaussian(double mean, double stddev) {
        return {Kind::Gaussian, mean, stddev};
    }
    static AmountDistribution constant(double value) { return {Kind::Constant, value, 0.0}; }

    void validate() const;
};

struct ArrivalProcess {
    enum class Timing : std::uint8_t { Poisson, Periodic };
    Timing timing = Timing::Poisson;
    double rate = 0.0;       // tx per minute (Poisson); 0 disables the stream
    Minutes period = 0.0;    // Periodic spacing
    Minutes offset = 0.0;    // Periodic first arrival
    AmountDistribution amount;
    std::optional<std::uint64_t> count_limit;

    bool active() const;
    void validate() const;
};

struct SimClockConfig {
    Minutes check_period = 10.0;
    Minutes confirmation_time = 10.0;
    // With a time horizon the run has ceil(max_time / check_period) decision
    // steps. Without one, every active arrival stream needs a count limit and
    // the run stops at the first epoch after the last arrival.
    std::optional<Minutes> max_time;

    void validate() const;
};

// Seeds of the four random sub-streams. Derived from one master seed unless
// overridden.
struct StreamSeeds {
    PerDirection<std::uint64_t> timing;
    PerDirection<std::uint64_t> amounts;

    static StreamSeeds derive(std::uint64_t master);
};

struct SimulationSetup {
    NodeState initial;
    FeeSchedule fees;
    SimClockConfig clock;
    PerDirection<ArrivalProcess> arrivals;
    std::optional<Minutes> estimator_window;
    Currency failed_swap_penalty = 0.0;
    StreamSeeds seeds = StreamSeeds::derive(0);

    void validate() const;
};

// Draws one arrival. Returns nullopt once the process is exhausted.
class ArrivalStream {
public:
    ArrivalStream(Direction direction, ArrivalProcess process, std::uint64_t timing_seed,
                  std::uint64_t amount_seed);

    std::optional<Transaction> next(Minutes now);
    std::uint64_t generated() const { return generated_; }

private:
    Direction direction_;
    ArrivalProcess process_;
    std::mt19937_64 timing_rng_;
    std::mt19937_64 amount_rng_;
    std::uint64_t generated_ = 0;
};

Transaction generate_arrival(const ArrivalProcess& process, Direction direction,
                             std::mt19937_64& timing_rng, std::mt19937_64& amount_rng,
                             Minutes now);

enum class EventKind : std::uint8_t { SwapCompletion = 0, TxArrival = 1, ControlEpoch = 2 };
const char* to_string(EventKind k);

struct Event {
    Minutes time = 0.0;
    EventKind kind = EventKind::ControlEpoch;
    std::uint64_t sequence = 0;
    std::variant<std::monostate, Transaction, SwapOperation, std::uint64_t> payload;
};

// Strict weak order used by the queue: true when `a` fires before `b`.
bool event_before(const Event& a, const Event& b);

// Notification after every state change, for external auditing.
struct EventRecord {
    enum class Kind : std::uint8_t { TxArrival, SwapStart, SwapCompletion, ControlEpoch };
    Kind kind = Kind::ControlEpoch;
    Minutes time = 0.0;
    const NodeState* before = nullptr;
    const NodeState* after = nullptr;
    std::optional<TxResult> tx;
    std::optional<Transaction> transaction;
    std::optional<SwapOperation> swap;
};
using EventObserver = std::function<void(const EventRecord&)>;

class Simulation {
public:
    explicit Simulation(SimulationSetup setup);

    // Runs events up to the next control epoch that needs a decision and
    // returns its context, or nullopt once the run is over. Each call closes
    // the previous step; a step with no act() call is a no-op step.
    std::optional<PolicyContext> advance();

    // Validates and starts the swaps of the current step.
    ValidationResult act(const SwapDecision& decision);

    // Decision inputs as of the latest epoch reached (also valid once the
    // run is finished, describing the final state).
    PolicyContext context() const;

    bool finished() const { return finished_; }
    const NodeState& state() const { return state_; }
    const MetricsTrace& trace() const { return trace_; }
    MetricsTrace take_trace() { return std::move(trace_); }
    std::uint64_t epoch() const { return epoch_; }
    const SimulationSetup& setup() const { return setup_; }

    // Ledger of the most recently closed step.
    const std::optional<StepLedger>& last_ledger() const { return last_ledger_; }

    void set_observer(EventObserver observer) { observer_ = std::move(observer); }

private:
    void push(Minutes time, EventKind kind, decltype(Event::payload) payload);
    void schedule_arrival(Direction d, Minutes now);
    void handle(const Event& e);
    bool arrivals_exhausted() const;
    bool is_final_epoch(std::uint64_t i) const;
    void close_step(Minutes now);
    void audit(const char* where) const;
    void notify(const EventRecord& r) const;

    struct QueueOrder {
        bool operator()(const Event& a, const Event& b) const { return event_before(b, a); }
    };

    SimulationSetup setup_;
    NodeState state_;
    DemandEstimates estimates_;
    PerDirection<std::optional<ArrivalStream>> streams_;
    PerDirection<bool> arrival_scheduled_{};
    std::priority_queue<Event, std::vector<Event>, QueueOrder> queue_;
    std::uint64_t sequence_ = 0;
    std::uint64_t epoch_ = 0;
    std::optional<std::uint64_t> final_epoch_;  // time horizon only
    Minutes stop_time_ = 0.0;
    Minutes now_ = 0.0;
    bool finished_ = false;
    bool decided_ = false;

    LedgerAccumulator ledger_;
    std::optional<StepLedger> last_ledger_;
    TraceRow draft_;
    bool draft_open_ = false;
    Currency cum_relay_ = 0.0;
    Currency cum_lost_ = 0.0;
    Currency cum_swap_fees_ = 0.0;
    std::uint64_t cum_failed_ = 0;
    MetricsTrace trace_;
    EventObserver observer_;
};

// Runs a whole simulation under `policy`.
MetricsTrace run(const SimulationSetup& setup, Policy& policy,
                 const EventObserver& observer = {});

}  // namespace rebal
