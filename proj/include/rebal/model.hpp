// Relay-node accounting model: two payment channels (to neighbors L and R)
// plus an on-chain balance, with relay fees on forwarded transactions and
// submarine swaps (swap-in / swap-out) as the rebalancing mechanism.
//
// Conventions
// - ChannelState::local is the node's balance in the channel, ::remote the
//   neighbor's. For the L channel local = b_NL, remote = b_LN.
// - Swap amounts carry "in-channel" semantics: a swap-in amount is what will
//   arrive in the channel (fee paid on top, on-chain); a swap-out amount is
//   what leaves the channel and already includes the fee.
// - Fortune counts escrowed funds at face value, so swap fees are realized
//   when the swap completes, not when it starts.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rebal {

using Currency = double;
using Minutes = double;

enum class Side : std::uint8_t { L = 0, R = 1 };
inline constexpr std::array<Side, 2> kSides{Side::L, Side::R};

constexpr std::size_t index(Side s) { return static_cast<std::size_t>(s); }
constexpr Side other(Side s) { return s == Side::L ? Side::R : Side::L; }
const char* to_string(Side s);

// Fixed pair keyed by Side.
template <typename T>
struct PerSide {
    std::array<T, 2> values{};

    T& operator[](Side s) { return values[index(s)]; }
    const T& operator[](Side s) const { return values[index(s)]; }
    bool operator==(const PerSide&) const = default;
};

enum class Direction : std::uint8_t { LtoR = 0, RtoL = 1 };
inline constexpr std::array<Direction, 2> kDirections{Direction::LtoR, Direction::RtoL};

constexpr std::size_t index(Direction d) { return static_cast<std::size_t>(d); }
const char* to_string(Direction d);

// Side the payment enters from.
constexpr Side source_side(Direction d) { return d == Direction::LtoR ? Side::L : Side::R; }

template <typename T>
struct PerDirection {
    std::array<T, 2> values{};

    T& operator[](Direction d) { return values[index(d)]; }
    const T& operator[](Direction d) const { return values[index(d)]; }
};

struct FeeSchedule {
    Currency relay_base = 0.0;  // per forwarded transaction
    double relay_prop = 0.0;    // fraction of the forwarded amount
    double swap_prop = 0.0;     // swap server + routing fraction of the net amount
    Currency swap_fixed = 0.0;  // on-chain miner fee per swap

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

enum class SwapKind : std::uint8_t { SwapIn, SwapOut };
enum class SwapStatus : std::uint8_t { Pending, Succeeded, FailedRefunded };

const char* to_string(SwapKind k);
const char* to_string(SwapStatus s);

struct SwapOperation {
    SwapKind kind = SwapKind::SwapIn;
    Side side = Side::L;
    Currency amount = 0.0;      // moves in the channel
    Currency net_amount = 0.0;  // fortune actually exchanged between layers
    Currency fee = 0.0;         // swap_fee(net_amount)
    Minutes start_time = 0.0;
    Minutes complete_time = 0.0;
    SwapStatus status = SwapStatus::Pending;

    bool operator==(const SwapOperation&) const = default;
};

struct ChannelState {
    Currency capacity = 0.0;
    Currency local = 0.0;
    Currency remote = 0.0;
    std::optional<SwapOperation> pending;

    // Swap-out funds escrowed inside the channel; zero otherwise.
    Currency locked() const;
    bool busy() const { return pending.has_value(); }
};

struct NodeState {
    PerSide<ChannelState> channels;
    Currency onchain = 0.0;
    Currency onchain_locked = 0.0;  // swap-in escrow awaiting confirmation

    Currency fortune() const;
};

// Builds a state with no pending swaps. Throws std::invalid_argument when the
// balances are negative or do not sum to the capacities.
NodeState make_state(Currency cap_l, Currency local_l, Currency remote_l,
                     Currency cap_r, Currency local_r, Currency remote_r,
                     Currency onchain);

struct Transaction {
    Direction direction = Direction::LtoR;
    Currency amount = 0.0;
    Minutes arrival_time = 0.0;
};

struct SwapRequest {
    SwapKind kind = SwapKind::SwapIn;
    Currency amount = 0.0;

    bool operator==(const SwapRequest&) const = default;
};

// One optional request per channel. Having a single slot per side makes a
// simultaneous swap-in and swap-out on the same channel unrepresentable.
using SwapDecision = PerSide<std::optional<SwapRequest>>;

inline SwapDecision no_op_decision() { return {}; }

// ---------------------------------------------------------------------------
// Fees

Currency relay_fee(Currency amount, const FeeSchedule& fees);
Currency swap_fee(Currency net_amount, const FeeSchedule& fees);

// Gross cost of moving net_amount across layers: net + swap_fee(net).
Currency phi(Currency net_amount, const FeeSchedule& fees);

struct PhiInverse {
    Currency value = 0.0;
    bool below_minimum = false;  // 0 < gross <= fixed fee
};
PhiInverse phi_inverse(Currency gross, const FeeSchedule& fees);

// Smallest swap-out amount that covers its own fee: M / (1 - F).
Currency min_swap_out(const FeeSchedule& fees);

// ---------------------------------------------------------------------------
// Transactions

struct TxResult {
    NodeState state;
    bool success = false;
    Currency relay_fee_earned = 0.0;
    Currency lost_fee = 0.0;
};

// All-or-nothing forwarding through both channels. A failed transaction
// leaves the state untouched and its fee is reported as lost.
TxResult process_transaction(const NodeState& state, const Transaction& tx,
                             const FeeSchedule& fees);

// ---------------------------------------------------------------------------
// Swap decisions and lifecycle

enum class Constraint : std::uint8_t {
    NonNegative,           // amounts >= 0
    MinSwapOut,            // swap-out covers its own fee
    SwapOutWithinLocal,    // swap-out <= local balance
    OnChainCoversSwapIns,  // sum of swap-in costs <= on-chain balance
    WithinCapacity,        // amount <= channel capacity
    ChannelBusy,           // a swap is already pending on the channel
};
const char* to_string(Constraint c);

struct Violation {
    Side side = Side::L;
    Constraint constraint = Constraint::NonNegative;

    bool operator==(const Violation&) const = default;
};

struct ValidationResult {
    SwapDecision accepted;  // offending sides downgraded to no-op
    std::vector<Violation> violations;

    bool valid() const { return violations.empty(); }
};

// When two swap-ins only fit the on-chain balance separately, the L request
// is kept and the R request is rejected.
ValidationResult validate_swap_decision(const NodeState& state, const SwapDecision& decision,
                                        const FeeSchedule& fees);

class SwapRejected : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SwapStart {
    NodeState state;
    SwapOperation op;
};

SwapStart begin_swap(const NodeState& state, Side side, SwapKind kind, Currency amount,
                     Minutes now, const FeeSchedule& fees, Minutes confirmation_time);

struct SwapFinish {
    NodeState state;
    SwapOperation op;  // status resolved
};

// Swap-ins fail (and are fully refunded) when the neighbor cannot forward the
// amount at completion. Swap-outs always succeed. Throws std::logic_error if
// op is not the channel's pending swap.
SwapFinish complete_swap(const NodeState& state, const SwapOperation& op, const FeeSchedule& fees);

// ---------------------------------------------------------------------------
// Per-step accounting

class InvariantViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StepLedger {
    Currency relay_fees_earned = 0.0;
    Currency lost_fees = 0.0;
    Currency swap_fees_paid = 0.0;
    std::uint32_t failed_swaps = 0;
    Currency fortune_before = 0.0;
    Currency fortune_after = 0.0;
    Currency total_arriving_fees = 0.0;

    Currency fortune_change() const { return fortune_after - fortune_before; }
    Currency fee_cost() const { return lost_fees + swap_fees_paid; }
};

// Collects events of one control interval.
class LedgerAccumulator {
public:
    explicit LedgerAccumulator(Currency fortune_before = 0.0) : fortune_before_(fortune_before) {}

    void record_transaction(const TxResult& r);
    void record_swap_completion(const SwapOperation& op);

    // Throws InvariantViolation when fortune change plus fee cost differs from
    // the fees on all arriving traffic by more than 1e-9 relative to the
    // magnitudes involved.
    StepLedger close(Currency fortune_after) const;

private:
    Currency fortune_before_ = 0.0;
    Currency relay_ = 0.0;
    Currency lost_ = 0.0;
    Currency swap_fees_ = 0.0;
    std::uint32_t failed_ = 0;
};

inline constexpr double kRelativeTolerance = 1e-9;

// Returns a description of the first broken state invariant, if any.
std::optional<std::string> check_state(const NodeState& state,
                                       double rel_tol = kRelativeTolerance);

std::string describe(const NodeState& state);

}  // namespace rebal
