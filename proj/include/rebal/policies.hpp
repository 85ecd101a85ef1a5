// Rebalancing policies and the action processing used by learned policies.
#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include "rebal/estimators.hpp"
#include "rebal/model.hpp"

namespace rebal {

// Inputs available to a policy at a control epoch.
struct PolicyContext {
    NodeState state;
    DemandSnapshot demand;
    Minutes now = 0.0;
    Minutes check_period = 0.0;
    Minutes confirmation_time = 0.0;
    FeeSchedule fees;
};

struct AutoloopParams {
    double low = 0.3;
    double high = 0.7;
    void validate() const;
};

struct LoopmaxParams {
    Minutes safety_margin = 0.0;  // minutes of estimated traffic kept on each side
    void validate() const;
};

SwapDecision decide_none(const PolicyContext& ctx);

// Threshold policy: refill to the midpoint of [low, high] when the local
// balance leaves the band.
SwapDecision decide_autoloop(const PolicyContext& ctx, const AutoloopParams& params);

// Demand-aware policy: acts only when the channel is expected to deplete or
// saturate before the next decision can take effect, and then moves as much
// as possible.
SwapDecision decide_loopmax(const PolicyContext& ctx, const LoopmaxParams& params);

// ---------------------------------------------------------------------------
// Learned-policy environment side

// Agent action in [-1, 1]^2: negative values request swap-outs, positive
// swap-ins, as a fraction of the largest amount currently allowed.
struct RawAction {
    double l = 0.0;
    double r = 0.0;

    double operator[](Side s) const { return s == Side::L ? l : r; }
    bool operator==(const RawAction&) const = default;
};

bool in_range(const RawAction& a);

struct ActionBounds {
    Currency lower = 0.0;  // -(largest swap-out)
    Currency upper = 0.0;  // largest swap-in
};

// Per-channel [-local, min{future remote, phi^-1(on-chain), capacity}]. Each
// side may use the full on-chain balance.
PerSide<ActionBounds> action_bounds(const PolicyContext& ctx);

inline constexpr double kDefaultMinSwapFraction = 0.2;

// Maps a raw action to requested swaps. Amounts that are too small relative
// to the channel capacity become no-ops (>= for swap-outs, > for swap-ins).
// Throws std::invalid_argument for coordinates outside [-1, 1].
SwapDecision process_raw_action(const RawAction& raw, const PolicyContext& ctx,
                                double min_swap_fraction = kDefaultMinSwapFraction);

// Fortune change minus lost fees minus a penalty per failed swap.
Currency compute_reward(const StepLedger& ledger, Currency penalty);

// ---------------------------------------------------------------------------

class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string_view name() const = 0;
    virtual SwapDecision decide(const PolicyContext& ctx) = 0;
};

class NonePolicy final : public Policy {
public:
    std::string_view name() const override { return "none"; }
    SwapDecision decide(const PolicyContext& ctx) override { return decide_none(ctx); }
};

class AutoloopPolicy final : public Policy {
public:
    explicit AutoloopPolicy(AutoloopParams params);
    std::string_view name() const override { return "autoloop"; }
    SwapDecision decide(const PolicyContext& ctx) override { return decide_autoloop(ctx, params_); }

private:
    AutoloopParams params_;
};

class LoopmaxPolicy final : public Policy {
public:
    explicit LoopmaxPolicy(LoopmaxParams params);
    std::string_view name() const override { return "loopmax"; }
    SwapDecision decide(const PolicyContext& ctx) override { return decide_loopmax(ctx, params_); }

private:
    LoopmaxParams params_;
};

// Drives decisions from raw actions produced by a callback (an external
// agent, a recorded log, a test script).
class RawActionPolicy final : public Policy {
public:
    using Source = std::function<RawAction(const PolicyContext&)>;

    RawActionPolicy(Source source, double min_swap_fraction = kDefaultMinSwapFraction);
    std::string_view name() const override { return "rebel"; }
    SwapDecision decide(const PolicyContext& ctx) override;

private:
    Source source_;
    double min_swap_fraction_;
};

}  // namespace rebal
