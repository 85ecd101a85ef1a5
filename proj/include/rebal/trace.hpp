// Per-step metrics of a run and their CSV form.
//
// Row i describes control step i, the interval (t_i, t_{i+1}]: the decision
// taken at t_i with the demand estimates it saw, the swaps' outcomes, the
// step's ledger, and balances as of t_{i+1}.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rebal/model.hpp"

namespace rebal {

struct SwapRecord {
    std::string kind = "none";    // none | in | out
    Currency amount = 0.0;
    std::string outcome = "none";  // none | ok | refunded

    bool operator==(const SwapRecord&) const = default;
};

struct TraceRow {
    std::uint64_t step = 0;
    Minutes t_start = 0.0;
    Minutes t_end = 0.0;

    Currency cap_l = 0.0;
    Currency cap_r = 0.0;
    Currency b_ln = 0.0;
    Currency b_nl = 0.0;
    Currency b_nr = 0.0;
    Currency b_rn = 0.0;
    Currency onchain = 0.0;
    Currency onchain_locked = 0.0;
    Currency lock_l = 0.0;
    Currency lock_r = 0.0;

    Currency fortune_before = 0.0;
    Currency fortune_after = 0.0;
    Currency relay_fees = 0.0;
    Currency lost_fees = 0.0;
    Currency swap_fees = 0.0;
    Currency arriving_fees = 0.0;
    std::uint64_t failed_swaps = 0;

    Currency cum_relay_fees = 0.0;
    Currency cum_lost_fees = 0.0;
    Currency cum_swap_fees = 0.0;
    std::uint64_t cum_failed_swaps = 0;

    SwapRecord swap_l;
    SwapRecord swap_r;
    std::uint64_t downgrades = 0;

    double net_ln = 0.0;
    double net_rn = 0.0;
    double succ_lr = 0.0;
    double succ_rl = 0.0;
    Currency bhat_ln = 0.0;
    Currency bhat_rn = 0.0;

    double reward = 0.0;

    bool operator==(const TraceRow&) const = default;
};

struct MetricsTrace {
    Currency initial_fortune = 0.0;
    std::vector<TraceRow> rows;

    Currency final_fortune() const {
        return rows.empty() ? initial_fortune : rows.back().fortune_after;
    }
};

const std::vector<std::string>& trace_columns();

void write_trace_csv(std::ostream& os, const MetricsTrace& trace);
std::string trace_to_csv(const MetricsTrace& trace);

// Throws std::runtime_error on a malformed file.
MetricsTrace read_trace_csv(std::istream& is);

// Post-hoc checks of a trace: capacity conservation, the fortune/fee
// identity per step, monotone cumulative columns and continuity between
// rows. Returns one message per problem found.
std::vector<std::string> validate_trace(const MetricsTrace& trace,
                                        double rel_tol = kRelativeTolerance);

// Shortest decimal text that parses back to the same double.
std::string format_number(double x);

}  // namespace rebal
