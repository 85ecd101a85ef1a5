#include "rebal/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace rebal {

std::string format_number(double x) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc()) throw std::runtime_error("number formatting failed");
    return std::string(buf, end);
}

namespace {

double parse_double(const std::string& s) {
    double v = 0.0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size())
        throw std::runtime_error("bad number '" + s + "'");
    return v;
}

std::uint64_t parse_count(const std::string& s) {
    std::uint64_t v = 0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size())
        throw std::runtime_error("bad count '" + s + "'");
    return v;
}

struct Column {
    std::string name;
    std::function<std::string(const TraceRow&)> get;
    std::function<void(TraceRow&, const std::string&)> set;
};

#define REBAL_NUM(field)                                                       \
    Column {                                                                   \
        #field, [](const TraceRow& r) { return format_number(r.field); },      \
            [](TraceRow& r, const std::string& v) { r.field = parse_double(v); } \
    }
#define REBAL_COUNT(field)                                                    \
    Column {                                                                  \
        #field, [](const TraceRow& r) { return std::to_string(r.field); },    \
            [](TraceRow& r, const std::string& v) { r.field = parse_count(v); } \
    }
#define REBAL_TEXT(name, field)                                 \
    Column {                                                    \
        name, [](const TraceRow& r) { return r.field; },        \
            [](TraceRow& r, const std::string& v) { r.field = v; } \
    }
#define REBAL_NUM_AS(name, field)                                              \
    Column {                                                                   \
        name, [](const TraceRow& r) { return format_number(r.field); },        \
            [](TraceRow& r, const std::string& v) { r.field = parse_double(v); } \
    }

const std::vector<Column>& columns() {
    static const std::vector<Column> cols = {
        REBAL_COUNT(step),
        REBAL_NUM(t_start),
        REBAL_NUM(t_end),
        REBAL_NUM(cap_l),
        REBAL_NUM(cap_r),
        REBAL_NUM(b_ln),
        REBAL_NUM(b_nl),
        REBAL_NUM(b_nr),
        REBAL_NUM(b_rn),
        REBAL_NUM(onchain),
        REBAL_NUM(onchain_locked),
        REBAL_NUM(lock_l),
        REBAL_NUM(lock_r),
        REBAL_NUM(fortune_before),
        REBAL_NUM(fortune_after),
        REBAL_NUM(relay_fees),
        REBAL_NUM(lost_fees),
        REBAL_NUM(swap_fees),
        REBAL_NUM(arriving_fees),
        REBAL_COUNT(failed_swaps),
        REBAL_NUM(cum_relay_fees),
        REBAL_NUM(cum_lost_fees),
        REBAL_NUM(cum_swap_fees),
        REBAL_COUNT(cum_failed_swaps),
        REBAL_TEXT("swap_l_kind", swap_l.kind),
        REBAL_NUM_AS("swap_l_amount", swap_l.amount),
        REBAL_TEXT("swap_l_outcome", swap_l.outcome),
        REBAL_TEXT("swap_r_kind", swap_r.kind),
        REBAL_NUM_AS("swap_r_amount", swap_r.amount),
        REBAL_TEXT("swap_r_outcome", swap_r.outcome),
        REBAL_COUNT(downgrades),
        REBAL_NUM(net_ln),
        REBAL_NUM(net_rn),
        REBAL_NUM(succ_lr),
        REBAL_NUM(succ_rl),
        REBAL_NUM(bhat_ln),
        REBAL_NUM(bhat_rn),
        REBAL_NUM(reward),
    };
    return cols;
}

#undef REBAL_NUM
#undef REBAL_COUNT
#undef REBAL_TEXT
#undef REBAL_NUM_AS

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool close_enough(double a, double b, double rel_tol) {
    return std::abs(a - b) <= rel_tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

const std::vector<std::string>& trace_columns() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& c : columns()) n.push_back(c.name);
        return n;
    }();
    return names;
}

void write_trace_csv(std::ostream& os, const MetricsTrace& trace) {
    const auto& cols = columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i].name;
    os << '\n';
    for (const TraceRow& row : trace.rows) {
        for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i].get(row);
        os << '\n';
    }
}

std::string trace_to_csv(const MetricsTrace& trace) {
    std::ostringstream os;
    write_trace_csv(os, trace);
    return os.str();
}

MetricsTrace read_trace_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty trace file");
    const auto header = split(line);
    if (header != trace_columns()) throw std::runtime_error("unexpected trace header");

    MetricsTrace trace;
    const auto& cols = columns();
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != cols.size())
            throw std::runtime_error("line " + std::to_string(lineno) + ": wrong column count");
        TraceRow row;
        try {
            for (std::size_t i = 0; i < cols.size(); ++i) cols[i].set(row, cells[i]);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("line " + std::to_string(lineno) + ": " + e.what());
        }
        trace.rows.push_back(std::move(row));
    }
    if (!trace.rows.empty()) trace.initial_fortune = trace.rows.front().fortune_before;
    return trace;
}

std::vector<std::string> validate_trace(const MetricsTrace& trace, double rel_tol) {
    std::vector<std::string> issues;
    auto report = [&](const TraceRow& r, const std::string& what) {
        issues.push_back("step " + std::to_string(r.step) + ": " + what);
    };

    const TraceRow* prev = nullptr;
    for (const TraceRow& r : trace.rows) {
        if (!close_enough(r.b_ln + r.b_nl + r.lock_l, r.cap_l, rel_tol))
            report(r, "channel L balances do not sum to capacity");
        if (!close_enough(r.b_nr + r.b_rn + r.lock_r, r.cap_r, rel_tol))
            report(r, "channel R balances do not sum to capacity");
        for (double v : {r.b_ln, r.b_nl, r.b_nr, r.b_rn, r.onchain, r.onchain_locked})
            if (v < 0.0) report(r, "negative balance");

        const double fortune = r.b_nl + r.b_nr + r.onchain + r.onchain_locked + r.lock_l + r.lock_r;
        if (!close_enough(fortune, r.fortune_after, rel_tol))
            report(r, "fortune column does not match balances");

        const double scale = std::max({1.0, std::abs(r.fortune_before), std::abs(r.fortune_after)});
        const double gap = (r.fortune_after - r.fortune_before) + r.lost_fees + r.swap_fees -
                           r.arriving_fees;
        if (std::abs(gap) > rel_tol * scale) report(r, "fortune change plus fee cost != arriving fees");
        if (!close_enough(r.arriving_fees, r.relay_fees + r.lost_fees, rel_tol))
            report(r, "arriving fees != earned + lost");

        if (prev) {
            if (r.step != prev->step + 1) report(r, "step numbers not consecutive");
            if (r.fortune_before != prev->fortune_after) report(r, "fortune not continuous");
            if (r.cum_relay_fees < prev->cum_relay_fees || r.cum_lost_fees < prev->cum_lost_fees ||
                r.cum_swap_fees < prev->cum_swap_fees || r.cum_failed_swaps < prev->cum_failed_swaps)
                report(r, "cumulative column decreased");
        }
        prev = &r;
    }
    return issues;
}

}  // namespace rebal
