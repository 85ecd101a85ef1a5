// Experiment configuration, seed replications, parameter sweeps and the
// fixed analytic helpers (fee thresholds, symmetric depletion scenario).
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rebal/engine.hpp"
#include "rebal/policies.hpp"
#include "rebal/trace.hpp"

namespace rebal {

// Invalid configuration. `path()` is the dotted location of the bad field
// ("" for the document root).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& message);
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

struct PolicyConfig {
    std::string name = "none";  // none | autoloop | loopmax | rebel
    AutoloopParams autoloop;
    LoopmaxParams loopmax;
};

struct RebelConfig {
    double min_swap_fraction = kDefaultMinSwapFraction;
    Currency onchain_norm = 60.0;
    Currency failed_swap_penalty = 0.0;
    std::optional<std::uint64_t> episode_steps;  // unset: one episode per horizon
};

struct ExperimentConfig {
    NodeState initial;
    FeeSchedule fees;
    SimClockConfig clock;
    PerDirection<ArrivalProcess> arrivals;
    std::optional<Minutes> estimator_window;
    PolicyConfig policy;
    RebelConfig rebel;
    std::vector<std::uint64_t> seeds{0};
    std::filesystem::path output_dir = "out";

    // Document the config was parsed from, with defaults filled in.
    nlohmann::json source;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

// The setup of one replication.
SimulationSetup make_setup(const ExperimentConfig& config, std::uint64_t seed);

// Heuristic policies only; "rebel" needs an agent and is rejected here.
std::unique_ptr<Policy> make_policy(const PolicyConfig& config);

struct Stats {
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
};
Stats summarize(const std::vector<double>& values);

struct SeedRun {
    std::uint64_t seed = 0;
    Currency initial_fortune = 0.0;
    Currency final_fortune = 0.0;
    Currency relay_fees = 0.0;
    Currency lost_fees = 0.0;
    Currency swap_fees = 0.0;
    std::uint64_t failed_swaps = 0;
    std::uint64_t steps = 0;
    std::optional<std::filesystem::path> trace_file;
};

struct ExperimentResult {
    std::string policy;
    std::vector<SeedRun> runs;  // in seed order
    Stats final_fortune;
};

struct RunOptions {
    bool write_files = true;   // trace_seed<N>.csv + summary.json under output_dir
    unsigned threads = 0;      // 0: hardware concurrency
};

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

nlohmann::json summary_json(const ExperimentResult& result);

// Dotted-path override ("fees.relay_prop"). The path must name a config
// field; throws ConfigError otherwise or when the new value is invalid.
ExperimentConfig with_override(const ExperimentConfig& config, const std::string& path,
                               const nlohmann::json& value);

struct SweepRow {
    std::string policy;
    nlohmann::json value;
    Stats final_fortune;
};

// One experiment per (policy, value). Empty `policies` means the configured
// one. Per-point files go to <output_dir>/<policy>/<parameter>=<value>/.
std::vector<SweepRow> sweep(const ExperimentConfig& config, const std::string& parameter,
                            const std::vector<nlohmann::json>& values,
                            const std::vector<std::string>& policies = {},
                            const RunOptions& options = {});

void write_sweep_csv(std::ostream& os, const std::string& parameter,
                     const std::vector<SweepRow>& rows);

// Smallest amounts above which a swap can pay for itself through relay
// fees; nullopt when no amount can.
struct ProfitabilityThresholds {
    std::optional<Currency> swap_in;
    std::optional<Currency> swap_out;
};
ProfitabilityThresholds profitability_thresholds(const FeeSchedule& fees);

// Two channels of capacity 40 with 20 on each side, relay fee f_prop * amount,
// no rebalancing, transactions of 20 alternating L->R / R->L.
struct DepletionScenario {
    enum class Pattern : std::uint8_t { Alternating, LtoROnly, RtoLOnly };
    Pattern pattern = Pattern::Alternating;
    double relay_prop = 0.5;
    std::uint64_t transactions = 100;
};

struct DepletionResult {
    std::vector<bool> outcomes;  // in arrival order
    std::uint64_t successes = 0;
    // Index of the first transaction from which every later one fails.
    std::optional<std::uint64_t> stuck_from;
    MetricsTrace trace;
};

DepletionResult scenario_appendix_a(const DepletionScenario& scenario = {});

}  // namespace rebal
