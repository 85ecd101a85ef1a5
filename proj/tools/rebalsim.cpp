// rebalsim: command-line front end for the relay-node simulator.
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rebal/bridge.hpp"
#include "rebal/experiment.hpp"
#include "rebal/trace.hpp"
#include "rebal/transport.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rebal;

namespace {

constexpr int kExitFailure = 1;  // invariant or validation failure
constexpr int kExitUsage = 2;    // bad config or arguments

std::uint64_t parse_u64(const std::string& text) {
    std::uint64_t v = 0;
    const auto* end = text.data() + text.size();
    auto [p, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || p != end) throw CLI::ValidationError("seed", "not an integer: " + text);
    return v;
}

// "7" or "3..9" (inclusive).
std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
    const auto dots = spec.find("..");
    if (dots == std::string::npos) return {parse_u64(spec)};
    const std::uint64_t lo = parse_u64(spec.substr(0, dots));
    const std::uint64_t hi = parse_u64(spec.substr(dots + 2));
    if (hi < lo) throw CLI::ValidationError("--seeds", "empty range " + spec);
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, sep);)
        if (!item.empty()) out.push_back(item);
    return out;
}

struct Common {
    std::string config;
    std::string seeds;
    std::string out;
    std::string policy;
    unsigned threads = 0;

    void add(CLI::App* cmd, bool config_required = true) {
        auto* c = cmd->add_option("--config", config, "experiment config (JSON)");
        if (config_required) c->required();
        c->check(CLI::ExistingFile);
        cmd->add_option("--seed,--seeds", seeds, "seed N or inclusive range N..M");
        cmd->add_option("--out", out, "output directory (overrides output_dir)");
        cmd->add_option("--policy", policy, "policy override: none|autoloop|loopmax|rebel");
        cmd->add_option("--threads", threads, "parallel replications (0: all cores)");
    }

    ExperimentConfig load() const {
        ExperimentConfig c = load_config(config);
        json doc = c.source;
        if (!seeds.empty()) doc["seeds"] = parse_seeds(seeds);
        if (!out.empty()) doc["output_dir"] = out;
        if (!policy.empty()) doc["policy"]["name"] = policy;
        return parse_config(doc);
    }
};

void print_summary(const ExperimentResult& r) {
    std::cout << "policy " << r.policy << ", " << r.runs.size() << " seed(s)\n";
    for (const auto& run : r.runs) {
        std::cout << "  seed " << run.seed << ": final fortune " << format_number(run.final_fortune)
                  << ", relay fees " << format_number(run.relay_fees) << ", lost fees "
                  << format_number(run.lost_fees) << ", swap fees "
                  << format_number(run.swap_fees) << ", failed swaps " << run.failed_swaps << '\n';
    }
    std::cout << "final fortune mean " << format_number(r.final_fortune.mean) << " min "
              << format_number(r.final_fortune.min) << " max "
              << format_number(r.final_fortune.max) << '\n';
}

int cmd_run(const Common& common) {
    const ExperimentConfig config = common.load();
    const ExperimentResult r = run_experiment(config, {true, common.threads});
    print_summary(r);
    std::cout << "wrote " << config.output_dir.string() << "/summary.json\n";
    return 0;
}

int cmd_sweep(const Common& common, const std::string& param, const std::string& values,
              const std::string& policies) {
    const ExperimentConfig config = common.load();
    std::vector<json> grid;
    for (const auto& v : split(values, ',')) {
        try {
            grid.push_back(json::parse(v));
        } catch (const json::parse_error&) {
            grid.emplace_back(v);  // bare strings
        }
    }
    const auto rows = sweep(config, param, grid, split(policies, ','), {true, common.threads});
    fs::create_directories(config.output_dir);
    std::ofstream csv(config.output_dir / "sweep.csv");
    write_sweep_csv(csv, param, rows);
    write_sweep_csv(std::cout, param, rows);
    return 0;
}

int cmd_validate(const std::vector<std::string>& files, double tol) {
    int bad = 0;
    for (const auto& f : files) {
        std::ifstream in(f);
        if (!in) {
            std::cerr << f << ": cannot open\n";
            ++bad;
            continue;
        }
        MetricsTrace trace;
        try {
            trace = read_trace_csv(in);
        } catch (const std::exception& e) {
            std::cerr << f << ": " << e.what() << '\n';
            ++bad;
            continue;
        }
        const auto issues = validate_trace(trace, tol);
        for (const auto& issue : issues) std::cerr << f << ": " << issue << '\n';
        std::cout << f << ": " << trace.rows.size() << " rows, "
                  << (issues.empty() ? "ok" : std::to_string(issues.size()) + " issue(s)") << '\n';
        if (!issues.empty()) ++bad;
    }
    return bad == 0 ? 0 : kExitFailure;
}

int cmd_thresholds(const std::string& config_path, std::optional<double> relay_prop,
                   std::optional<double> swap_prop, std::optional<double> swap_fixed) {
    FeeSchedule fees{0.0, 0.01, 0.005, 2.0};
    if (!config_path.empty()) fees = load_config(config_path).fees;
    if (relay_prop) fees.relay_prop = *relay_prop;
    if (swap_prop) fees.swap_prop = *swap_prop;
    if (swap_fixed) fees.swap_fixed = *swap_fixed;
    fees.validate();
    const auto t = profitability_thresholds(fees);
    auto show = [](const std::optional<Currency>& v) {
        return v ? json(*v) : json("infeasible");
    };
    std::cout << json{{"relay_prop", fees.relay_prop},
                      {"swap_prop", fees.swap_prop},
                      {"swap_fixed", fees.swap_fixed},
                      {"swap_in", show(t.swap_in)},
                      {"swap_out", show(t.swap_out)}}
                     .dump(2)
              << '\n';
    return 0;
}

int cmd_appendix_a(double relay_prop, std::uint64_t n, const std::string& pattern,
                   const std::string& out) {
    DepletionScenario s;
    s.relay_prop = relay_prop;
    s.transactions = n;
    if (pattern == "alternating") s.pattern = DepletionScenario::Pattern::Alternating;
    else if (pattern == "ltor") s.pattern = DepletionScenario::Pattern::LtoROnly;
    else if (pattern == "rtol") s.pattern = DepletionScenario::Pattern::RtoLOnly;
    else throw CLI::ValidationError("--pattern", "expected alternating, ltor or rtol");

    const DepletionResult r = scenario_appendix_a(s);
    std::string marks;
    for (std::size_t i = 0; i < r.outcomes.size() && i < 40; ++i) marks += r.outcomes[i] ? '+' : '.';
    std::cout << "transactions " << r.outcomes.size() << ", succeeded " << r.successes << '\n'
              << "outcomes " << marks << (r.outcomes.size() > 40 ? "..." : "") << '\n'
              << "stuck from "
              << (r.stuck_from ? "transaction " + std::to_string(*r.stuck_from) : "never") << '\n';
    if (!out.empty()) {
        fs::create_directories(out);
        std::ofstream csv(fs::path(out) / "appendix_a.csv");
        write_trace_csv(csv, r.trace);
    }
    return 0;
}

int cmd_serve(const Common& common, const std::string& agent_cmd, const std::string& socket,
              const std::string& transcript_path, int timeout_ms) {
    if (agent_cmd.empty() == socket.empty())
        throw CLI::ValidationError("serve-agent", "give exactly one of --agent-cmd, --agent-socket");
    const ExperimentConfig config = common.load();
    fs::create_directories(config.output_dir);

    std::ofstream transcript;
    BridgeOptions options;
    options.min_swap_fraction = config.rebel.min_swap_fraction;
    options.onchain_norm = config.rebel.onchain_norm;
    options.episode_steps = config.rebel.episode_steps;
    options.act_timeout = std::chrono::milliseconds(timeout_ms);
    if (!transcript_path.empty()) {
        transcript.open(transcript_path);
        options.transcript = &transcript;
    }

    std::unique_ptr<Transport> transport;
    ProcessTransport* process = nullptr;
    if (!agent_cmd.empty()) {
        auto p = std::make_unique<ProcessTransport>(agent_cmd);
        process = p.get();
        transport = std::move(p);
    } else {
        transport = std::make_unique<UnixSocketTransport>(socket, options.act_timeout);
    }

    std::size_t k = 0;
    auto sink = [&](const Episode& ep) {
        const std::string stem = "episode" + std::to_string(k++) + "_seed" + std::to_string(ep.seed);
        std::ofstream csv(config.output_dir / (stem + ".csv"), std::ios::binary);
        write_trace_csv(csv, ep.trace);
        std::ofstream log(config.output_dir / (stem + ".actions.jsonl"));
        write_action_log(log, ep.log);
        std::cout << stem << ": " << ep.trace.rows.size() << " steps, final fortune "
                  << format_number(ep.trace.final_fortune()) << '\n';
    };
    const std::size_t n = serve_session(
        config.source, [&](std::uint64_t seed) { return make_setup(config, seed); }, config.seeds,
        *transport, options, sink);
    if (process) process->finish();
    std::cout << n << " episode(s) served\n";
    return 0;
}

int cmd_replay(const Common& common, const std::string& log_path, const std::string& out_csv) {
    const ExperimentConfig config = common.load();
    std::ifstream in(log_path);
    if (!in) throw std::runtime_error("cannot open " + log_path);
    const ActionLog log = read_action_log(in);
    BridgeOptions options;
    options.min_swap_fraction = config.rebel.min_swap_fraction;
    options.onchain_norm = config.rebel.onchain_norm;
    options.episode_steps = config.rebel.episode_steps;
    const MetricsTrace trace = replay_policy(log, make_setup(config, log.seed), options);
    if (out_csv.empty()) {
        write_trace_csv(std::cout, trace);
    } else {
        std::ofstream csv(out_csv, std::ios::binary);
        write_trace_csv(csv, trace);
        std::cout << "replayed " << trace.rows.size() << " steps, final fortune "
                  << format_number(trace.final_fortune()) << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-channel relay node rebalancing simulator"};
    app.require_subcommand(1);

    Common run_opts;
    auto* run = app.add_subcommand("run", "run one policy over the configured seeds");
    run_opts.add(run);

    Common sweep_opts;
    std::string param, values, policies;
    auto* sw = app.add_subcommand("sweep", "run a grid over one config field");
    sweep_opts.add(sw);
    sw->add_option("--param", param, "dotted config path, e.g. fees.relay_prop")->required();
    sw->add_option("--values", values, "comma-separated values")->required();
    sw->add_option("--policies", policies, "comma-separated policies (default: configured)");

    std::vector<std::string> trace_files;
    double tol = kRelativeTolerance;
    auto* val = app.add_subcommand("validate-trace", "check conservation and fee identities");
    val->add_option("files", trace_files, "trace CSV files")->required()->check(CLI::ExistingFile);
    val->add_option("--tolerance", tol, "relative tolerance");

    std::string th_config;
    std::optional<double> th_f, th_F, th_M;
    auto* th = app.add_subcommand("thresholds", "swap amounts that can pay for themselves");
    th->add_option("--config", th_config, "take fees from a config")->check(CLI::ExistingFile);
    th->add_option("--relay-prop", th_f, "f_prop");
    th->add_option("--swap-prop", th_F, "F");
    th->add_option("--swap-fixed", th_M, "M");

    double aa_f = 0.5;
    std::uint64_t aa_n = 100;
    std::string aa_pattern = "alternating", aa_out;
    auto* aa = app.add_subcommand("scenario-appendix-a", "symmetric depletion scenario");
    aa->add_option("--relay-prop", aa_f, "relay fee proportion");
    aa->add_option("--transactions", aa_n, "number of transactions");
    aa->add_option("--pattern", aa_pattern, "alternating | ltor | rtol");
    aa->add_option("--out", aa_out, "write appendix_a.csv here");

    Common serve_opts;
    std::string agent_cmd, agent_socket, transcript;
    int timeout_ms = 60000;
    auto* serve = app.add_subcommand("serve-agent", "drive an external agent over the JSON protocol");
    serve_opts.add(serve);
    serve->add_option("--agent-cmd", agent_cmd, "spawn this shell command as the agent");
    serve->add_option("--agent-socket", agent_socket, "wait for the agent on a Unix socket");
    serve->add_option("--transcript", transcript, "log every protocol line");
    serve->add_option("--act-timeout-ms", timeout_ms, "per-message timeout");

    Common replay_opts;
    std::string log_path, replay_out;
    auto* rp = app.add_subcommand("replay", "re-run a recorded agent episode");
    replay_opts.add(rp);
    rp->add_option("--log", log_path, "actions .jsonl from serve-agent")->required();
    rp->add_option("--csv", replay_out, "trace output (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(run_opts);
        if (*sw) return cmd_sweep(sweep_opts, param, values, policies);
        if (*val) return cmd_validate(trace_files, tol);
        if (*th) return cmd_thresholds(th_config, th_f, th_F, th_M);
        if (*aa) return cmd_appendix_a(aa_f, aa_n, aa_pattern, aa_out);
        if (*serve) return cmd_serve(serve_opts, agent_cmd, agent_socket, transcript, timeout_ms);
        if (*rp) return cmd_replay(replay_opts, log_path, replay_out);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InvariantViolation& e) {
        std::cerr << "invariant violated: " << e.what() << '\n';
        return kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return 0;
}
