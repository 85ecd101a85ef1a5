#include "rebal/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <initializer_list>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

namespace rebal {

using nlohmann::json;

ConfigError::ConfigError(std::string path, const std::string& message)
    : std::runtime_error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

namespace {

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

void allow_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) throw ConfigError(path, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
            throw ConfigError(join(path, it.key()), "unknown field");
    }
}

const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double number(const json& obj, const std::string& path, const char* key,
              std::optional<double> fallback = std::nullopt) {
    const json* v = find(obj, key);
    if (!v) {
        if (fallback) return *fallback;
        throw ConfigError(join(path, key), "required");
    }
    if (!v->is_number()) throw ConfigError(join(path, key), "expected a number");
    return v->get<double>();
}

std::optional<double> optional_number(const json& obj, const std::string& path, const char* key) {
    const json* v = find(obj, key);
    if (!v) return std::nullopt;
    if (!v->is_number()) throw ConfigError(join(path, key), "expected a number");
    return v->get<double>();
}

// Integers built in code arrive signed; parsed ones unsigned.
bool is_count(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

std::optional<std::uint64_t> optional_count(const json& obj, const std::string& path,
                                            const char* key) {
    const json* v = find(obj, key);
    if (!v) return std::nullopt;
    if (!is_count(*v)) throw ConfigError(join(path, key), "expected a non-negative integer");
    return v->get<std::uint64_t>();
}

const json& object(const json& obj, const std::string& path, const char* key) {
    static const json empty = json::object();
    const json* v = find(obj, key);
    if (!v) return empty;
    if (!v->is_object()) throw ConfigError(join(path, key), "expected an object");
    return *v;
}

void require(bool ok, const std::string& path, const std::string& message) {
    if (!ok) throw ConfigError(path, message);
}

ChannelState parse_channel(const json& j, const std::string& path) {
    allow_keys(j, path, {"capacity", "local", "remote"});
    ChannelState c;
    c.capacity = number(j, path, "capacity", 1000.0);
    require(c.capacity > 0.0, join(path, "capacity"), "must be > 0");
    c.local = number(j, path, "local", c.capacity / 2.0);
    c.remote = number(j, path, "remote", c.capacity - c.local);
    require(c.local >= 0.0, join(path, "local"), "must be >= 0");
    require(c.remote >= 0.0, join(path, "remote"), "must be >= 0");
    require(std::abs(c.local + c.remote - c.capacity) <= kRelativeTolerance * c.capacity, path,
            "local + remote must equal capacity");
    return c;
}

AmountDistribution parse_amount(const json& j, const std::string& path) {
    const std::string dist = j.value("dist", std::string("gaussian"));
    if (dist == "gaussian") {
        allow_keys(j, path, {"dist", "mean", "std"});
        auto a = AmountDistribution::gaussian(number(j, path, "mean", 25.0),
                                              number(j, path, "std", 20.0));
        require(a.b > 0.0, join(path, "std"), "must be > 0");
        return a;
    }
    if (dist == "uniform") {
        allow_keys(j, path, {"dist", "lo", "hi"});
        auto a = AmountDistribution::uniform(number(j, path, "lo"), number(j, path, "hi"));
        require(a.a < a.b && a.b > 0.0, path, "need lo < hi and hi > 0");
        return a;
    }
    if (dist == "constant") {
        allow_keys(j, path, {"dist", "value"});
        auto a = AmountDistribution::constant(number(j, path, "value"));
        require(a.a > 0.0, join(path, "value"), "must be > 0");
        return a;
    }
    throw ConfigError(join(path, "dist"), "unknown distribution '" + dist + "'");
}

ArrivalProcess parse_arrivals(const json& j, const std::string& path) {
    allow_keys(j, path, {"timing", "rate", "period", "offset", "amount", "count"});
    ArrivalProcess p;
    const std::string timing = j.value("timing", std::string("poisson"));
    if (timing == "poisson") {
        require(!find(j, "period") && !find(j, "offset"), path, "period/offset need timing=periodic");
        p.rate = number(j, path, "rate", 0.0);
        require(p.rate >= 0.0, join(path, "rate"), "must be >= 0");
    } else if (timing == "periodic") {
        p.timing = ArrivalProcess::Timing::Periodic;
        require(!find(j, "rate"), join(path, "rate"), "not used with timing=periodic");
        p.period = number(j, path, "period");
        p.offset = number(j, path, "offset", p.period);
        require(p.period > 0.0, join(path, "period"), "must be > 0");
        require(p.offset >= 0.0, join(path, "offset"), "must be >= 0");
    } else {
        throw ConfigError(join(path, "timing"), "expected poisson or periodic");
    }
    p.amount = parse_amount(object(j, path, "amount"), join(path, "amount"));
    p.count_limit = optional_count(j, path, "count");
    return p;
}

json amount_json(const AmountDistribution& a) {
    switch (a.kind) {
        case AmountDistribution::Kind::Gaussian:
            return {{"dist", "gaussian"}, {"mean", a.a}, {"std", a.b}};
        case AmountDistribution::Kind::Uniform:
            return {{"dist", "uniform"}, {"lo", a.a}, {"hi", a.b}};
        case AmountDistribution::Kind::Constant:
            return {{"dist", "constant"}, {"value", a.a}};
    }
    return {};
}

json arrivals_json(const ArrivalProcess& p) {
    json j;
    if (p.timing == ArrivalProcess::Timing::Poisson) {
        j["timing"] = "poisson";
        j["rate"] = p.rate;
    } else {
        j["timing"] = "periodic";
        j["period"] = p.period;
        j["offset"] = p.offset;
    }
    j["amount"] = amount_json(p.amount);
    j["count"] = p.count_limit ? json(*p.count_limit) : json(nullptr);
    return j;
}

template <typename T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

json channel_json(const ChannelState& c) {
    return {{"capacity", c.capacity}, {"local", c.local}, {"remote", c.remote}};
}

json normalized(const ExperimentConfig& c) {
    return {
        {"channels",
         {{"L", channel_json(c.initial.channels[Side::L])},
          {"R", channel_json(c.initial.channels[Side::R])}}},
        {"onchain", c.initial.onchain},
        {"fees",
         {{"relay_base", c.fees.relay_base},
          {"relay_prop", c.fees.relay_prop},
          {"swap_prop", c.fees.swap_prop},
          {"swap_fixed", c.fees.swap_fixed}}},
        {"clock",
         {{"check_period", c.clock.check_period},
          {"confirmation_time", c.clock.confirmation_time}}},
        {"horizon", {{"max_time", optional_json(c.clock.max_time)}}},
        {"arrivals",
         {{"LtoR", arrivals_json(c.arrivals[Direction::LtoR])},
          {"RtoL", arrivals_json(c.arrivals[Direction::RtoL])}}},
        {"estimator_window", optional_json(c.estimator_window)},
        {"policy",
         {{"name", c.policy.name},
          {"low", c.policy.autoloop.low},
          {"high", c.policy.autoloop.high},
          {"safety_margin", c.policy.loopmax.safety_margin}}},
        {"rebel",
         {{"min_swap_fraction", c.rebel.min_swap_fraction},
          {"onchain_norm", c.rebel.onchain_norm},
          {"failed_swap_penalty", c.rebel.failed_swap_penalty},
          {"episode_steps", optional_json(c.rebel.episode_steps)}}},
        {"seeds", c.seeds},
        {"output_dir", c.output_dir.string()},
    };
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
    allow_keys(doc, "",
               {"channels", "onchain", "fees", "clock", "horizon", "arrivals", "estimator_window",
                "policy", "rebel", "seeds", "output_dir", "description"});
    ExperimentConfig c;

    const json& channels = object(doc, "", "channels");
    allow_keys(channels, "channels", {"L", "R"});
    const ChannelState l = parse_channel(object(channels, "channels", "L"), "channels.L");
    const ChannelState r = parse_channel(object(channels, "channels", "R"), "channels.R");
    const double onchain = number(doc, "", "onchain", 2.0 * (l.capacity + r.capacity));
    require(onchain >= 0.0, "onchain", "must be >= 0");
    c.initial = make_state(l.capacity, l.local, l.remote, r.capacity, r.local, r.remote, onchain);

    const json& fees = object(doc, "", "fees");
    allow_keys(fees, "fees", {"relay_base", "relay_prop", "swap_prop", "swap_fixed"});
    c.fees.relay_base = number(fees, "fees", "relay_base", 0.0);
    c.fees.relay_prop = number(fees, "fees", "relay_prop", 0.01);
    c.fees.swap_prop = number(fees, "fees", "swap_prop", 0.005);
    c.fees.swap_fixed = number(fees, "fees", "swap_fixed", 2.0);
    require(c.fees.relay_base >= 0.0, "fees.relay_base", "must be >= 0");
    require(c.fees.relay_prop >= 0.0, "fees.relay_prop", "must be >= 0");
    require(c.fees.swap_prop >= 0.0 && c.fees.swap_prop < 1.0, "fees.swap_prop",
            "must be in [0, 1)");
    require(c.fees.swap_fixed >= 0.0, "fees.swap_fixed", "must be >= 0");

    const json& clock = object(doc, "", "clock");
    allow_keys(clock, "clock", {"check_period", "confirmation_time"});
    c.clock.check_period = number(clock, "clock", "check_period", 10.0);
    c.clock.confirmation_time = number(clock, "clock", "confirmation_time", 10.0);
    require(c.clock.check_period > 0.0, "clock.check_period", "must be > 0");
    require(c.clock.confirmation_time > 0.0, "clock.confirmation_time", "must be > 0");
    require(c.clock.check_period >= c.clock.confirmation_time, "clock.check_period",
            "must be >= confirmation_time");

    const json& horizon = object(doc, "", "horizon");
    allow_keys(horizon, "horizon", {"max_time"});
    c.clock.max_time = optional_number(horizon, "horizon", "max_time");
    require(!c.clock.max_time || *c.clock.max_time > 0.0, "horizon.max_time", "must be > 0");

    const json& arrivals = object(doc, "", "arrivals");
    allow_keys(arrivals, "arrivals", {"LtoR", "RtoL"});
    c.arrivals[Direction::LtoR] = parse_arrivals(object(arrivals, "arrivals", "LtoR"), "arrivals.LtoR");
    c.arrivals[Direction::RtoL] = parse_arrivals(object(arrivals, "arrivals", "RtoL"), "arrivals.RtoL");
    if (!c.clock.max_time) {
        for (Direction d : kDirections) {
            const std::string path = std::string("arrivals.") + (d == Direction::LtoR ? "LtoR" : "RtoL");
            require(!c.arrivals[d].active() || c.arrivals[d].count_limit.has_value(),
                    join(path, "count"), "required when horizon.max_time is not set");
        }
    }

    c.estimator_window = optional_number(doc, "", "estimator_window");
    require(!c.estimator_window || *c.estimator_window > 0.0, "estimator_window", "must be > 0");

    const json& policy = object(doc, "", "policy");
    allow_keys(policy, "policy", {"name", "low", "high", "safety_margin"});
    if (const json* name = find(policy, "name")) {
        require(name->is_string(), "policy.name", "expected a string");
        c.policy.name = name->get<std::string>();
    }
    static const std::vector<std::string> known{"none", "autoloop", "loopmax", "rebel"};
    require(std::find(known.begin(), known.end(), c.policy.name) != known.end(), "policy.name",
            "unknown policy '" + c.policy.name + "'");
    c.policy.autoloop.low = number(policy, "policy", "low", 0.3);
    c.policy.autoloop.high = number(policy, "policy", "high", 0.7);
    require(c.policy.autoloop.low >= 0.0, "policy.low", "must be >= 0");
    require(c.policy.autoloop.high <= 1.0, "policy.high", "must be <= 1");
    require(c.policy.autoloop.low < c.policy.autoloop.high, "policy.low", "must be < policy.high");
    c.policy.loopmax.safety_margin = number(policy, "policy", "safety_margin", 2.0);
    require(c.policy.loopmax.safety_margin >= 0.0, "policy.safety_margin", "must be >= 0");

    const json& rebel = object(doc, "", "rebel");
    allow_keys(rebel, "rebel",
               {"min_swap_fraction", "onchain_norm", "failed_swap_penalty", "episode_steps"});
    c.rebel.min_swap_fraction = number(rebel, "rebel", "min_swap_fraction", kDefaultMinSwapFraction);
    c.rebel.onchain_norm = number(rebel, "rebel", "onchain_norm", 60.0);
    c.rebel.failed_swap_penalty = number(rebel, "rebel", "failed_swap_penalty", 0.0);
    require(c.rebel.min_swap_fraction >= 0.0 && c.rebel.min_swap_fraction <= 1.0,
            "rebel.min_swap_fraction", "must be in [0, 1]");
    require(c.rebel.onchain_norm > 0.0, "rebel.onchain_norm", "must be > 0");
    require(c.rebel.failed_swap_penalty >= 0.0, "rebel.failed_swap_penalty", "must be >= 0");
    c.rebel.episode_steps = optional_count(rebel, "rebel", "episode_steps");
    require(!c.rebel.episode_steps || *c.rebel.episode_steps > 0, "rebel.episode_steps",
            "must be > 0");

    if (const json* seeds = find(doc, "seeds")) {
        require(seeds->is_array() && !seeds->empty(), "seeds", "expected a non-empty array");
        c.seeds.clear();
        for (std::size_t i = 0; i < seeds->size(); ++i) {
            require(is_count((*seeds)[i]), "seeds." + std::to_string(i),
                    "expected a non-negative integer");
            c.seeds.push_back((*seeds)[i].get<std::uint64_t>());
        }
    }
    if (const json* out = find(doc, "output_dir")) {
        require(out->is_string(), "output_dir", "expected a string");
        c.output_dir = out->get<std::string>();
    }

    try {
        make_setup(c, c.seeds.front()).validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("", e.what());
    }
    c.source = normalized(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError("", path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

SimulationSetup make_setup(const ExperimentConfig& config, std::uint64_t seed) {
    SimulationSetup s;
    s.initial = config.initial;
    s.fees = config.fees;
    s.clock = config.clock;
    s.arrivals = config.arrivals;
    s.estimator_window = config.estimator_window;
    s.failed_swap_penalty = config.rebel.failed_swap_penalty;
    s.seeds = StreamSeeds::derive(seed);
    return s;
}

std::unique_ptr<Policy> make_policy(const PolicyConfig& config) {
    if (config.name == "none") return std::make_unique<NonePolicy>();
    if (config.name == "autoloop") return std::make_unique<AutoloopPolicy>(config.autoloop);
    if (config.name == "loopmax") return std::make_unique<LoopmaxPolicy>(config.loopmax);
    if (config.name == "rebel")
        throw std::invalid_argument("policy 'rebel' is driven by an external agent (serve-agent)");
    throw std::invalid_argument("unknown policy '" + config.name + "'");
}

Stats summarize(const std::vector<double>& values) {
    Stats s;
    if (values.empty()) return s;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    s.min = *lo;
    s.max = *hi;
    const double sum = std::accumulate(values.begin(), values.end(), 0.0);
    s.mean = std::clamp(sum / static_cast<double>(values.size()), s.min, s.max);
    return s;
}

// ---------------------------------------------------------------------------

namespace {

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

void write_text(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + file.string());
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    make_policy(config.policy);  // reject "rebel" before doing any work

    ExperimentResult result;
    result.policy = config.policy.name;
    result.runs.resize(config.seeds.size());
    if (options.write_files) std::filesystem::create_directories(config.output_dir);

    parallel_for(config.seeds.size(), options.threads, [&](std::size_t i) {
        const std::uint64_t seed = config.seeds[i];
        auto policy = make_policy(config.policy);
        const MetricsTrace trace = run(make_setup(config, seed), *policy);

        SeedRun& r = result.runs[i];
        r.seed = seed;
        r.initial_fortune = trace.initial_fortune;
        r.final_fortune = trace.final_fortune();
        r.steps = trace.rows.size();
        if (!trace.rows.empty()) {
            const TraceRow& last = trace.rows.back();
            r.relay_fees = last.cum_relay_fees;
            r.lost_fees = last.cum_lost_fees;
            r.swap_fees = last.cum_swap_fees;
            r.failed_swaps = last.cum_failed_swaps;
        }
        if (options.write_files) {
            const auto file = config.output_dir / ("trace_seed" + std::to_string(seed) + ".csv");
            write_text(file, trace_to_csv(trace));
            r.trace_file = file;
        }
    });

    std::vector<double> finals;
    for (const auto& r : result.runs) finals.push_back(r.final_fortune);
    result.final_fortune = summarize(finals);

    if (options.write_files) {
        json summary = summary_json(result);
        summary["config"] = config.source;
        write_text(config.output_dir / "summary.json", summary.dump(2) + "\n");
    }
    return result;
}

json summary_json(const ExperimentResult& result) {
    json runs = json::array();
    for (const auto& r : result.runs) {
        json j = {{"seed", r.seed},
                  {"initial_fortune", r.initial_fortune},
                  {"final_fortune", r.final_fortune},
                  {"relay_fees", r.relay_fees},
                  {"lost_fees", r.lost_fees},
                  {"swap_fees", r.swap_fees},
                  {"failed_swaps", r.failed_swaps},
                  {"steps", r.steps}};
        if (r.trace_file) j["trace"] = r.trace_file->filename().string();
        runs.push_back(std::move(j));
    }
    return {{"policy", result.policy},
            {"seeds", result.runs.size()},
            {"final_fortune",
             {{"mean", result.final_fortune.mean},
              {"min", result.final_fortune.min},
              {"max", result.final_fortune.max}}},
            {"runs", std::move(runs)}};
}

namespace {

json& resolve(json& doc, const std::string& path) {
    if (path.empty()) throw ConfigError(path, "empty parameter path");
    json* node = &doc;
    std::string walked;
    for (std::size_t start = 0;;) {
        const std::size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        walked = join(walked, key);
        if (!node->is_object() || !node->contains(key))
            throw ConfigError(walked, "no such config field");
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    if (node->is_object()) throw ConfigError(path, "names a section, not a field");
    return *node;
}

}  // namespace

ExperimentConfig with_override(const ExperimentConfig& config, const std::string& path,
                               const json& value) {
    json doc = config.source;
    resolve(doc, path) = value;
    return parse_config(doc);
}

std::vector<SweepRow> sweep(const ExperimentConfig& config, const std::string& parameter,
                            const std::vector<json>& values,
                            const std::vector<std::string>& policies, const RunOptions& options) {
    json probe = config.source;
    resolve(probe, parameter);  // bad paths fail even for an empty grid

    std::vector<std::string> names = policies;
    if (names.empty()) names.push_back(config.policy.name);

    std::vector<SweepRow> rows;
    for (const auto& name : names) {
        for (const auto& value : values) {
            ExperimentConfig point = with_override(config, parameter, value);
            point.policy.name = name;
            point.output_dir = config.output_dir / name / (parameter + "=" + value.dump());
            const ExperimentResult r = run_experiment(point, options);
            rows.push_back({name, value, r.final_fortune});
        }
    }
    return rows;
}

void write_sweep_csv(std::ostream& os, const std::string& parameter,
                     const std::vector<SweepRow>& rows) {
    os << "policy," << parameter << ",mean_final_fortune,min_final_fortune,max_final_fortune\n";
    for (const auto& r : rows) {
        const std::string v = r.value.is_number() ? format_number(r.value.get<double>())
                                                  : r.value.dump();
        os << r.policy << ',' << v << ',' << format_number(r.final_fortune.mean) << ','
           << format_number(r.final_fortune.min) << ',' << format_number(r.final_fortune.max)
           << '\n';
    }
}

// ---------------------------------------------------------------------------

ProfitabilityThresholds profitability_thresholds(const FeeSchedule& fees) {
    const double f = fees.relay_prop;
    const double F = fees.swap_prop;
    const double M = fees.swap_fixed;
    ProfitabilityThresholds t;
    if (f > F) t.swap_in = M / (f - F);
    if (f * (1.0 + F) > F) t.swap_out = M / (f * (1.0 + F) - F);
    return t;
}

DepletionResult scenario_appendix_a(const DepletionScenario& scenario) {
    using Pattern = DepletionScenario::Pattern;
    SimulationSetup setup;
    setup.initial = make_state(40, 20, 20, 40, 20, 20, 160);
    setup.fees = FeeSchedule{0.0, scenario.relay_prop, 0.005, 2.0};
    setup.clock = SimClockConfig{10.0, 10.0, std::nullopt};

    const std::uint64_t n = scenario.transactions;
    std::uint64_t n_lr = 0;
    std::uint64_t n_rl = 0;
    Minutes spacing = 1.0;
    switch (scenario.pattern) {
        case Pattern::Alternating:
            n_lr = (n + 1) / 2;
            n_rl = n / 2;
            spacing = 2.0;
            break;
        case Pattern::LtoROnly: n_lr = n; break;
        case Pattern::RtoLOnly: n_rl = n; break;
    }
    ArrivalProcess lr;
    lr.timing = ArrivalProcess::Timing::Periodic;
    lr.amount = AmountDistribution::constant(20.0);
    lr.period = spacing;
    lr.offset = 1.0;
    lr.count_limit = n_lr;
    ArrivalProcess rl = lr;
    rl.offset = scenario.pattern == Pattern::Alternating ? 2.0 : 1.0;
    rl.count_limit = n_rl;
    setup.arrivals[Direction::LtoR] = lr;
    setup.arrivals[Direction::RtoL] = rl;

    DepletionResult result;
    NonePolicy none;
    result.trace = run(setup, none, [&](const EventRecord& e) {
        if (e.kind == EventRecord::Kind::TxArrival && e.tx) result.outcomes.push_back(e.tx->success);
    });
    result.successes =
        static_cast<std::uint64_t>(std::count(result.outcomes.begin(), result.outcomes.end(), true));
    if (!result.outcomes.empty() && !result.outcomes.back()) {
        std::uint64_t k = result.outcomes.size();
        while (k > 0 && !result.outcomes[k - 1]) --k;
        result.stuck_from = k;
    }
    return result;
}

}  // namespace rebal
