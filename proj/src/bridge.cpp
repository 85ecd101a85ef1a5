#include "rebal/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

namespace rebal {

using nlohmann::json;

namespace {

double unit(double x) { return std::clamp(x, 0.0, 1.0); }

double ratio(Currency part, Currency whole) { return whole > 0.0 ? unit(part / whole) : 0.0; }

json obs_array(const Observation& o) {
    json a = json::array();
    for (double v : o.values) a.push_back(v);
    return a;
}

Observation parse_obs_array(const json& a) {
    if (!a.is_array() || a.size() != 7) throw ProtocolError("'o' must be an array of 7 numbers");
    Observation o;
    for (std::size_t i = 0; i < 7; ++i) {
        if (!a[i].is_number()) throw ProtocolError("'o' must be an array of 7 numbers");
        o.values[i] = a[i].get<double>();
    }
    return o;
}

RawAction parse_action(const json& a) {
    if (!a.is_array() || a.size() != 2) throw ProtocolError("'a' must be an array of 2 numbers");
    std::array<double, 2> v{};
    for (std::size_t i = 0; i < 2; ++i) {
        if (!a[i].is_number()) throw ProtocolError("'a' must be an array of 2 numbers");
        v[i] = a[i].get<double>();
        if (!std::isfinite(v[i]) || v[i] < -1.0 || v[i] > 1.0)
            throw ProtocolError("action coordinate outside [-1, 1]");
    }
    return {v[0], v[1]};
}

const json& field(const json& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end()) throw ProtocolError(std::string("missing field '") + name + "'");
    return *it;
}

// Decorates a transport with a transcript.
class Recorder {
public:
    Recorder(Transport& t, std::ostream* out) : t_(t), out_(out) {}

    void send(const protocol::Message& m) {
        const std::string line = protocol::encode(m);
        if (out_) *out_ << "> " << line << '\n';
        t_.send_line(line);
    }

    protocol::Message receive(std::chrono::milliseconds timeout, const char* expecting) {
        std::optional<std::string> line;
        try {
            line = t_.receive_line(timeout);
        } catch (const TransportClosed&) {
            throw ProtocolError(std::string("agent disconnected while waiting for ") + expecting);
        }
        if (!line) fail(std::string("timed out waiting for ") + expecting);
        if (out_) *out_ << "< " << *line << '\n';
        try {
            return protocol::decode(*line);
        } catch (const ProtocolError& e) {
            fail(e.what());
        }
    }

    [[noreturn]] void fail(const std::string& message) {
        try {
            send(protocol::Error{message});
        } catch (...) {
        }
        throw ProtocolError(message);
    }

private:
    Transport& t_;
    std::ostream* out_;
};

protocol::Info info_of(const Simulation& sim) {
    protocol::Info info;
    if (const auto& l = sim.last_ledger()) {
        info.failed_swaps = l->failed_swaps;
        info.lost_fees = l->lost_fees;
    }
    info.fortune = sim.state().fortune();
    return info;
}

bool episode_over(const Simulation& sim, const BridgeOptions& options) {
    return options.episode_steps && sim.epoch() >= *options.episode_steps;
}

double last_reward(const Simulation& sim) {
    const auto& rows = sim.trace().rows;
    return rows.empty() ? 0.0 : rows.back().reward;
}

}  // namespace

Observation encode_observation(const NodeState& state, const DemandSnapshot& demand,
                               Currency onchain_norm) {
    const ChannelState& l = state.channels[Side::L];
    const ChannelState& r = state.channels[Side::R];
    Observation o;
    o.values = {ratio(l.remote, l.capacity),
                ratio(l.local, l.capacity),
                ratio(r.local, r.capacity),
                ratio(r.remote, r.capacity),
                ratio(state.onchain, onchain_norm),
                ratio(demand.future_refined[Side::L], l.capacity),
                ratio(demand.future_refined[Side::R], r.capacity)};
    return o;
}

// ---------------------------------------------------------------------------

namespace protocol {

std::string encode(const Message& m) {
    json j = std::visit(
        [](const auto& msg) -> json {
            using T = std::decay_t<decltype(msg)>;
            if constexpr (std::is_same_v<T, Hello>) {
                return {{"type", "hello"}, {"version", msg.version}, {"config", msg.config}};
            } else if constexpr (std::is_same_v<T, Reset>) {
                json r = {{"type", "reset"}};
                if (msg.seed) r["seed"] = *msg.seed;
                return r;
            } else if constexpr (std::is_same_v<T, Obs>) {
                return {{"type", "obs"},
                        {"step", msg.step},
                        {"o", obs_array(msg.o)},
                        {"r", msg.r},
                        {"done", msg.done},
                        {"info",
                         {{"failed_swaps", msg.info.failed_swaps},
                          {"lost_fees", msg.info.lost_fees},
                          {"fortune", msg.info.fortune}}}};
            } else if constexpr (std::is_same_v<T, Act>) {
                return {{"type", "act"}, {"a", {msg.a.l, msg.a.r}}};
            } else if constexpr (std::is_same_v<T, Bye>) {
                return {{"type", "bye"}};
            } else {
                return {{"type", "error"}, {"message", msg.message}};
            }
        },
        m);
    return j.dump();
}

Message decode(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed message: ") + e.what());
    }
    if (!j.is_object()) throw ProtocolError("message must be an object");
    const json& type = field(j, "type");
    if (!type.is_string()) throw ProtocolError("'type' must be a string");
    const std::string t = type.get<std::string>();

    if (t == "hello") {
        Hello h;
        const json& v = field(j, "version");
        if (!v.is_number_integer()) throw ProtocolError("'version' must be an integer");
        h.version = v.get<int>();
        if (auto it = j.find("config"); it != j.end()) h.config = *it;
        return h;
    }
    if (t == "reset") {
        Reset r;
        if (auto it = j.find("seed"); it != j.end() && !it->is_null()) {
            if (!it->is_number_unsigned()) throw ProtocolError("'seed' must be a non-negative integer");
            r.seed = it->get<std::uint64_t>();
        }
        return r;
    }
    if (t == "obs") {
        Obs o;
        const json& step = field(j, "step");
        if (!step.is_number_unsigned()) throw ProtocolError("'step' must be a non-negative integer");
        o.step = step.get<std::uint64_t>();
        o.o = parse_obs_array(field(j, "o"));
        const json& r = field(j, "r");
        if (!r.is_number()) throw ProtocolError("'r' must be a number");
        o.r = r.get<double>();
        const json& done = field(j, "done");
        if (!done.is_boolean()) throw ProtocolError("'done' must be a boolean");
        o.done = done.get<bool>();
        const json& info = field(j, "info");
        if (!info.is_object()) throw ProtocolError("'info' must be an object");
        o.info.failed_swaps = info.value("failed_swaps", std::uint64_t{0});
        o.info.lost_fees = info.value("lost_fees", 0.0);
        o.info.fortune = info.value("fortune", 0.0);
        return o;
    }
    if (t == "act") return Act{parse_action(field(j, "a"))};
    if (t == "bye") return Bye{};
    if (t == "error") return Error{j.value("message", std::string{})};
    throw ProtocolError("unknown message type '" + t + "'");
}

}  // namespace protocol

// ---------------------------------------------------------------------------

void write_action_log(std::ostream& os, const ActionLog& log) {
    os << json{{"type", "episode"}, {"version", kProtocolVersion}, {"seed", log.seed}}.dump()
       << '\n';
    for (const auto& e : log.entries) {
        json j = {{"step", e.step}, {"o", obs_array(e.obs)}};
        if (e.action) j["a"] = {e.action->l, e.action->r};
        if (e.done) j["done"] = true;
        os << j.dump() << '\n';
    }
}

ActionLog read_action_log(std::istream& is) {
    ActionLog log;
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error(std::string("bad action log line: ") + e.what());
        }
        if (!header && j.value("type", std::string{}) == "episode") {
            log.seed = j.at("seed").get<std::uint64_t>();
            header = true;
            continue;
        }
        ActionLog::Entry e;
        e.step = j.at("step").get<std::uint64_t>();
        e.obs = parse_obs_array(j.at("o"));
        if (auto it = j.find("a"); it != j.end()) e.action = parse_action(*it);
        e.done = j.value("done", false);
        log.entries.push_back(e);
    }
    return log;
}

// ---------------------------------------------------------------------------

Episode serve_episode(const SimulationSetup& setup, std::uint64_t seed, Transport& transport,
                      const BridgeOptions& options) {
    Recorder link(transport, options.transcript);
    Simulation sim(setup);
    Episode ep;
    ep.seed = seed;
    ep.log.seed = seed;

    while (auto ctx = sim.advance()) {
        if (episode_over(sim, options)) break;
        protocol::Obs obs;
        obs.step = sim.epoch();
        obs.o = encode_observation(ctx->state, ctx->demand, options.onchain_norm);
        obs.r = last_reward(sim);
        obs.info = info_of(sim);
        link.send(obs);

        const protocol::Message reply = link.receive(options.act_timeout, "act");
        const auto* act = std::get_if<protocol::Act>(&reply);
        if (!act) link.fail("expected act");

        sim.act(process_raw_action(act->a, *ctx, options.min_swap_fraction));
        ep.log.entries.push_back({obs.step, obs.o, act->a, false});
    }

    protocol::Obs last;
    last.step = sim.epoch();
    const PolicyContext ctx = sim.context();
    last.o = encode_observation(ctx.state, ctx.demand, options.onchain_norm);
    last.r = last_reward(sim);
    last.done = true;
    last.info = info_of(sim);
    link.send(last);
    ep.log.entries.push_back({last.step, last.o, std::nullopt, true});

    ep.trace = sim.take_trace();
    return ep;
}

std::size_t serve_session(const json& config_echo, const SetupFactory& make_setup,
                          const std::vector<std::uint64_t>& default_seeds, Transport& transport,
                          const BridgeOptions& options, const EpisodeSink& on_episode) {
    Recorder link(transport, options.transcript);
    link.send(protocol::Hello{kProtocolVersion, config_echo});

    std::size_t episodes = 0;
    for (;;) {
        const protocol::Message m = link.receive(options.act_timeout, "reset or bye");
        if (std::holds_alternative<protocol::Bye>(m)) {
            link.send(protocol::Bye{});
            return episodes;
        }
        const auto* reset = std::get_if<protocol::Reset>(&m);
        if (!reset) link.fail("expected reset or bye");

        std::uint64_t seed = 0;
        if (reset->seed) {
            seed = *reset->seed;
        } else if (!default_seeds.empty()) {
            seed = default_seeds[std::min(episodes, default_seeds.size() - 1)];
        }
        Episode ep = serve_episode(make_setup(seed), seed, transport, options);
        ++episodes;
        if (on_episode) on_episode(ep);
    }
}

// ---------------------------------------------------------------------------

ReplayDivergence::ReplayDivergence(std::uint64_t step, const std::string& what)
    : std::runtime_error("replay diverged at step " + std::to_string(step) + ": " + what),
      step_(step) {}

MetricsTrace replay_policy(const ActionLog& log, const SimulationSetup& setup,
                           const BridgeOptions& options) {
    Simulation sim(setup);
    std::size_t next = 0;
    while (auto ctx = sim.advance()) {
        if (episode_over(sim, options)) break;
        const std::uint64_t step = sim.epoch();
        if (next >= log.entries.size() || log.entries[next].done)
            throw ReplayDivergence(step, "log has no action for this step");
        const auto& entry = log.entries[next++];
        if (entry.step != step) throw ReplayDivergence(step, "log step numbers out of sync");
        const Observation obs = encode_observation(ctx->state, ctx->demand, options.onchain_norm);
        if (obs != entry.obs) throw ReplayDivergence(step, "observation differs from the log");
        if (!entry.action) throw ReplayDivergence(step, "log entry has no action");
        sim.act(process_raw_action(*entry.action, *ctx, options.min_swap_fraction));
    }
    if (next < log.entries.size()) {
        const auto& tail = log.entries[next];
        if (!tail.done || next + 1 != log.entries.size())
            throw ReplayDivergence(sim.epoch(), "log continues past the end of the episode");
        const PolicyContext ctx = sim.context();
        if (encode_observation(ctx.state, ctx.demand, options.onchain_norm) != tail.obs)
            throw ReplayDivergence(sim.epoch(), "final observation differs from the log");
    }
    return sim.take_trace();
}

}  // namespace rebal
