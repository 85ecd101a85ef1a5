// Learning-environment bridge: exposes a simulation to an external agent
// over a line-delimited JSON protocol.
//
// Session (server = simulator, agent = learner):
//   server: {"type":"hello","version":1,"config":{...}}
//   agent:  {"type":"reset","seed":7}            (seed optional)
//   server: {"type":"obs","step":0,"o":[...7],"r":0,"done":false,"info":{...}}
//   agent:  {"type":"act","a":[aL,aR]}
//   ...     one obs/act pair per control epoch
//   server: {"type":"obs",...,"done":true}
//   agent:  {"type":"reset",...} to start another episode, or {"type":"bye"}
//   server: {"type":"bye"}
// Any malformed or late message is answered with {"type":"error",...} and
// the session is aborted.
#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rebal/engine.hpp"
#include "rebal/policies.hpp"
#include "rebal/trace.hpp"
#include "rebal/transport.hpp"

namespace rebal {

inline constexpr int kProtocolVersion = 1;
inline constexpr Currency kDefaultOnchainNorm = 60.0;

struct Observation {
    std::array<double, 7> values{};
    bool operator==(const Observation&) const = default;
};

// (b_LN/C_L, b_NL/C_L, b_NR/C_R, b_RN/C_R, min(B_N/norm, 1),
//  future b_LN / C_L, future b_RN / C_R), every coordinate in [0, 1].
Observation encode_observation(const NodeState& state, const DemandSnapshot& demand,
                               Currency onchain_norm);

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace protocol {

struct Hello {
    int version = kProtocolVersion;
    nlohmann::json config;
};
struct Reset {
    std::optional<std::uint64_t> seed;
};
struct Info {
    std::uint64_t failed_swaps = 0;
    Currency lost_fees = 0.0;
    Currency fortune = 0.0;
};
struct Obs {
    std::uint64_t step = 0;
    Observation o;
    double r = 0.0;
    bool done = false;
    Info info;
};
struct Act {
    RawAction a;
};
struct Bye {};
struct Error {
    std::string message;
};

using Message = std::variant<Hello, Reset, Obs, Act, Bye, Error>;

std::string encode(const Message& m);
// Throws ProtocolError for anything that is not a well-formed message.
Message decode(const std::string& line);

}  // namespace protocol

struct BridgeOptions {
    double min_swap_fraction = kDefaultMinSwapFraction;
    Currency onchain_norm = kDefaultOnchainNorm;
    std::chrono::milliseconds act_timeout{60'000};
    // Cut episodes after this many steps; unset runs to the horizon.
    std::optional<std::uint64_t> episode_steps;
    std::ostream* transcript = nullptr;  // "> " sent, "< " received
};

// What the agent saw and did, enough to re-run the episode offline.
struct ActionLog {
    struct Entry {
        std::uint64_t step = 0;
        Observation obs;
        std::optional<RawAction> action;  // absent on the final entry
        bool done = false;
    };
    std::uint64_t seed = 0;
    std::vector<Entry> entries;
};

void write_action_log(std::ostream& os, const ActionLog& log);
ActionLog read_action_log(std::istream& is);

struct Episode {
    std::uint64_t seed = 0;
    MetricsTrace trace;
    ActionLog log;
};

// Runs one episode against an agent that has already been greeted and has
// requested a reset. `setup` must already carry the episode's seeds.
Episode serve_episode(const SimulationSetup& setup, std::uint64_t seed, Transport& transport,
                      const BridgeOptions& options);

using SetupFactory = std::function<SimulationSetup(std::uint64_t seed)>;
using EpisodeSink = std::function<void(const Episode&)>;

// Full session: hello, then one episode per reset until the agent says bye.
// Resets without a seed take the next value of `default_seeds` (repeating
// the last one when exhausted). Returns the number of episodes served.
std::size_t serve_session(const nlohmann::json& config_echo, const SetupFactory& make_setup,
                          const std::vector<std::uint64_t>& default_seeds, Transport& transport,
                          const BridgeOptions& options, const EpisodeSink& on_episode);

class ReplayDivergence : public std::runtime_error {
public:
    ReplayDivergence(std::uint64_t step, const std::string& what);
    std::uint64_t step() const { return step_; }

private:
    std::uint64_t step_;
};

// Re-runs a recorded episode without the agent. Throws ReplayDivergence at
// the first step whose observation differs from the log or for which the
// log has no action.
MetricsTrace replay_policy(const ActionLog& log, const SimulationSetup& setup,
                           const BridgeOptions& options);

}  // namespace rebal
