// Line-oriented transports between the simulator and an external agent.
#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>
#include <sys/types.h>

namespace rebal {

class Transport {
public:
    virtual ~Transport() = default;

    virtual void send_line(std::string_view line) = 0;
    // nullopt on timeout; throws TransportClosed when the peer went away.
    virtual std::optional<std::string> receive_line(std::chrono::milliseconds timeout) = 0;
};

class TransportClosed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Buffered reader over a file descriptor with poll()-based timeouts.
class FdLineReader {
public:
    explicit FdLineReader(int fd = -1) : fd_(fd) {}
    void reset(int fd) {
        fd_ = fd;
        buffer_.clear();
    }
    std::optional<std::string> read_line(std::chrono::milliseconds timeout);

private:
    int fd_;
    std::string buffer_;
};

void write_all(int fd, std::string_view data);

// Spawns `/bin/sh -c command` and talks to it over its stdin/stdout.
class ProcessTransport final : public Transport {
public:
    explicit ProcessTransport(const std::string& command);
    ~ProcessTransport() override;
    ProcessTransport(const ProcessTransport&) = delete;
    ProcessTransport& operator=(const ProcessTransport&) = delete;

    void send_line(std::string_view line) override;
    std::optional<std::string> receive_line(std::chrono::milliseconds timeout) override;

    // Closes the agent's stdin and waits for it to exit; returns its status.
    int finish(std::chrono::milliseconds grace = std::chrono::milliseconds(2000));

private:
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    FdLineReader reader_;
    bool reaped_ = false;
    int status_ = 0;
};

// Listens on a Unix-domain socket path and serves the first client.
class UnixSocketTransport final : public Transport {
public:
    UnixSocketTransport(const std::string& path, std::chrono::milliseconds accept_timeout);
    ~UnixSocketTransport() override;
    UnixSocketTransport(const UnixSocketTransport&) = delete;
    UnixSocketTransport& operator=(const UnixSocketTransport&) = delete;

    void send_line(std::string_view line) override;
    std::optional<std::string> receive_line(std::chrono::milliseconds timeout) override;

private:
    std::string path_;
    int listen_fd_ = -1;
    int conn_fd_ = -1;
    FdLineReader reader_;
};

// In-process peer: every line sent is handed to `respond`, whose replies are
// queued for the next receives. Used by tests and offline drivers.
class CallbackTransport final : public Transport {
public:
    using Responder = std::function<std::vector<std::string>(const std::string& line)>;

    explicit CallbackTransport(Responder respond) : respond_(std::move(respond)) {}

    void send_line(std::string_view line) override;
    std::optional<std::string> receive_line(std::chrono::milliseconds timeout) override;

private:
    Responder respond_;
    std::vector<std::string> pending_;
    std::size_t next_ = 0;
};

}  // namespace rebal
