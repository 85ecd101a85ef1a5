#include "rebal/transport.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>
#include <vector>

namespace rebal {

namespace {

std::runtime_error sys_error(const std::string& what) {
    return std::runtime_error(what + ": " + std::strerror(errno));
}

void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
}

}  // namespace

void write_all(int fd, std::string_view data) {
    while (!data.empty()) {
        const ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            if (errno == EPIPE) throw TransportClosed("peer closed the connection");
            throw sys_error("write");
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

std::optional<std::string> FdLineReader::read_line(std::chrono::milliseconds timeout) {
    using clock = std::chrono::steady_clock;
    const auto deadline = clock::now() + timeout;
    for (;;) {
        if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
            std::string line = buffer_.substr(0, pos);
            buffer_.erase(0, pos + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }
        const auto left =
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
        if (left.count() <= 0) return std::nullopt;

        pollfd p{fd_, POLLIN, 0};
        const int ready = ::poll(&p, 1, static_cast<int>(left.count()));
        if (ready < 0) {
            if (errno == EINTR) continue;
            throw sys_error("poll");
        }
        if (ready == 0) return std::nullopt;

        char chunk[4096];
        const ssize_t n = ::read(fd_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            throw sys_error("read");
        }
        if (n == 0) throw TransportClosed("peer closed the connection");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

// ---------------------------------------------------------------------------

ProcessTransport::ProcessTransport(const std::string& command) {
    // Writes to a dead agent must surface as errors, not kill the simulator.
    std::signal(SIGPIPE, SIG_IGN);

    int in_pipe[2];
    int out_pipe[2];
    if (::pipe(in_pipe) != 0) throw sys_error("pipe");
    if (::pipe(out_pipe) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw sys_error("pipe");
    }

    pid_ = ::fork();
    if (pid_ < 0) throw sys_error("fork");
    if (pid_ == 0) {
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    ::fcntl(to_child_, F_SETFD, FD_CLOEXEC);
    ::fcntl(from_child_, F_SETFD, FD_CLOEXEC);
    reader_.reset(from_child_);
}

ProcessTransport::~ProcessTransport() {
    try {
        finish(std::chrono::milliseconds(500));
    } catch (...) {
    }
}

void ProcessTransport::send_line(std::string_view line) {
    if (to_child_ < 0) throw TransportClosed("agent input already closed");
    std::string data(line);
    data.push_back('\n');
    write_all(to_child_, data);
}

std::optional<std::string> ProcessTransport::receive_line(std::chrono::milliseconds timeout) {
    return reader_.read_line(timeout);
}

int ProcessTransport::finish(std::chrono::milliseconds grace) {
    close_fd(to_child_);
    if (!reaped_ && pid_ > 0) {
        const auto deadline = std::chrono::steady_clock::now() + grace;
        for (;;) {
            const pid_t r = ::waitpid(pid_, &status_, WNOHANG);
            if (r == pid_ || r < 0) break;
            if (std::chrono::steady_clock::now() >= deadline) {
                ::kill(pid_, SIGKILL);
                ::waitpid(pid_, &status_, 0);
                break;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
        reaped_ = true;
    }
    close_fd(from_child_);
    return status_;
}

// ---------------------------------------------------------------------------

UnixSocketTransport::UnixSocketTransport(const std::string& path,
                                         std::chrono::milliseconds accept_timeout)
    : path_(path) {
    std::signal(SIGPIPE, SIG_IGN);
    sockaddr_un addr{};
    if (path.size() >= sizeof addr.sun_path) throw std::invalid_argument("socket path too long");
    addr.sun_family = AF_UNIX;
    std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);

    listen_fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw sys_error("socket");
    ::unlink(path.c_str());
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        close_fd(listen_fd_);
        throw sys_error("bind " + path);
    }
    if (::listen(listen_fd_, 1) != 0) {
        close_fd(listen_fd_);
        throw sys_error("listen");
    }

    pollfd p{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, static_cast<int>(accept_timeout.count()));
    if (ready <= 0) {
        close_fd(listen_fd_);
        ::unlink(path_.c_str());
        throw std::runtime_error("no agent connected to " + path);
    }
    conn_fd_ = ::accept(listen_fd_, nullptr, nullptr);
    if (conn_fd_ < 0) throw sys_error("accept");
    reader_.reset(conn_fd_);
}

UnixSocketTransport::~UnixSocketTransport() {
    close_fd(conn_fd_);
    close_fd(listen_fd_);
    ::unlink(path_.c_str());
}

void UnixSocketTransport::send_line(std::string_view line) {
    std::string data(line);
    data.push_back('\n');
    write_all(conn_fd_, data);
}

std::optional<std::string> UnixSocketTransport::receive_line(std::chrono::milliseconds timeout) {
    return reader_.read_line(timeout);
}

// ---------------------------------------------------------------------------

void CallbackTransport::send_line(std::string_view line) {
    for (auto& reply : respond_(std::string(line))) pending_.push_back(std::move(reply));
}

std::optional<std::string> CallbackTransport::receive_line(std::chrono::milliseconds) {
    if (next_ >= pending_.size()) return std::nullopt;
    return pending_[next_++];
}

}  // namespace rebal
