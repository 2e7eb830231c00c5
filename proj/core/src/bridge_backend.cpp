#include "memsam/bridge_backend.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <deque>
#include <thread>

#include "memsam/error.hpp"

namespace memsam {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

class BridgeBackend::Connection {
 public:
  explicit Connection(const std::string& command) {
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
      throw Error(ErrorCode::BackendError,
                  std::string("socketpair failed: ") + std::strerror(errno));
    }
    pid_ = ::fork();
    if (pid_ < 0) {
      ::close(sv[0]);
      ::close(sv[1]);
      throw Error(ErrorCode::BackendError,
                  std::string("fork failed: ") + std::strerror(errno));
    }
    if (pid_ == 0) {
      // Own process group, so a kill reaches whatever the shell started.
      ::setpgid(0, 0);
      ::dup2(sv[1], STDIN_FILENO);
      ::dup2(sv[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::setpgid(pid_, pid_);
    ::close(sv[1]);
    fd_ = sv[0];
  }

  ~Connection() {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
    }
    reap();
  }

  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  bool healthy() const noexcept { return healthy_; }

  std::string transcript() const {
    std::string out;
    for (const auto& line : log_) out += "\n  " + line;
    return out.empty() ? std::string("\n  (empty)") : out;
  }

  // Sends one line and waits for one line back.
  std::string exchange(const std::string& request, std::chrono::milliseconds timeout) {
    note("> " + request);
    const std::string line = request + "\n";
    std::size_t sent = 0;
    while (sent < line.size()) {
      const ssize_t n = ::send(fd_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(std::string("write to runner failed: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }

    const auto deadline = Clock::now() + timeout;
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string reply = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        note("< " + reply);
        return reply;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - Clock::now());
      if (left.count() <= 0) {
        kill_child();
        fail("runner did not answer within " + std::to_string(timeout.count()) + " ms");
      }
      pollfd pfd{fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (ready < 0) {
        if (errno == EINTR) continue;
        fail(std::string("poll failed: ") + std::strerror(errno));
      }
      if (ready == 0) continue;
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(std::string("read from runner failed: ") + std::strerror(errno));
      }
      if (n == 0) fail("runner closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  [[noreturn]] void fail(const std::string& why) {
    healthy_ = false;
    throw Error(ErrorCode::BackendError, why + "; transcript:" + transcript());
  }

 private:
  void note(std::string line) {
    constexpr std::size_t kMaxLine = 512;
    if (line.size() > kMaxLine) line = line.substr(0, kMaxLine) + "...";
    log_.push_back(std::move(line));
    while (log_.size() > 6) log_.pop_front();
  }

  void kill_child() {
    if (pid_ > 0) ::kill(-pid_, SIGKILL);
  }

  void reap() {
    if (pid_ <= 0) return;
    for (int i = 0; i < 200; ++i) {
      const pid_t r = ::waitpid(pid_, nullptr, WNOHANG);
      if (r == pid_ || (r < 0 && errno != EINTR)) {
        ::kill(-pid_, SIGKILL);  // stragglers the shell left behind
        pid_ = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(-pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
    pid_ = -1;
  }

  pid_t pid_ = -1;
  int fd_ = -1;
  bool healthy_ = true;
  std::string buffer_;
  std::deque<std::string> log_;
};

BridgeBackend::BridgeBackend(BridgeParams params) : params_(std::move(params)) {
  if (params_.command.empty()) {
    throw Error(ErrorCode::ConfigError, "bridge command is empty");
  }
  if (params_.connections == 0) params_.connections = 1;
}

BridgeBackend::~BridgeBackend() = default;

std::unique_ptr<BridgeBackend::Connection> BridgeBackend::acquire() const {
  std::unique_lock lock(mutex_);
  available_.wait(lock, [&] { return !idle_.empty() || live_ < params_.connections; });
  if (!idle_.empty()) {
    auto conn = std::move(idle_.back());
    idle_.pop_back();
    return conn;
  }
  ++live_;
  lock.unlock();
  try {
    return std::make_unique<Connection>(params_.command);
  } catch (...) {
    lock.lock();
    --live_;
    available_.notify_one();
    throw;
  }
}

void BridgeBackend::release(std::unique_ptr<Connection> conn) const {
  std::lock_guard lock(mutex_);
  if (conn && conn->healthy()) {
    idle_.push_back(std::move(conn));
  } else {
    conn.reset();
    --live_;
  }
  available_.notify_one();
}

json BridgeBackend::call(const json& request) const {
  auto conn = acquire();
  struct Returner {
    const BridgeBackend* self;
    std::unique_ptr<Connection>* conn;
    ~Returner() { self->release(std::move(*conn)); }
  } returner{this, &conn};

  const std::string reply = conn->exchange(request.dump(), params_.timeout);
  json response;
  try {
    response = json::parse(reply);
  } catch (const json::exception&) {
    conn->fail("runner answered with invalid JSON");
  }
  if (!response.is_object() || !response.contains("ok") || !response["ok"].is_boolean()) {
    conn->fail("runner response lacks a boolean \"ok\" field");
  }
  if (!response["ok"].get<bool>()) {
    const std::string why =
        response.contains("error") ? response["error"].dump() : std::string("(no error text)");
    throw Error(ErrorCode::BackendError,
                "runner reported failure: " + why + "; transcript:" + conn->transcript());
  }
  return response;
}

FeatureGrid BridgeBackend::extract_features(const fs::path& image) const {
  const json response =
      call({{"op", "extract"}, {"image", fs::absolute(image).string()}});
  FeatureGrid grid;
  try {
    grid = read_feature_grid(response.at("features").get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BackendError,
                std::string("malformed extract response: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::BackendError,
                std::string("runner features unreadable: ") + e.what());
  }
  const double deviation = max_norm_deviation(grid);
  if (deviation > 1e-3) {
    throw Error(ErrorCode::BackendError,
                "runner features are not unit-normalized (max |norm-1| = " +
                    std::to_string(deviation) + ")");
  }
  if (deviation > 1e-5) grid = l2_normalize_grid(grid);
  return grid;
}

std::vector<ScoredMask> BridgeBackend::segment(const fs::path& image,
                                               const PromptSet& prompts) const {
  json request = to_json(prompts);
  request["op"] = "segment";
  request["image"] = fs::absolute(image).string();
  const json response = call(request);

  std::vector<ScoredMask> out;
  try {
    for (const auto& m : response.at("masks")) {
      out.push_back({read_mask_png(m.at("png").get<std::string>()),
                     m.at("score").get<double>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BackendError,
                std::string("malformed segment response: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::BackendError,
                std::string("runner mask unreadable: ") + e.what());
  }
  if (out.empty()) {
    throw Error(ErrorCode::BackendError, "runner returned zero candidate masks");
  }
  return out;
}

json BridgeBackend::describe() const {
  return {{"kind", "bridge"},
          {"command", params_.command},
          {"timeout_ms", params_.timeout.count()},
          {"connections", params_.connections}};
}

}  // namespace memsam
