#pragma once

// Scorer client for an out-of-process model bridge.
//
// Endpoints:
//   tcp://HOST:PORT   connect to a listening bridge
//   exec:COMMAND      spawn COMMAND through /bin/sh, talk over its stdin/stdout

#include <csignal>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <netdb.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "lexiguide/attention.hpp"
#include "lexiguide/bridge_protocol.hpp"

namespace lexiguide {

class RemoteScorer final : public Scorer {
 public:
  /// Takes ownership of the descriptors and performs the hello handshake.
  RemoteScorer(int read_fd, int write_fd, pid_t child = -1) : channel_(read_fd, write_fd), child_(child) {
    const auto reply = request(protocol::hello(), "vocab");
    try {
      vocab_ = protocol::parse_vocab(reply.first);
    } catch (const std::exception& e) {
      throw BridgeError(std::string("malformed vocab reply: ") + e.what(), reply.second);
    }
  }

  RemoteScorer(const RemoteScorer&) = delete;
  RemoteScorer& operator=(const RemoteScorer&) = delete;

  ~RemoteScorer() override {
    try {
      close();
    } catch (...) {
    }
  }

  static std::unique_ptr<RemoteScorer> connect(const std::string& endpoint) {
    if (endpoint.rfind("tcp://", 0) == 0) return connect_tcp(endpoint.substr(6));
    if (endpoint.rfind("exec:", 0) == 0) return spawn(endpoint.substr(5));
    throw Error("unknown bridge endpoint '" + endpoint + "' (expected tcp://HOST:PORT or exec:COMMAND)");
  }

  const Vocabulary& vocabulary() const override { return vocab_; }

  StepScores score_step(std::span<const TokenSeq> prefixes) const override {
    detail::check_prefixes(prefixes, vocab_);
    const auto reply = request(protocol::score_request(prefixes), "scores");
    try {
      StepScores s = protocol::parse_scores(reply.first, prefixes.size(), vocab_.size());
      for (std::size_t r = 0; r < s.rows(); ++r) validate_log_row(s.row(r));
      return s;
    } catch (const std::exception& e) {
      throw BridgeError(std::string("malformed scores reply: ") + e.what(), reply.second);
    }
  }

  /// Token ids of `text` in the bridge's own vocabulary.
  TokenSeq tokenize(std::string_view text) const {
    const auto reply = request(protocol::tokenize_request(text), "tokens");
    try {
      return reply.first.at("ids").get<TokenSeq>();
    } catch (const std::exception& e) {
      throw BridgeError(std::string("malformed tokens reply: ") + e.what(), reply.second);
    }
  }

  struct Attention {
    SquareMatrix matrix;
    std::string provenance;
  };

  /// Self-attention matrix for the most recent request, as declared by the bridge.
  Attention attention() const {
    const auto reply = request(protocol::attn_request(), "attn");
    try {
      const auto& rows = reply.first.at("matrix");
      std::vector<std::vector<double>> m;
      for (const auto& r : rows) {
        std::vector<double> row;
        for (const auto& v : r) row.push_back(protocol::decode_double(v));
        m.push_back(std::move(row));
      }
      return {SquareMatrix::from_rows(m), reply.first.value("provenance", std::string())};
    } catch (const std::exception& e) {
      throw BridgeError(std::string("malformed attn reply: ") + e.what(), reply.second);
    }
  }

  void close() {
    std::lock_guard lock(mu_);
    if (closed_) return;
    closed_ = true;
    try {
      channel_.write_line(protocol::close().dump());
    } catch (const Error&) {
    }
    channel_.close();
    if (child_ > 0) {
      int status = 0;
      ::waitpid(child_, &status, 0);
      child_ = -1;
    }
  }

 private:
  // One request/reply exchange; requests on a connection are serialized.
  std::pair<nlohmann::json, std::string> request(const nlohmann::json& msg, std::string_view expect) const {
    std::lock_guard lock(mu_);
    if (closed_) throw Error("bridge session is closed");
    channel_.write_line(msg.dump());
    std::string raw;
    if (!channel_.read_line(raw)) throw BridgeError("bridge closed the connection", "");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
      throw BridgeError("bridge reply is not JSON", raw);
    }
    const auto type = j.is_object() ? j.value("type", std::string()) : std::string();
    if (type == "error") throw BridgeError("bridge error: " + j.value("msg", std::string()), raw);
    if (type != expect) throw BridgeError("unexpected bridge reply type '" + type + "'", raw);
    return {std::move(j), std::move(raw)};
  }

  static std::unique_ptr<RemoteScorer> connect_tcp(const std::string& hostport) {
    const auto colon = hostport.rfind(':');
    if (colon == std::string::npos) throw Error("tcp endpoint needs HOST:PORT");
    const std::string host = hostport.substr(0, colon), port = hostport.substr(colon + 1);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0) throw Error("cannot resolve bridge host " + host);
    int fd = -1;
    for (addrinfo* a = res; a; a = a->ai_next) {
      fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw Error("cannot connect to bridge at " + hostport);
    return std::make_unique<RemoteScorer>(fd, fd);
  }

  static std::unique_ptr<RemoteScorer> spawn(const std::string& command) {
    std::signal(SIGPIPE, SIG_IGN);
    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0) throw Error("pipe failed");
    if (::pipe(from_child) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw Error("pipe failed");
    }
    const pid_t pid = ::fork();
    if (pid < 0) throw Error("fork failed");
    if (pid == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    try {
      return std::make_unique<RemoteScorer>(from_child[0], to_child[1], pid);
    } catch (...) {
      ::kill(pid, SIGTERM);
      ::waitpid(pid, nullptr, 0);
      throw;
    }
  }

  mutable LineChannel channel_;
  mutable std::mutex mu_;
  pid_t child_;
  bool closed_ = false;
  Vocabulary vocab_;
};

}  // namespace lexiguide
