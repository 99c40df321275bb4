#pragma once

// Model-bridge wire protocol: newline-delimited JSON messages.
//
//   client -> {"type":"hello"}
//   server <- {"type":"vocab","tokens":[...],"eos_id":N}
//   client -> {"type":"score","prefixes":[[ids...],...]}
//   server <- {"type":"scores","logprobs":[[...],...], "copy_logprobs":[[...],...]?}
//   client -> {"type":"tokenize","text":"..."}
//   server <- {"type":"tokens","ids":[...]}
//   client -> {"type":"attn"}
//   server <- {"type":"attn","matrix":[[...],...],"provenance":"..."}
//   client -> {"type":"close"}
// Any request may instead get {"type":"error","msg":"..."}.
// Floats are finite JSON numbers; negative infinity travels as "-inf".

#include <cerrno>
#include <cmath>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include <sys/socket.h>
#include <unistd.h>

#include <json.hpp>

#include "lexiguide/scorer.hpp"

namespace lexiguide {

class BridgeError : public Error {
 public:
  BridgeError(const std::string& what, std::string raw) : Error(what), raw_(std::move(raw)) {}
  const std::string& raw_reply() const { return raw_; }

 private:
  std::string raw_;
};

namespace protocol {

inline nlohmann::json encode_double(double v) {
  if (v == kNegInf) return "-inf";
  if (!std::isfinite(v)) throw Error("protocol: cannot encode non-finite value");
  return v;
}

inline double decode_double(const nlohmann::json& j) {
  if (j.is_number()) {
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw Error("protocol: non-finite number");
    return v;
  }
  if (j.is_string() && j.get<std::string>() == "-inf") return kNegInf;
  throw Error("protocol: expected a number or \"-inf\"");
}

inline nlohmann::json encode_matrix(std::size_t rows, std::size_t cols, const std::vector<double>& data) {
  nlohmann::json m = nlohmann::json::array();
  for (std::size_t r = 0; r < rows; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < cols; ++c) row.push_back(encode_double(data[r * cols + c]));
    m.push_back(std::move(row));
  }
  return m;
}

inline std::vector<double> decode_matrix(const nlohmann::json& m, std::size_t rows, std::size_t cols) {
  if (!m.is_array() || m.size() != rows) throw Error("protocol: score matrix has the wrong number of rows");
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const auto& row : m) {
    if (!row.is_array() || row.size() != cols) throw Error("protocol: score row has the wrong width");
    for (const auto& v : row) out.push_back(decode_double(v));
  }
  return out;
}

inline nlohmann::json hello() { return {{"type", "hello"}}; }
inline nlohmann::json close() { return {{"type", "close"}}; }
inline nlohmann::json attn_request() { return {{"type", "attn"}}; }
inline nlohmann::json tokenize_request(std::string_view text) { return {{"type", "tokenize"}, {"text", text}}; }

inline nlohmann::json score_request(std::span<const TokenSeq> prefixes) {
  nlohmann::json p = nlohmann::json::array();
  for (const auto& s : prefixes) p.push_back(s);
  return {{"type", "score"}, {"prefixes", p}};
}

inline nlohmann::json vocab_reply(const Vocabulary& v) {
  nlohmann::json j = {{"type", "vocab"}, {"tokens", v.tokens()}, {"eos_id", v.eos_id()}};
  if (v.bos_id()) j["bos_id"] = *v.bos_id();
  return j;
}

inline nlohmann::json scores_reply(const StepScores& s) {
  std::vector<double> flat;
  flat.reserve(s.rows() * s.cols());
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto row = s.row(r);
    flat.insert(flat.end(), row.begin(), row.end());
  }
  nlohmann::json j = {{"type", "scores"}, {"logprobs", encode_matrix(s.rows(), s.cols(), flat)}};
  if (s.copy_logprobs) j["copy_logprobs"] = encode_matrix(s.rows(), s.cols(), *s.copy_logprobs);
  return j;
}

inline nlohmann::json error_reply(std::string_view msg) { return {{"type", "error"}, {"msg", msg}}; }

inline Vocabulary parse_vocab(const nlohmann::json& j) {
  std::optional<TokenId> bos;
  if (j.contains("bos_id")) bos = j.at("bos_id").get<TokenId>();
  return Vocabulary(j.at("tokens").get<std::vector<std::string>>(), j.at("eos_id").get<TokenId>(), bos);
}

inline StepScores parse_scores(const nlohmann::json& j, std::size_t rows, std::size_t cols) {
  if (!j.is_object() || !j.contains("logprobs")) throw Error("bridge: scores reply without logprobs");
  StepScores s(rows, cols);
  const auto data = decode_matrix(j.at("logprobs"), rows, cols);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(r * cols), cols, s.row(r).begin());
  if (j.contains("copy_logprobs") && !j.at("copy_logprobs").is_null()) s.copy_logprobs = decode_matrix(j.at("copy_logprobs"), rows, cols);
  return s;
}

}  // namespace protocol

/// Line-oriented byte stream over a pair of file descriptors (one socket, or
/// two pipe ends). Owns the descriptors.
class LineChannel {
 public:
  LineChannel(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}
  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;
  ~LineChannel() { close(); }

  void close() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    read_fd_ = write_fd_ = -1;
  }

  /// Reads one line without its terminator. Returns false at end of stream.
  bool read_line(std::string& line) {
    for (;;) {
      if (auto pos = buf_.find('\n'); pos != std::string::npos) {
        line.assign(buf_, 0, pos);
        buf_.erase(0, pos + 1);
        return true;
      }
      char chunk[4096];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n < 0) throw Error(std::string("bridge read failed: ") + std::strerror(errno));
      if (n == 0) {
        if (buf_.empty()) return false;
        line = std::move(buf_);
        buf_.clear();
        return true;
      }
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void write_line(std::string_view text) {
    std::string out(text);
    out += '\n';
    std::size_t off = 0;
    while (off < out.size()) {
      ssize_t n = ::send(write_fd_, out.data() + off, out.size() - off, MSG_NOSIGNAL);
      if (n < 0 && errno == ENOTSOCK) n = ::write(write_fd_, out.data() + off, out.size() - off);
      if (n < 0 && errno == EINTR) continue;
      if (n < 0) throw Error(std::string("bridge write failed: ") + std::strerror(errno));
      off += static_cast<std::size_t>(n);
    }
  }

 private:
  int read_fd_;
  int write_fd_;
  std::string buf_;
};

}  // namespace lexiguide
