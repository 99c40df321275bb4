#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lexiguide {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered token inventory of a scorer. Ids are positions in `tokens()`.
///
/// `<eos>` must always be present. `<bos>` is optional; when present it is a
/// context-only symbol that scorers assign zero probability.
class Vocabulary {
 public:
  Vocabulary() = default;

  Vocabulary(std::vector<std::string> tokens, TokenId eos_id,
             std::optional<TokenId> bos_id = std::nullopt)
      : tokens_(std::move(tokens)), eos_id_(eos_id), bos_id_(bos_id) {
    const auto n = static_cast<TokenId>(tokens_.size());
    if (eos_id_ < 0 || eos_id_ >= n) {
      throw Error("vocabulary: eos id " + std::to_string(eos_id_) + " out of range");
    }
    if (bos_id_ && (*bos_id_ < 0 || *bos_id_ >= n || *bos_id_ == eos_id_)) {
      throw Error("vocabulary: invalid bos id");
    }
    for (TokenId i = 0; i < n; ++i) {
      if (!index_.emplace(tokens_[i], i).second) {
        throw Error("vocabulary: duplicate token '" + tokens_[i] + "'");
      }
    }
  }

  std::size_t size() const { return tokens_.size(); }
  TokenId eos_id() const { return eos_id_; }
  std::optional<TokenId> bos_id() const { return bos_id_; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }

  bool contains(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < tokens_.size(); }

  std::optional<TokenId> find(std::string_view s) const {
    auto it = index_.find(std::string(s));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Number of tokens that can carry probability mass (excludes `<bos>`).
  std::size_t scorable_size() const { return tokens_.size() - (bos_id_ ? 1 : 0); }

 private:
  std::vector<std::string> tokens_;
  TokenId eos_id_ = 0;
  std::optional<TokenId> bos_id_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace lexiguide
