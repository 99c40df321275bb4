#pragma once

// Test-only oracles. Nothing here goes through the decoder, the trie or
// the tracker: sequences are enumerated directly against the scorer and
// constraint satisfaction is plain contiguous-subsequence containment.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "lexiguide/scorer.hpp"

namespace lexiguide::fixtures {

struct Terminated {
  TokenSeq tokens;  // without <eos>
  double logprob;
};

inline bool contains_run(const TokenSeq& seq, const TokenSeq& run) {
  if (run.empty() || run.size() > seq.size()) return false;
  return std::search(seq.begin(), seq.end(), run.begin(), run.end()) != seq.end();
}

inline bool contains_all(const TokenSeq& seq, const std::vector<TokenSeq>& runs) {
  return std::all_of(runs.begin(), runs.end(), [&](const TokenSeq& r) { return contains_run(seq, r); });
}

inline std::vector<TokenId> content_tokens(const Vocabulary& v) {
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto t = static_cast<TokenId>(i);
    if (t != v.eos_id() && !(v.bos_id() && t == *v.bos_id())) out.push_back(t);
  }
  return out;
}

/// Every <eos>-terminated sequence with at most `max_len` content tokens,
/// scored by summing one-prefix-at-a-time scorer calls.
inline std::vector<Terminated> enumerate_terminated(const Scorer& scorer, const TokenSeq& prompt, std::size_t max_len) {
  const auto& v = scorer.vocabulary();
  const auto content = content_tokens(v);
  std::vector<Terminated> out;
  TokenSeq cur;
  auto rec = [&](auto&& self, double lp) -> void {
    TokenSeq prefix = prompt;
    prefix.insert(prefix.end(), cur.begin(), cur.end());
    const std::vector<TokenSeq> one = {prefix};
    const auto row = scorer.score_step(one);
    const double eos = row.at(0, static_cast<std::size_t>(v.eos_id()));
    if (std::isfinite(eos)) out.push_back({cur, lp + eos});
    if (cur.size() == max_len) return;
    for (TokenId t : content) {
      const double s = row.at(0, static_cast<std::size_t>(t));
      if (!std::isfinite(s)) continue;
      cur.push_back(t);
      self(self, lp + s);
      cur.pop_back();
    }
  };
  rec(rec, 0.0);
  return out;
}

/// Best by logprob, then fewer tokens, then lexicographically smaller.
inline std::optional<Terminated> argmax(const std::vector<Terminated>& seqs, const std::vector<TokenSeq>& required = {}) {
  std::optional<Terminated> best;
  for (const auto& s : seqs) {
    if (!contains_all(s.tokens, required)) continue;
    if (!best || s.logprob > best->logprob ||
        (s.logprob == best->logprob &&
         (s.tokens.size() < best->tokens.size() ||
          (s.tokens.size() == best->tokens.size() && s.tokens < best->tokens)))) {
      best = s;
    }
  }
  return best;
}

/// Constraint sets on which first-match-wins tracking agrees with plain
/// containment: no constraint's first token occurs at a later position of
/// any constraint, and no constraint is a prefix of another.
inline bool tracking_is_exact(const std::vector<TokenSeq>& cs) {
  for (const auto& a : cs) {
    for (const auto& b : cs) {
      for (std::size_t i = 1; i < b.size(); ++i) {
        if (b[i] == a.front()) return false;
      }
      if (&a != &b && a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin())) return false;
    }
  }
  return true;
}

inline Vocabulary make_vocab(std::size_t content) {
  std::vector<std::string> toks;
  for (std::size_t i = 0; i < content; ++i) toks.push_back("t" + std::to_string(i));
  toks.push_back("<eos>");
  return Vocabulary(toks, static_cast<TokenId>(content));
}

/// 1..max_count random constraints of length 1..max_len over content ids.
inline std::vector<TokenSeq> random_constraints(std::mt19937_64& rng, std::size_t content, std::size_t max_count,
                                                std::size_t max_len, bool exact_only) {
  std::uniform_int_distribution<std::size_t> count(1, max_count), len(1, max_len);
  std::uniform_int_distribution<TokenId> tok(0, static_cast<TokenId>(content) - 1);
  for (;;) {
    std::vector<TokenSeq> cs(count(rng));
    for (auto& c : cs) {
      c.resize(len(rng));
      for (auto& t : c) t = tok(rng);
    }
    if (!exact_only || tracking_is_exact(cs)) return cs;
  }
}

}  // namespace lexiguide::fixtures
