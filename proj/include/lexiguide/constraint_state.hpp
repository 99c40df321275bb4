#pragma once

// Multi-token lexical constraints and per-hypothesis satisfaction tracking.
//
// A constraint is a token sequence. The trie stores every distinct sequence
// once; the tracker walks it as tokens are generated. The number of
// satisfied constraint tokens (whole phrases plus progress into the phrase
// currently being matched) is the bank index used by dynamic beam allocation.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "lexiguide/core.hpp"

namespace lexiguide {

struct Constraint {
  std::string surface;
  TokenSeq tokens;
};

using ConstraintSet = std::vector<Constraint>;

class ConstraintTrie {
 public:
  static constexpr int kRoot = 0;

  struct Node {
    int depth = 0;
    std::map<TokenId, int> children;
    int phrase = -1;                // distinct phrase ending here, -1 if none
    std::vector<int> phrases_below;  // distinct phrases whose path passes through (or ends at) this node
  };

  ConstraintTrie() : nodes_(1) {}

  /// Builds the trie for `constraints`. Identical token sequences share one
  /// phrase; `members(p)` lists the input indices that map to phrase `p`.
  static ConstraintTrie build(const ConstraintSet& constraints, const Vocabulary& vocab) {
    ConstraintTrie t;
    for (std::size_t ci = 0; ci < constraints.size(); ++ci) {
      const auto& c = constraints[ci];
      if (c.tokens.empty()) throw Error("constraint '" + c.surface + "' has no tokens");
      for (TokenId tok : c.tokens) {
        if (!vocab.contains(tok)) throw Error("constraint '" + c.surface + "' has an out-of-vocabulary token");
        if (tok == vocab.eos_id() || (vocab.bos_id() && tok == *vocab.bos_id())) {
          throw Error("constraint '" + c.surface + "' contains a reserved token");
        }
      }
      int node = kRoot;
      for (TokenId tok : c.tokens) {
        auto it = t.nodes_[node].children.find(tok);
        if (it == t.nodes_[node].children.end()) {
          const int child = static_cast<int>(t.nodes_.size());
          Node n;
          n.depth = t.nodes_[node].depth + 1;
          t.nodes_.push_back(std::move(n));
          t.nodes_[node].children.emplace(tok, child);
          node = child;
        } else {
          node = it->second;
        }
      }
      if (t.nodes_[node].phrase < 0) {
        const int p = static_cast<int>(t.members_.size());
        t.nodes_[node].phrase = p;
        t.members_.emplace_back();
        t.lengths_.push_back(static_cast<int>(c.tokens.size()));
        t.total_tokens_ += static_cast<int>(c.tokens.size());
        // Record the phrase on every node of its path.
        int walk = kRoot;
        t.nodes_[walk].phrases_below.push_back(p);
        for (TokenId tok : c.tokens) {
          walk = t.nodes_[walk].children.at(tok);
          t.nodes_[walk].phrases_below.push_back(p);
        }
      }
      t.members_[static_cast<std::size_t>(t.nodes_[node].phrase)].push_back(ci);
    }
    return t;
  }

  const Node& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_phrases() const { return lengths_.size(); }
  int phrase_length(int p) const { return lengths_.at(static_cast<std::size_t>(p)); }
  const std::vector<std::size_t>& members(int p) const { return members_.at(static_cast<std::size_t>(p)); }
  std::size_t multiplicity(int p) const { return members(p).size(); }

  /// Sum of token lengths over distinct phrases; the highest bank index.
  int total_constraint_tokens() const { return total_tokens_; }

  std::size_t num_terminals() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.phrase >= 0; }));
  }

  int child(int node_id, TokenId tok) const {
    const auto& ch = nodes_[static_cast<std::size_t>(node_id)].children;
    auto it = ch.find(tok);
    return it == ch.end() ? -1 : it->second;
  }

 private:
  std::vector<Node> nodes_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<int> lengths_;
  int total_tokens_ = 0;
};

struct TrackerState {
  std::vector<bool> satisfied;  // indexed by distinct phrase
  int active = ConstraintTrie::kRoot;
  int satisfied_token_count = 0;

  friend bool operator==(const TrackerState&, const TrackerState&) = default;
};

inline TrackerState initial_state(const ConstraintTrie& trie) {
  TrackerState s;
  s.satisfied.assign(trie.num_phrases(), false);
  return s;
}

inline bool all_satisfied(const TrackerState& s) {
  return std::all_of(s.satisfied.begin(), s.satisfied.end(), [](bool b) { return b; });
}

namespace detail {

// A node is live while some phrase through it is still unsatisfied. Walking
// into dead nodes would count tokens of already-satisfied phrases twice.
inline bool live(const ConstraintTrie& trie, const TrackerState& s, int node) {
  for (int p : trie.node(node).phrases_below) {
    if (!s.satisfied[static_cast<std::size_t>(p)]) return true;
  }
  return false;
}

inline bool try_step(const ConstraintTrie& trie, TrackerState& s, TokenId tok) {
  const int next = trie.child(s.active, tok);
  if (next < 0 || !live(trie, s, next)) return false;
  s.active = next;
  ++s.satisfied_token_count;
  const int p = trie.node(next).phrase;
  if (p >= 0 && !s.satisfied[static_cast<std::size_t>(p)]) {
    // First match wins: the phrase is done and progress is now carried by
    // the satisfied set rather than the active depth.
    s.satisfied[static_cast<std::size_t>(p)] = true;
    s.active = ConstraintTrie::kRoot;
  }
  return true;
}

}  // namespace detail

/// Consumes one generated token. On a mismatch mid-phrase the partial
/// progress is abandoned and the token is retried from the root.
inline TrackerState advance(const ConstraintTrie& trie, TrackerState s, TokenId tok) {
  if (s.active != ConstraintTrie::kRoot) {
    if (detail::try_step(trie, s, tok)) return s;
    s.satisfied_token_count -= trie.node(s.active).depth;
    s.active = ConstraintTrie::kRoot;
  }
  detail::try_step(trie, s, tok);
  return s;
}

inline TrackerState replay(const ConstraintTrie& trie, const TokenSeq& tokens) {
  TrackerState s = initial_state(trie);
  for (TokenId t : tokens) s = advance(trie, std::move(s), t);
  return s;
}

/// Tokens that make progress on some unfulfilled constraint: continuations
/// of the active phrase plus first tokens of unsatisfied phrases. Sorted.
inline std::vector<TokenId> unmet_next_tokens(const TrackerState& s, const ConstraintTrie& trie) {
  std::vector<TokenId> out;
  auto collect = [&](int node) {
    for (const auto& [tok, child] : trie.node(node).children) {
      if (detail::live(trie, s, child)) out.push_back(tok);
    }
  };
  collect(ConstraintTrie::kRoot);
  if (s.active != ConstraintTrie::kRoot) collect(s.active);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Input constraint indices satisfied in `s`, ascending.
inline std::vector<std::size_t> satisfied_constraints(const TrackerState& s, const ConstraintTrie& trie) {
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < s.satisfied.size(); ++p) {
    if (!s.satisfied[p]) continue;
    const auto& m = trie.members(static_cast<int>(p));
    out.insert(out.end(), m.begin(), m.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace lexiguide
