#pragma once

// Beam search, dynamic beam allocation (DBA) and its denoised variant (DDBA).
//
// One engine serves all three modes. Per step:
//   1. score every live hypothesis in a single batched scorer call;
//   2. collect candidates from three sources: the global top-B extensions,
//      each hypothesis's unmet constraint tokens (DDBA keeps only those whose
//      step probability clears tau), and each hypothesis's single best token;
//   3. move <eos> extensions to the finished pool, route the rest into banks
//      by satisfied constraint-token count and trim to B.
// <eos> is admitted only when every constraint is met, except in DDBA with
// the relaxed policy. At step max_len only <eos> extensions are produced.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexiguide/constraint_state.hpp"
#include "lexiguide/scorer.hpp"

namespace lexiguide {

enum class DecodeMode { plain, dba, ddba };
enum class LengthNormalization { off, divide_by_length };
enum class EosPolicy { relaxed, gated };

inline constexpr std::size_t kRecommendedMaxBeam = 20;

struct DecodeConfig {
  std::size_t beam_size = 10;
  std::size_t max_len = 64;
  LengthNormalization length_normalization = LengthNormalization::off;
  DecodeMode mode = DecodeMode::plain;
  bool record_trace = false;

  void validate() const {
    if (beam_size < 1) throw Error("beam size must be >= 1");
  }

  std::vector<std::string> warnings() const {
    std::vector<std::string> w;
    if (beam_size > kRecommendedMaxBeam) {
      w.push_back("beam size " + std::to_string(beam_size) + " exceeds the recommended maximum of " +
                  std::to_string(kRecommendedMaxBeam));
    }
    return w;
  }
};

struct DenoiseConfig {
  double tau = 0.05;  // probability (not log) threshold on a constraint token's step probability
  EosPolicy eos_policy = EosPolicy::relaxed;
  // Off by default. When > 0, added per satisfied constraint token to the
  // winner-selection score of finished DDBA hypotheses.
  double satisfaction_bonus = 0.0;

  void validate() const {
    if (!(tau >= 0.0 && tau < 1.0)) throw Error("tau must lie in [0, 1)");
    if (!(satisfaction_bonus >= 0.0) || !std::isfinite(satisfaction_bonus)) throw Error("satisfaction bonus must be >= 0");
  }
};

struct Hypothesis {
  TokenSeq tokens;  // generated tokens, without the prompt and without <eos>
  double logprob = 0.0;
  TrackerState tracker;
  bool finished = false;

  int bank() const { return tracker.satisfied_token_count; }
};

/// Live hypotheses partitioned by satisfied constraint-token count.
struct Beam {
  std::vector<std::vector<Hypothesis>> banks;
  std::size_t capacity = 0;

  Beam() = default;
  Beam(std::size_t num_banks, std::size_t cap) : banks(num_banks), capacity(cap) {}

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& b : banks) n += b.size();
    return n;
  }
  bool empty() const { return size() == 0; }

  /// Hypotheses in canonical order: bank 0 first, then by rank within bank.
  /// Score rows passed to `step_candidates` follow this order.
  std::vector<const Hypothesis*> live() const {
    std::vector<const Hypothesis*> out;
    for (const auto& b : banks)
      for (const auto& h : b) out.push_back(&h);
    return out;
  }
};

enum CandidateSource : std::uint8_t {
  kFromTopK = 1,
  kFromConstraint = 2,
  kFromBest = 4,
};

struct Candidate {
  std::size_t hyp = 0;  // index into Beam::live()
  TokenId token = 0;
  double logprob = 0.0;  // extended sequence logprob
  std::uint8_t sources = 0;
};

struct FilteredToken {
  std::size_t hyp;
  TokenId token;
  double prob;
};

struct StepTrace {
  std::size_t step = 0;
  std::vector<std::pair<std::size_t, TokenId>> injected;
  std::vector<FilteredToken> filtered;
  std::vector<std::size_t> bank_sizes;
  std::size_t finished_added = 0;
};

struct DecodeResult {
  TokenSeq tokens;
  double logprob = kNegInf;
  std::vector<std::size_t> satisfied_constraints;  // indices into the input ConstraintSet
  int satisfied_token_count = 0;
  bool finished = false;
  std::vector<StepTrace> trace;

  friend bool operator==(const DecodeResult& a, const DecodeResult& b) {
    return a.tokens == b.tokens && a.logprob == b.logprob && a.satisfied_constraints == b.satisfied_constraints &&
           a.satisfied_token_count == b.satisfied_token_count && a.finished == b.finished;
  }
};

using StepObserver = std::function<void(std::size_t step, const Beam& beam)>;

namespace detail {

// Higher logprob first; equal scores fall back to the lexicographically
// smaller token sequence. Candidates within a step all have equal length.
inline bool candidate_before(const Candidate& a, const Candidate& b, const std::vector<const Hypothesis*>& live) {
  if (a.logprob != b.logprob) return a.logprob > b.logprob;
  const auto& ta = live[a.hyp]->tokens;
  const auto& tb = live[b.hyp]->tokens;
  if (ta != tb) return std::lexicographical_compare(ta.begin(), ta.end(), tb.begin(), tb.end());
  return a.token < b.token;
}

inline bool hypothesis_rank_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.logprob != b.logprob) return a.logprob > b.logprob;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return std::lexicographical_compare(a.tokens.begin(), a.tokens.end(), b.tokens.begin(), b.tokens.end());
}

inline bool eos_admissible(const Hypothesis& h, DecodeMode mode, const DenoiseConfig& denoise) {
  switch (mode) {
    case DecodeMode::plain: return true;
    case DecodeMode::dba: return all_satisfied(h.tracker);
    case DecodeMode::ddba: return denoise.eos_policy == EosPolicy::relaxed || all_satisfied(h.tracker);
  }
  return false;
}

}  // namespace detail

/// Candidate extensions of the live beam, duplicates merged with their
/// source flags OR-ed. Result is sorted by (hyp, token).
inline std::vector<Candidate> step_candidates(const Beam& beam, const StepScores& scores, const ConstraintTrie& trie,
                                              DecodeMode mode, const DenoiseConfig& denoise, TokenId eos_id,
                                              bool final_step = false, StepTrace* trace = nullptr) {
  const auto live = beam.live();
  if (scores.rows() != live.size()) throw Error("step_candidates: score rows do not match live hypotheses");
  const std::size_t vocab = scores.cols();

  std::vector<Candidate> pool;  // admissible extensions, one per (hyp, token)
  auto admissible = [&](std::size_t h, TokenId t) {
    if (t == eos_id) return detail::eos_admissible(*live[h], mode, denoise);
    return !final_step;
  };

  std::vector<std::uint8_t> flags(live.size() * vocab, 0);
  auto mark = [&](std::size_t h, TokenId t, std::uint8_t src) { flags[h * vocab + static_cast<std::size_t>(t)] |= src; };

  if (final_step) {
    for (std::size_t h = 0; h < live.size(); ++h) {
      if (admissible(h, eos_id) && std::isfinite(scores.at(h, static_cast<std::size_t>(eos_id)))) mark(h, eos_id, kFromTopK);
    }
  } else {
    // (1) global top-B and (3) per-hypothesis best.
    for (std::size_t h = 0; h < live.size(); ++h) {
      const auto row = scores.row(h);
      std::optional<TokenId> best;
      for (std::size_t t = 0; t < vocab; ++t) {
        const auto tok = static_cast<TokenId>(t);
        if (!std::isfinite(row[t]) || !admissible(h, tok)) continue;
        pool.push_back({h, tok, live[h]->logprob + row[t], 0});
        if (!best || row[t] > row[static_cast<std::size_t>(*best)]) best = tok;
      }
      if (best) mark(h, *best, kFromBest);
    }
    const std::size_t k = std::min(beam.capacity, pool.size());
    auto before = [&](const Candidate& a, const Candidate& b) { return detail::candidate_before(a, b, live); };
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k), pool.end(), before);
    for (std::size_t i = 0; i < k; ++i) mark(pool[i].hyp, pool[i].token, kFromTopK);

    // (2) unmet constraint tokens.
    if (mode != DecodeMode::plain) {
      for (std::size_t h = 0; h < live.size(); ++h) {
        for (TokenId tok : unmet_next_tokens(live[h]->tracker, trie)) {
          const double lp = scores.at(h, static_cast<std::size_t>(tok));
          if (!std::isfinite(lp)) continue;
          if (mode == DecodeMode::ddba) {
            const double p = std::exp(lp);
            if (p < denoise.tau) {
              if (trace) trace->filtered.push_back({h, tok, p});
              continue;
            }
          }
          mark(h, tok, kFromConstraint);
          if (trace) trace->injected.emplace_back(h, tok);
        }
      }
    }
  }

  std::vector<Candidate> out;
  for (std::size_t h = 0; h < live.size(); ++h) {
    for (std::size_t t = 0; t < vocab; ++t) {
      const auto f = flags[h * vocab + t];
      if (f) out.push_back({h, static_cast<TokenId>(t), live[h]->logprob + scores.at(h, t), f});
    }
  }
  return out;
}

/// Routes hypotheses into banks by satisfied_token_count and keeps
/// min(B, |candidates|) of them. Slots are handed out one at a time, sweeping
/// banks from the highest index down, so every bank gets at most ceil(B/n)
/// before any bank gets more and spare slots drift toward fuller satisfaction.
inline Beam allocate_banks(std::vector<Hypothesis> candidates, std::size_t beam_size, std::size_t num_banks) {
  Beam beam(num_banks, beam_size);
  std::vector<std::vector<Hypothesis>> pending(num_banks);
  for (auto& h : candidates) {
    const auto b = static_cast<std::size_t>(h.bank());
    if (b >= num_banks) throw Error("allocate_banks: hypothesis bank out of range");
    pending[b].push_back(std::move(h));
  }
  for (auto& p : pending) std::sort(p.begin(), p.end(), detail::hypothesis_rank_before);

  std::size_t total = 0;
  for (const auto& p : pending) total += p.size();
  std::size_t remaining = std::min(beam_size, total);
  std::vector<std::size_t> take(num_banks, 0);
  while (remaining > 0) {
    for (std::size_t i = num_banks; i-- > 0 && remaining > 0;) {
      if (take[i] < pending[i].size()) {
        ++take[i];
        --remaining;
      }
    }
  }
  for (std::size_t i = 0; i < num_banks; ++i) {
    pending[i].resize(take[i]);
    beam.banks[i] = std::move(pending[i]);
  }
  return beam;
}

namespace detail {

inline double selection_score(const Hypothesis& h, const DecodeConfig& config, const DenoiseConfig& denoise) {
  double s = h.logprob;
  if (config.length_normalization == LengthNormalization::divide_by_length) {
    const auto len = h.tokens.size() + (h.finished ? 1 : 0);
    s /= static_cast<double>(std::max<std::size_t>(len, 1));
  }
  if (config.mode == DecodeMode::ddba) s += denoise.satisfaction_bonus * h.tracker.satisfied_token_count;
  return s;
}

inline bool selection_before(const Hypothesis& a, const Hypothesis& b, const DecodeConfig& config, const DenoiseConfig& denoise) {
  const double sa = selection_score(a, config, denoise);
  const double sb = selection_score(b, config, denoise);
  if (sa != sb) return sa > sb;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return std::lexicographical_compare(a.tokens.begin(), a.tokens.end(), b.tokens.begin(), b.tokens.end());
}

}  // namespace detail

/// Runs the search in `config.mode`. `constraints` must be empty for plain mode.
template <StepScorer S>
DecodeResult decode(const S& scorer, const TokenSeq& prompt, const ConstraintSet& constraints, const DecodeConfig& config,
                    const DenoiseConfig& denoise = {}, const StepObserver& observer = {}) {
  config.validate();
  if (config.mode == DecodeMode::ddba) denoise.validate();
  if (config.mode == DecodeMode::plain && !constraints.empty()) throw Error("plain beam search takes no constraints");

  const Vocabulary& vocab = scorer.vocabulary();
  const TokenId eos = vocab.eos_id();
  const ConstraintTrie trie = ConstraintTrie::build(constraints, vocab);
  const std::size_t num_banks = static_cast<std::size_t>(trie.total_constraint_tokens()) + 1;

  Beam beam(num_banks, config.beam_size);
  beam.banks[0].push_back(Hypothesis{{}, 0.0, initial_state(trie), false});
  std::vector<Hypothesis> finished;
  DecodeResult result;

  const bool exact_early_stop = config.length_normalization == LengthNormalization::off &&
                                !(config.mode == DecodeMode::ddba && denoise.satisfaction_bonus > 0.0);

  for (std::size_t step = 0; step <= config.max_len; ++step) {
    const auto live = beam.live();
    std::vector<TokenSeq> prefixes;
    prefixes.reserve(live.size());
    for (const Hypothesis* h : live) {
      TokenSeq p = prompt;
      p.insert(p.end(), h->tokens.begin(), h->tokens.end());
      prefixes.push_back(std::move(p));
    }
    const StepScores scores = scorer.score_step(prefixes);
    if (scores.rows() != live.size() || scores.cols() != vocab.size()) throw Error("scorer returned a mis-shaped score matrix");

    StepTrace trace;
    trace.step = step;
    const auto cands = step_candidates(beam, scores, trie, config.mode, denoise, eos, step == config.max_len,
                                       config.record_trace ? &trace : nullptr);

    std::vector<Hypothesis> extended;
    for (const auto& c : cands) {
      const Hypothesis& h = *live[c.hyp];
      if (c.token == eos) {
        finished.push_back(Hypothesis{h.tokens, c.logprob, h.tracker, true});
        ++trace.finished_added;
      } else {
        Hypothesis e{h.tokens, c.logprob, advance(trie, h.tracker, c.token), false};
        e.tokens.push_back(c.token);
        extended.push_back(std::move(e));
      }
    }
    Beam next = allocate_banks(std::move(extended), config.beam_size, num_banks);
    if (config.record_trace) {
      for (const auto& b : next.banks) trace.bank_sizes.push_back(b.size());
      result.trace.push_back(std::move(trace));
    }
    if (observer) observer(step, next);
    if (next.empty()) break;
    beam = std::move(next);

    if (exact_early_stop && !finished.empty()) {
      double best_finished = kNegInf, best_live = kNegInf;
      for (const auto& f : finished) best_finished = std::max(best_finished, f.logprob);
      for (const Hypothesis* h : beam.live()) best_live = std::max(best_live, h->logprob);
      // Extensions never gain probability, so no live hypothesis can win.
      if (best_finished >= best_live) break;
    }
  }

  auto before = [&](const Hypothesis& a, const Hypothesis& b) { return detail::selection_before(a, b, config, denoise); };
  const Hypothesis* winner = nullptr;
  if (!finished.empty()) {
    winner = &*std::min_element(finished.begin(), finished.end(), before);
  } else {
    for (std::size_t b = beam.banks.size(); b-- > 0;) {
      if (beam.banks[b].empty()) continue;
      winner = &*std::min_element(beam.banks[b].begin(), beam.banks[b].end(), before);
      break;
    }
  }
  if (winner) {
    result.tokens = winner->tokens;
    result.logprob = winner->logprob;
    result.finished = winner->finished;
    result.satisfied_token_count = winner->tracker.satisfied_token_count;
    result.satisfied_constraints = satisfied_constraints(winner->tracker, trie);
  }
  return result;
}

template <StepScorer S>
DecodeResult beam_search(const S& scorer, const TokenSeq& prompt, const DecodeConfig& config) {
  if (config.mode != DecodeMode::plain) throw Error("beam_search requires mode plain");
  return decode(scorer, prompt, {}, config);
}

template <StepScorer S>
DecodeResult decode_dba(const S& scorer, const TokenSeq& prompt, const ConstraintSet& constraints, const DecodeConfig& config) {
  if (config.mode != DecodeMode::dba) throw Error("decode_dba requires mode dba");
  return decode(scorer, prompt, constraints, config);
}

template <StepScorer S>
DecodeResult decode_ddba(const S& scorer, const TokenSeq& prompt, const ConstraintSet& constraints, const DecodeConfig& config,
                         const DenoiseConfig& denoise) {
  if (config.mode != DecodeMode::ddba) throw Error("decode_ddba requires mode ddba");
  return decode(scorer, prompt, constraints, config, denoise);
}

inline nlohmann::json trace_to_json(const StepTrace& t) {
  nlohmann::json j;
  j["step"] = t.step;
  nlohmann::json inj = nlohmann::json::array();
  for (const auto& [h, tok] : t.injected) inj.push_back({{"hyp", h}, {"token", tok}});
  nlohmann::json filt = nlohmann::json::array();
  for (const auto& f : t.filtered) filt.push_back({{"hyp", f.hyp}, {"token", f.token}, {"prob", f.prob}});
  j["injected"] = inj;
  j["filtered"] = filt;
  j["banks"] = t.bank_sizes;
  j["finished"] = t.finished_added;
  return j;
}

inline std::string_view to_string(DecodeMode m) {
  switch (m) {
    case DecodeMode::plain: return "plain";
    case DecodeMode::dba: return "dba";
    case DecodeMode::ddba: return "ddba";
  }
  return "?";
}

}  // namespace lexiguide
