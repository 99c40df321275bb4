#pragma once

// Constraint labelling and extraction: map gold concepts into the source,
// filter scored candidate spans by threshold and presence, and score the
// extracted set against the gold labels.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "lexiguide/corpus.hpp"

namespace lexiguide {

enum class LabelOrigin { gold_mapped, predicted };

struct ConstraintLabel {
  std::string surface;
  std::size_t span_begin = 0;  // token range [begin, end) in the normalized source
  std::size_t span_end = 0;
  LabelOrigin origin = LabelOrigin::gold_mapped;
};

struct GoldLabeling {
  std::vector<ConstraintLabel> labels;
  std::vector<std::string> unmapped;
};

struct ScoredCandidate {
  std::string surface;
  double score = 0.0;
};

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline double harmonic_mean(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

/// One label per gold concept found in the source (first occurrence).
inline GoldLabeling label_gold_constraints(const CorpusExample& ex, const NormalizationPolicy& policy) {
  GoldLabeling out;
  const auto source = tokenize(ex.source, policy);
  for (const auto& c : ex.gold_concepts) {
    const auto ctoks = tokenize(c, policy);
    if (auto pos = find_token_run(ctoks, source)) {
      out.labels.push_back({c, *pos, *pos + ctoks.size(), LabelOrigin::gold_mapped});
    } else {
      out.unmapped.push_back(c);
    }
  }
  return out;
}

/// Candidates scoring at least `threshold` whose surface occurs in the
/// source, deduplicated by normalized surface, highest score first.
inline std::vector<std::string> extract_constraints(std::string_view source, std::vector<ScoredCandidate> candidates,
                                                    double threshold, const NormalizationPolicy& policy = {}) {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const ScoredCandidate& a, const ScoredCandidate& b) { return a.score > b.score; });
  const auto source_tokens = tokenize(source, policy);
  std::set<std::string> seen;
  std::vector<std::string> out;
  for (const auto& c : candidates) {
    if (!std::isfinite(c.score) || c.score < threshold) continue;
    const auto ctoks = tokenize(c.surface, policy);
    if (!find_token_run(ctoks, source_tokens)) continue;
    if (seen.insert(join_tokens(ctoks)).second) out.push_back(c.surface);
  }
  return out;
}

/// Stand-in extractor: runs of capitalized tokens and digit-bearing tokens.
///
/// Score = 0.5 * (1 - position / n) + 0.5 * min(1, span_tokens / 3), so
/// earlier and longer spans rank higher. A sentence-initial capital counts
/// like any other; the heuristic has no sentence model.
inline std::vector<ScoredCandidate> heuristic_candidates(std::string_view source, const NormalizationPolicy& policy = {}) {
  NormalizationPolicy raw = policy;
  raw.casefold = false;
  const auto words = tokenize(source, raw);
  const double n = static_cast<double>(words.size());

  auto capitalized = [](const std::string& w) { return !w.empty() && std::isupper(static_cast<unsigned char>(w[0])); };
  auto has_digit = [](const std::string& w) {
    return std::any_of(w.begin(), w.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)) != 0; });
  };
  auto score = [&](std::size_t pos, std::size_t len) {
    return 0.5 * (1.0 - static_cast<double>(pos) / n) + 0.5 * std::min(1.0, static_cast<double>(len) / 3.0);
  };

  std::vector<ScoredCandidate> out;
  std::set<std::string> seen;
  auto emit = [&](std::size_t pos, std::size_t len) {
    std::vector<std::string> span(words.begin() + static_cast<std::ptrdiff_t>(pos),
                                  words.begin() + static_cast<std::ptrdiff_t>(pos + len));
    auto surface = join_tokens(span);
    if (seen.insert(normalize(surface, policy)).second) out.push_back({surface, score(pos, len)});
  };

  for (std::size_t i = 0; i < words.size();) {
    if (capitalized(words[i])) {
      std::size_t j = i;
      while (j < words.size() && capitalized(words[j])) ++j;
      emit(i, j - i);
      i = j;
    } else {
      if (has_digit(words[i])) emit(i, 1);
      ++i;
    }
  }
  return out;
}

struct SetMatchCounts {
  std::size_t predicted = 0;
  std::size_t gold = 0;
  std::size_t matched = 0;
};

inline SetMatchCounts match_counts(const std::vector<std::string>& predicted, const std::vector<std::string>& gold,
                                   const NormalizationPolicy& policy) {
  std::set<std::string> p, g;
  for (const auto& s : predicted) p.insert(normalize(s, policy));
  for (const auto& s : gold) g.insert(normalize(s, policy));
  SetMatchCounts c{p.size(), g.size(), 0};
  for (const auto& s : p) c.matched += g.count(s);
  return c;
}

/// P/R/F1 from summed counts. Empty predictions score P = 0, except that an
/// empty prediction against an empty gold set is a perfect score.
inline PRF prf_from_counts(const SetMatchCounts& c) {
  if (c.predicted == 0 && c.gold == 0) return {1.0, 1.0, 1.0};
  PRF r;
  r.precision = c.predicted ? static_cast<double>(c.matched) / static_cast<double>(c.predicted) : 0.0;
  r.recall = c.gold ? static_cast<double>(c.matched) / static_cast<double>(c.gold) : 0.0;
  r.f1 = harmonic_mean(r.precision, r.recall);
  return r;
}

inline PRF eval_extraction(const std::vector<std::string>& predicted, const std::vector<std::string>& gold,
                           const NormalizationPolicy& policy = {}) {
  return prf_from_counts(match_counts(predicted, gold, policy));
}

}  // namespace lexiguide
