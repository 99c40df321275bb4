#pragma once

// Concept-level measurement: availability and fulfillment of gold concepts,
// preservation P/R/F1 over source-available concepts, missing-category
// rollups and ROUGE-1/2/L.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexiguide/corpus.hpp"
#include "lexiguide/extract.hpp"

namespace lexiguide {

enum class Averaging { micro, macro };

inline std::string_view to_string(Averaging a) { return a == Averaging::micro ? "micro" : "macro"; }

struct ExampleConceptCounts {
  std::string id;
  std::size_t concepts = 0;             // |C|
  std::size_t in_source = 0;            // |C ∩ X|
  std::size_t in_output = 0;            // |C ∩ Y|
  std::size_t in_output_and_source = 0; // |C ∩ Y ∩ X|
};

struct ConceptStatsReport {
  Averaging averaging = Averaging::micro;
  std::size_t num_examples = 0;
  std::size_t examples_with_concepts = 0;
  double mean_num_concepts = 0.0;
  double availability = 0.0;
  std::optional<double> fulfillment_all;
  std::optional<double> fulfillment_available;  // undefined when no concept is available
  std::vector<ExampleConceptCounts> per_example;
};

namespace detail {

inline ExampleConceptCounts count_concepts(const CorpusExample& ex, const NormalizationPolicy& policy, bool with_output) {
  ExampleConceptCounts c;
  c.id = ex.id;
  const auto source = tokenize(ex.source, policy);
  std::vector<std::string> output;
  if (with_output) output = tokenize(*ex.system_output, policy);
  for (const auto& concept_text : ex.gold_concepts) {
    const auto ct = tokenize(concept_text, policy);
    const bool in_x = find_token_run(ct, source).has_value();
    ++c.concepts;
    c.in_source += in_x;
    if (with_output && find_token_run(ct, output)) {
      ++c.in_output;
      c.in_output_and_source += in_x;
    }
  }
  return c;
}

inline std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

// Micro: ratio of summed counts. Macro: mean of per-example ratios over
// examples whose denominator is positive.
template <class Num, class Den>
std::optional<double> average(const std::vector<ExampleConceptCounts>& rows, Averaging mode, Num num, Den den) {
  if (mode == Averaging::micro) {
    std::size_t n = 0, d = 0;
    for (const auto& r : rows) {
      n += num(r);
      d += den(r);
    }
    return ratio(n, d);
  }
  double sum = 0.0;
  std::size_t k = 0;
  for (const auto& r : rows) {
    if (den(r) == 0) continue;
    sum += static_cast<double>(num(r)) / static_cast<double>(den(r));
    ++k;
  }
  if (k == 0) return std::nullopt;
  return sum / static_cast<double>(k);
}

}  // namespace detail

/// |C ∩ X| / |C|. Examples without gold concepts drop out of the ratio;
/// mean |C| is taken over every example.
inline ConceptStatsReport availability_stats(const std::vector<CorpusExample>& corpus, const NormalizationPolicy& policy = {},
                                             Averaging averaging = Averaging::micro) {
  ConceptStatsReport r;
  r.averaging = averaging;
  r.num_examples = corpus.size();
  std::size_t total = 0;
  for (const auto& ex : corpus) {
    r.per_example.push_back(detail::count_concepts(ex, policy, false));
    total += r.per_example.back().concepts;
    r.examples_with_concepts += r.per_example.back().concepts > 0;
  }
  if (r.examples_with_concepts == 0) throw Error("availability: no example has gold concepts");
  r.mean_num_concepts = static_cast<double>(total) / static_cast<double>(corpus.size());
  r.availability = *detail::average(
      r.per_example, averaging, [](const auto& c) { return c.in_source; }, [](const auto& c) { return c.concepts; });
  return r;
}

/// Availability plus fulfillment_all = |C ∩ Y| / |C| and
/// fulfillment_available = |C ∩ Y ∩ X| / |C ∩ X|.
inline ConceptStatsReport fulfillment_stats(const std::vector<CorpusExample>& corpus, const NormalizationPolicy& policy = {},
                                            Averaging averaging = Averaging::micro) {
  std::vector<std::string> missing;
  for (const auto& ex : corpus) {
    if (!ex.system_output) missing.push_back(ex.id);
  }
  if (!missing.empty()) {
    std::string ids;
    for (const auto& id : missing) ids += (ids.empty() ? "" : ",") + id;
    throw Error("fulfillment: missing system_output for ids " + ids);
  }
  ConceptStatsReport r = availability_stats(corpus, policy, averaging);
  r.per_example.clear();
  for (const auto& ex : corpus) r.per_example.push_back(detail::count_concepts(ex, policy, true));
  r.fulfillment_all = detail::average(
      r.per_example, averaging, [](const auto& c) { return c.in_output; }, [](const auto& c) { return c.concepts; });
  r.fulfillment_available = detail::average(
      r.per_example, averaging, [](const auto& c) { return c.in_output_and_source; },
      [](const auto& c) { return c.in_source; });
  return r;
}

/// Share of gold concepts that are genuinely absent from the source:
/// (1 - availability) * miss_fraction.
inline double estimate_actual_missing(double availability, double miss_fraction) {
  if (!(availability >= 0.0 && availability <= 1.0)) throw Error("availability must lie in [0, 1]");
  if (!(miss_fraction >= 0.0 && miss_fraction <= 1.0)) throw Error("miss fraction must lie in [0, 1]");
  return (1.0 - availability) * miss_fraction;
}

enum class PreservationMode { enforced_constraints, output_concepts };

inline std::string_view to_string(PreservationMode m) {
  return m == PreservationMode::enforced_constraints ? "enforced-constraints" : "output-concepts";
}

struct PreservationReport {
  PreservationMode mode = PreservationMode::enforced_constraints;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::size_t examples_counted = 0;
  std::size_t examples_excluded = 0;  // no gold concept available in the source
  std::size_t gold = 0;
  std::size_t matched = 0;
  std::size_t predicted = 0;
  std::size_t predicted_correct = 0;
};

/// Preservation of source-available gold concepts. Gold per example: gold
/// concepts present in the source; recall counts those found in the output.
/// Predicted set: enforced constraints that appear in the output, or the
/// output-side concept annotations. Micro-averaged.
inline PreservationReport preservation_prf(const std::vector<CorpusExample>& corpus, PreservationMode mode,
                                           const NormalizationPolicy& policy = {}) {
  PreservationReport r;
  r.mode = mode;
  for (const auto& ex : corpus) {
    if (!ex.system_output) throw Error("preservation: missing system_output for id " + ex.id);
    if (mode == PreservationMode::enforced_constraints && !ex.extracted_constraints) {
      throw Error("preservation: missing extracted_constraints for id " + ex.id);
    }
    if (mode == PreservationMode::output_concepts && !ex.output_concepts) {
      throw Error("preservation: output-concepts mode needs output_concepts annotations (id " + ex.id + ")");
    }
  }
  for (const auto& ex : corpus) {
    const auto source = tokenize(ex.source, policy);
    const auto output = tokenize(*ex.system_output, policy);
    std::set<std::string> gold;
    for (const auto& c : ex.gold_concepts) {
      const auto ct = tokenize(c, policy);
      if (find_token_run(ct, source)) gold.insert(join_tokens(ct));
    }
    if (gold.empty()) {
      ++r.examples_excluded;
      continue;
    }
    ++r.examples_counted;
    r.gold += gold.size();
    for (const auto& g : gold) r.matched += find_token_run(tokenize(g, policy), output).has_value();

    std::set<std::string> predicted;
    if (mode == PreservationMode::enforced_constraints) {
      for (const auto& c : *ex.extracted_constraints) {
        const auto ct = tokenize(c, policy);
        if (find_token_run(ct, output)) predicted.insert(join_tokens(ct));
      }
    } else {
      for (const auto& c : *ex.output_concepts) {
        const auto ct = tokenize(c, policy);
        if (!ct.empty()) predicted.insert(join_tokens(ct));
      }
    }
    r.predicted += predicted.size();
    for (const auto& p : predicted) r.predicted_correct += gold.count(p);
  }
  r.recall = detail::ratio(r.matched, r.gold);
  r.precision = detail::ratio(r.predicted_correct, r.predicted);
  if (r.precision && r.recall) r.f1 = harmonic_mean(*r.precision, *r.recall);
  return r;
}

struct CategoryRollup {
  std::size_t annotated = 0;
  std::map<MissingCategory, std::size_t> counts;

  double share(MissingCategory c) const {
    auto it = counts.find(c);
    if (annotated == 0 || it == counts.end()) return 0.0;
    return static_cast<double>(it->second) / static_cast<double>(annotated);
  }
};

/// Per-category shares of manually categorized missing concepts. Every
/// annotated concept must be absent from its source.
inline CategoryRollup missing_category_rollup(const std::vector<CorpusExample>& corpus, const NormalizationPolicy& policy = {}) {
  CategoryRollup r;
  for (const auto& ex : corpus) {
    for (const auto& [concept_text, cat] : ex.missing_categories) {
      if (concept_in_text(concept_text, ex.source, policy)) {
        throw Error("missing_categories: '" + concept_text + "' is present in the source of " + ex.id);
      }
      ++r.annotated;
      ++r.counts[cat];
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// ROUGE

enum class RougeVariant { rouge1, rouge2, rougeL };

namespace detail {

inline std::map<std::vector<std::string>, std::size_t> ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> out;
  if (toks.size() < n) return out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    ++out[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                   toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline PRF prf(std::size_t overlap, std::size_t cand_total, std::size_t ref_total) {
  // Two texts with no units at all are identical as far as ROUGE can see.
  if (cand_total == 0 && ref_total == 0) return {1.0, 1.0, 1.0};
  PRF r;
  r.precision = cand_total ? static_cast<double>(overlap) / static_cast<double>(cand_total) : 0.0;
  r.recall = ref_total ? static_cast<double>(overlap) / static_cast<double>(ref_total) : 0.0;
  r.f1 = harmonic_mean(r.precision, r.recall);
  return r;
}

}  // namespace detail

/// Sentence-level ROUGE over normalized tokens. R-1/R-2 clip n-gram counts;
/// R-L uses the LCS of the whole texts.
inline PRF rouge(std::string_view candidate, std::string_view reference, RougeVariant variant,
                 const NormalizationPolicy& policy = {}) {
  const auto c = tokenize(candidate, policy);
  const auto r = tokenize(reference, policy);
  if (variant == RougeVariant::rougeL) return detail::prf(detail::lcs_length(c, r), c.size(), r.size());

  const std::size_t n = variant == RougeVariant::rouge1 ? 1 : 2;
  const auto cc = detail::ngram_counts(c, n);
  const auto rc = detail::ngram_counts(r, n);
  std::size_t overlap = 0, ct = 0, rt = 0;
  for (const auto& [g, k] : cc) {
    ct += k;
    if (auto it = rc.find(g); it != rc.end()) overlap += std::min(k, it->second);
  }
  for (const auto& [g, k] : rc) rt += k;
  return detail::prf(overlap, ct, rt);
}

// ---------------------------------------------------------------------------
// Report documents

inline nlohmann::json optional_number(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

inline nlohmann::json to_json(const ConceptStatsReport& r, bool with_per_example = false) {
  nlohmann::json j;
  j["averaging"] = std::string(to_string(r.averaging));
  j["num_examples"] = r.num_examples;
  j["examples_with_concepts"] = r.examples_with_concepts;
  j["mean_num_concepts"] = r.mean_num_concepts;
  j["availability"] = r.availability;
  if (r.fulfillment_all) j["fulfillment_all"] = *r.fulfillment_all;
  if (r.fulfillment_all) j["fulfillment_available"] = optional_number(r.fulfillment_available);
  if (with_per_example) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& c : r.per_example) {
      rows.push_back({{"id", c.id}, {"concepts", c.concepts}, {"in_source", c.in_source}, {"in_output", c.in_output},
                      {"in_output_and_source", c.in_output_and_source}});
    }
    j["per_example"] = rows;
  }
  return j;
}

inline nlohmann::json to_json(const PreservationReport& r) {
  return {{"mode", std::string(to_string(r.mode))},
          {"precision", optional_number(r.precision)},
          {"recall", optional_number(r.recall)},
          {"f1", optional_number(r.f1)},
          {"examples_counted", r.examples_counted},
          {"examples_excluded", r.examples_excluded}};
}

inline nlohmann::json to_json(const PRF& p) { return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}}; }

inline nlohmann::json to_json(const CategoryRollup& r) {
  nlohmann::json j;
  j["annotated"] = r.annotated;
  nlohmann::json shares = nlohmann::json::object();
  for (auto c : {MissingCategory::spell, MissingCategory::miss, MissingCategory::ner, MissingCategory::knowledge}) {
    shares[std::string(to_string(c))] = r.share(c);
  }
  j["shares"] = shares;
  return j;
}

}  // namespace lexiguide
