#pragma once

// Corpus records, text normalization and token-level concept matching.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lexiguide/core.hpp"

namespace lexiguide {

enum class MissingCategory { spell, miss, ner, knowledge };

inline std::string_view to_string(MissingCategory c) {
  switch (c) {
    case MissingCategory::spell: return "Spell";
    case MissingCategory::miss: return "Miss";
    case MissingCategory::ner: return "NER";
    case MissingCategory::knowledge: return "Knowledge";
  }
  return "?";
}

inline std::optional<MissingCategory> parse_missing_category(std::string_view s) {
  if (s == "Spell") return MissingCategory::spell;
  if (s == "Miss") return MissingCategory::miss;
  if (s == "NER") return MissingCategory::ner;
  if (s == "Knowledge") return MissingCategory::knowledge;
  return std::nullopt;
}

struct CorpusExample {
  std::string id;
  std::string source;
  std::optional<std::string> target;
  std::optional<std::string> system_output;
  // Set by the decoder: whether the output terminated with <eos>.
  std::optional<bool> output_finished;
  std::vector<std::string> gold_concepts;
  std::optional<std::vector<std::string>> extracted_constraints;
  // Output-side concept annotations, used by the output-concepts preservation mode.
  std::optional<std::vector<std::string>> output_concepts;
  std::map<std::string, MissingCategory> missing_categories;
};

struct NormalizationPolicy {
  bool casefold = true;
  bool collapse_whitespace = true;
  bool strip_punctuation_edges = true;

  friend bool operator==(const NormalizationPolicy&, const NormalizationPolicy&) = default;
};

namespace detail {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
inline bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

inline std::vector<std::string> split_on(std::string_view text, bool collapse) {
  std::vector<std::string> words;
  if (collapse) {
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && is_space(text[i])) ++i;
      std::size_t j = i;
      while (j < text.size() && !is_space(text[j])) ++j;
      if (j > i) words.emplace_back(text.substr(i, j - i));
      i = j;
    }
    return words;
  }
  if (text.empty()) return words;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == ' ') {
      words.emplace_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  return words;
}

}  // namespace detail

/// Tokens of `text` after applying `policy`. Joining the result with single
/// spaces yields `normalize(text, policy)`.
inline std::vector<std::string> tokenize(std::string_view text, const NormalizationPolicy& policy) {
  std::string folded(text);
  if (policy.casefold) {
    for (char& c : folded) {
      if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  auto words = detail::split_on(folded, policy.collapse_whitespace);
  if (!policy.strip_punctuation_edges) return words;

  std::vector<std::string> out;
  out.reserve(words.size());
  for (auto& w : words) {
    if (w.empty()) {
      out.push_back(std::move(w));
      continue;
    }
    std::size_t b = 0, e = w.size();
    while (b < e && detail::is_punct(w[b])) ++b;
    while (e > b && detail::is_punct(w[e - 1])) --e;
    if (e > b) out.emplace_back(w.substr(b, e - b));
  }
  return out;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += tokens[i];
  }
  return s;
}

inline std::string normalize(std::string_view text, const NormalizationPolicy& policy) {
  return join_tokens(tokenize(text, policy));
}

/// Start index of the first contiguous occurrence of `needle` in `haystack`.
inline std::optional<std::size_t> find_token_run(const std::vector<std::string>& needle,
                                                 const std::vector<std::string>& haystack) {
  if (needle.empty() || needle.size() > haystack.size()) return std::nullopt;
  auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end());
  if (it == haystack.end()) return std::nullopt;
  return static_cast<std::size_t>(it - haystack.begin());
}

/// Exact matching: the concept's normalized tokens occur contiguously in the text's.
inline bool concept_in_text(std::string_view concept_text, std::string_view text,
                            const NormalizationPolicy& policy) {
  return find_token_run(tokenize(concept_text, policy), tokenize(text, policy)).has_value();
}

// ---------------------------------------------------------------------------
// Line-delimited JSON corpus files

namespace detail {

inline std::vector<std::string> string_array(const nlohmann::json& j, std::string_view field) {
  if (!j.is_array()) throw Error("field " + std::string(field) + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw Error("field " + std::string(field) + " must be an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace detail

inline CorpusExample example_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("record is not a JSON object");
  auto req_string = [&](const char* f) {
    auto it = j.find(f);
    if (it == j.end()) throw Error(std::string("missing field ") + f);
    if (!it->is_string()) throw Error(std::string("field ") + f + " must be a string");
    return it->get<std::string>();
  };
  auto opt_string = [&](const char* f) -> std::optional<std::string> {
    auto it = j.find(f);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw Error(std::string("field ") + f + " must be a string");
    return it->get<std::string>();
  };
  auto opt_array = [&](const char* f) -> std::optional<std::vector<std::string>> {
    auto it = j.find(f);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return detail::string_array(*it, f);
  };

  CorpusExample ex;
  ex.id = req_string("id");
  if (ex.id.empty()) throw Error("field id must be non-empty");
  ex.source = req_string("source");
  ex.target = opt_string("target");
  ex.system_output = opt_string("system_output");
  if (auto it = j.find("output_finished"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean()) throw Error("field output_finished must be a boolean");
    ex.output_finished = it->get<bool>();
  }
  ex.gold_concepts = opt_array("gold_concepts").value_or(std::vector<std::string>{});
  ex.extracted_constraints = opt_array("extracted_constraints");
  ex.output_concepts = opt_array("output_concepts");
  if (auto it = j.find("missing_categories"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw Error("field missing_categories must be an object");
    for (const auto& [concept_text, cat] : it->items()) {
      auto parsed = cat.is_string() ? parse_missing_category(cat.get<std::string>()) : std::nullopt;
      if (!parsed) throw Error("missing_categories: unknown category for '" + concept_text + "'");
      if (std::find(ex.gold_concepts.begin(), ex.gold_concepts.end(), concept_text) == ex.gold_concepts.end()) {
        throw Error("missing_categories: '" + concept_text + "' is not a gold concept");
      }
      ex.missing_categories.emplace(concept_text, *parsed);
    }
  }
  return ex;
}

inline nlohmann::json example_to_json(const CorpusExample& ex) {
  nlohmann::json j;
  j["id"] = ex.id;
  j["source"] = ex.source;
  if (ex.target) j["target"] = *ex.target;
  if (ex.system_output) j["system_output"] = *ex.system_output;
  if (ex.output_finished) j["output_finished"] = *ex.output_finished;
  j["gold_concepts"] = ex.gold_concepts;
  if (ex.extracted_constraints) j["extracted_constraints"] = *ex.extracted_constraints;
  if (ex.output_concepts) j["output_concepts"] = *ex.output_concepts;
  if (!ex.missing_categories.empty()) {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [c, cat] : ex.missing_categories) m[c] = std::string(to_string(cat));
    j["missing_categories"] = m;
  }
  return j;
}

/// Reads every non-blank line of `in` as a JSON value. Errors name the 1-based line.
inline std::vector<std::pair<std::size_t, nlohmann::json>> read_jsonl(std::istream& in) {
  std::vector<std::pair<std::size_t, nlohmann::json>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), detail::is_space)) continue;
    try {
      out.emplace_back(lineno, nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error("line " + std::to_string(lineno) + ": malformed JSON");
    }
  }
  return out;
}

inline std::vector<CorpusExample> parse_corpus(std::istream& in) {
  std::vector<CorpusExample> out;
  std::set<std::string> seen;
  for (auto& [lineno, j] : read_jsonl(in)) {
    try {
      out.push_back(example_from_json(j));
    } catch (const Error& e) {
      throw Error("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!seen.insert(out.back().id).second) {
      throw Error("line " + std::to_string(lineno) + ": duplicate id " + out.back().id);
    }
  }
  return out;
}

inline std::vector<CorpusExample> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file " + path);
  return parse_corpus(in);
}

inline void write_corpus(std::ostream& out, const std::vector<CorpusExample>& corpus) {
  for (const auto& ex : corpus) out << example_to_json(ex).dump() << '\n';
}

inline void save_corpus(const std::string& path, const std::vector<CorpusExample>& corpus) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write corpus file " + path);
  write_corpus(out, corpus);
}

}  // namespace lexiguide
