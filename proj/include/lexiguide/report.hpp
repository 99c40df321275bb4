#pragma once

// Evaluation report documents and their plain-text rendering.
//
// Report JSON (every section optional except the header fields):
//   {"averaging":"micro","num_examples":N,
//    "concepts":{"mean_num_concepts","availability","fulfillment_all","fulfillment_available"},
//    "estimated_actual_missing":x,
//    "missing_categories":{"annotated":n,"shares":{"Spell":..,"Miss":..,"NER":..,"Knowledge":..}},
//    "preservation":{"mode","precision","recall","f1","examples_counted","examples_excluded"},
//    "extraction":{"precision","recall","f1","examples"},
//    "rouge":{"rouge1":{"precision","recall","f1"},"rouge2":{..},"rougeL":{..}}}
// Ratios are fractions in [0,1]; null marks an undefined ratio.

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexiguide/core.hpp"

namespace lexiguide {

namespace detail {

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline const nlohmann::json& require(const nlohmann::json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw Error("report: missing field " + path + key);
  return j.at(key);
}

inline double number_field(const nlohmann::json& j, const std::string& key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_number()) throw Error("report: field " + path + key + " must be a number");
  return v.get<double>();
}

// Fraction rendered as a percentage with one decimal, or "n/a" for null.
inline std::string percent_field(const nlohmann::json& j, const std::string& key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (v.is_null()) return "n/a";
  if (!v.is_number()) throw Error("report: field " + path + key + " must be a number or null");
  const double x = v.get<double>();
  if (x < 0.0 || x > 1.0) throw Error("report: field " + path + key + " must lie in [0,1]");
  return format_fixed(100.0 * x, 1) + "%";
}

struct Row {
  std::string section, metric, value;
};

}  // namespace detail

/// Aligned text table with a fixed section and metric order.
inline std::string render_report(const nlohmann::json& report) {
  using detail::Row;
  if (!report.is_object()) throw Error("report: document is not an object");
  const auto& avg = detail::require(report, "averaging", "");
  if (!avg.is_string()) throw Error("report: field averaging must be a string");
  const auto n = detail::require(report, "num_examples", "");
  if (!n.is_number_unsigned() && !n.is_number_integer()) throw Error("report: field num_examples must be an integer");

  std::vector<Row> rows;
  if (report.contains("concepts")) {
    const auto& c = report.at("concepts");
    const std::string p = "concepts.";
    rows.push_back({"concepts", "mean |C|", detail::format_fixed(detail::number_field(c, "mean_num_concepts", p), 2)});
    rows.push_back({"concepts", "availability |C∩X|/|C|", detail::percent_field(c, "availability", p)});
    if (c.contains("fulfillment_all")) {
      rows.push_back({"concepts", "fulfillment |C∩Y|/|C|", detail::percent_field(c, "fulfillment_all", p)});
      rows.push_back({"concepts", "fulfillment |C∩Y|/|C∩X|", detail::percent_field(c, "fulfillment_available", p)});
    }
  }
  if (report.contains("estimated_actual_missing")) {
    rows.push_back({"concepts", "estimated actual missing", detail::percent_field(report, "estimated_actual_missing", "")});
  }
  if (report.contains("missing_categories")) {
    const auto& m = report.at("missing_categories");
    const std::string p = "missing_categories.";
    rows.push_back({"missing", "annotated", detail::format_fixed(detail::number_field(m, "annotated", p), 0)});
    const auto& shares = detail::require(m, "shares", p);
    for (const char* cat : {"Spell", "Miss", "NER", "Knowledge"}) {
      rows.push_back({"missing", cat, detail::percent_field(shares, cat, p + "shares.")});
    }
  }
  if (report.contains("preservation")) {
    const auto& s = report.at("preservation");
    const std::string p = "preservation.";
    const auto& mode = detail::require(s, "mode", p);
    if (!mode.is_string()) throw Error("report: field preservation.mode must be a string");
    rows.push_back({"preservation", "mode", mode.get<std::string>()});
    rows.push_back({"preservation", "precision", detail::percent_field(s, "precision", p)});
    rows.push_back({"preservation", "recall", detail::percent_field(s, "recall", p)});
    rows.push_back({"preservation", "f1", detail::percent_field(s, "f1", p)});
    rows.push_back({"preservation", "examples excluded",
                    detail::format_fixed(detail::number_field(s, "examples_excluded", p), 0)});
  }
  if (report.contains("extraction")) {
    const auto& s = report.at("extraction");
    const std::string p = "extraction.";
    rows.push_back({"extraction", "precision", detail::percent_field(s, "precision", p)});
    rows.push_back({"extraction", "recall", detail::percent_field(s, "recall", p)});
    rows.push_back({"extraction", "f1", detail::percent_field(s, "f1", p)});
  }
  if (report.contains("rouge")) {
    const auto& r = report.at("rouge");
    for (const auto& [key, label] : {std::pair{"rouge1", "R-1"}, {"rouge2", "R-2"}, {"rougeL", "R-L"}}) {
      if (!r.contains(key)) continue;
      const double f = detail::number_field(r.at(key), "f1", std::string("rouge.") + key + ".");
      rows.push_back({"rouge", std::string(label) + " F1", detail::format_fixed(100.0 * f, 2)});
    }
  }

  // Column widths count code points so the UTF-8 set symbols align.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char ch : s) w += (ch & 0xC0) != 0x80;
    return w;
  };
  std::size_t w0 = width("section"), w1 = width("metric");
  for (const auto& r : rows) {
    w0 = std::max(w0, width(r.section));
    w1 = std::max(w1, width(r.metric));
  }
  auto pad = [&](const std::string& s, std::size_t w) { return s + std::string(w - width(s), ' '); };

  std::ostringstream out;
  out << "examples: " << n.dump() << " (" << avg.get<std::string>() << "-averaged)\n";
  out << pad("section", w0) << "  " << pad("metric", w1) << "  value\n";
  out << std::string(w0, '-') << "  " << std::string(w1, '-') << "  -----\n";
  for (const auto& r : rows) out << pad(r.section, w0) << "  " << pad(r.metric, w1) << "  " << r.value << '\n';
  return out.str();
}

}  // namespace lexiguide
