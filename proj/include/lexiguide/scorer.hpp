#pragma once

// The step-scoring contract consumed by the decoder, plus in-process scorers.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexiguide/core.hpp"

namespace lexiguide {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Next-token log-probabilities, one row per scored prefix.
class StepScores {
 public:
  StepScores() = default;
  StepScores(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, kNegInf) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  /// Optional copy-distribution log-probabilities with the same shape.
  std::optional<std::vector<double>> copy_logprobs;

  std::optional<std::span<const double>> copy_row(std::size_t r) const {
    if (!copy_logprobs) return std::nullopt;
    return std::span<const double>(copy_logprobs->data() + r * cols_, cols_);
  }

  friend bool operator==(const StepScores&, const StepScores&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Throws unless `row` is a log-distribution: entries finite or -inf, and
/// exp(row) sums to 1 within `tol`.
inline void validate_log_row(std::span<const double> row, double tol = 1e-6) {
  double sum = 0.0;
  for (double v : row) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) throw Error("score row has a non-finite entry");
    sum += std::exp(v);
  }
  if (std::abs(sum - 1.0) > tol) throw Error("score row does not sum to 1 (sum=" + std::to_string(sum) + ")");
}

/// Polymorphic scorer, for runtime selection. Implementations must be
/// callable from several threads at once.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual const Vocabulary& vocabulary() const = 0;
  virtual StepScores score_step(std::span<const TokenSeq> prefixes) const = 0;
};

template <class S>
concept StepScorer = requires(const S& s, std::span<const TokenSeq> prefixes) {
  { s.vocabulary() } -> std::convertible_to<const Vocabulary&>;
  { s.score_step(prefixes) } -> std::same_as<StepScores>;
};

namespace detail {

inline void check_prefixes(std::span<const TokenSeq> prefixes, const Vocabulary& vocab) {
  if (prefixes.empty()) throw Error("score_step: no prefixes");
  for (const auto& p : prefixes) {
    for (TokenId t : p) {
      if (!vocab.contains(t)) throw Error("score_step: token id " + std::to_string(t) + " out of vocabulary");
    }
  }
}

inline std::vector<double> probs_to_logs(const std::vector<double>& probs) {
  std::vector<double> logs(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) logs[i] = probs[i] > 0.0 ? std::log(probs[i]) : kNegInf;
  return logs;
}

}  // namespace detail

/// Fixed distributions: an exact row per listed prefix and a default row for
/// every other prefix. Makes decode outcomes computable by enumeration.
class TableScorer final : public Scorer {
 public:
  TableScorer(Vocabulary vocab, std::vector<double> default_probs) : vocab_(std::move(vocab)) {
    default_ = checked_logs(default_probs);
  }

  void set_row(TokenSeq prefix, const std::vector<double>& probs) { rows_[std::move(prefix)] = checked_logs(probs); }

  const Vocabulary& vocabulary() const override { return vocab_; }

  StepScores score_step(std::span<const TokenSeq> prefixes) const override {
    detail::check_prefixes(prefixes, vocab_);
    StepScores out(prefixes.size(), vocab_.size());
    for (std::size_t r = 0; r < prefixes.size(); ++r) {
      auto it = rows_.find(prefixes[r]);
      const auto& src = it == rows_.end() ? default_ : it->second;
      std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
  }

  /// Table file: {"tokens":[...], "eos_id":N, "default":[p...], "rows":[{"prefix":[...],"probs":[...]}]}
  /// with plain probabilities.
  static TableScorer from_json(const nlohmann::json& j) {
    try {
      std::optional<TokenId> bos;
      if (j.contains("bos_id")) bos = j.at("bos_id").get<TokenId>();
      TableScorer t(Vocabulary(j.at("tokens").get<std::vector<std::string>>(), j.at("eos_id").get<TokenId>(), bos),
                    j.at("default").get<std::vector<double>>());
      if (j.contains("rows")) {
        for (const auto& r : j.at("rows")) t.set_row(r.at("prefix").get<TokenSeq>(), r.at("probs").get<std::vector<double>>());
      }
      return t;
    } catch (const nlohmann::json::exception& e) {
      throw Error(std::string("table file: ") + e.what());
    }
  }

  static TableScorer load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open table file " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception&) {
      throw Error("table file " + path + ": malformed JSON");
    }
    return from_json(j);
  }

 private:
  std::vector<double> checked_logs(const std::vector<double>& probs) const {
    if (probs.size() != vocab_.size()) throw Error("table row width does not match vocabulary");
    for (double p : probs) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw Error("table row has an invalid probability");
    }
    if (vocab_.bos_id() && probs[static_cast<std::size_t>(*vocab_.bos_id())] != 0.0) {
      throw Error("table row assigns probability to <bos>");
    }
    auto logs = detail::probs_to_logs(probs);
    validate_log_row(logs);
    return logs;
  }

  Vocabulary vocab_;
  std::vector<double> default_;
  std::map<TokenSeq, std::vector<double>> rows_;
};

/// Pseudo-random but deterministic distributions: each prefix gets its own
/// softmax row derived from (seed, prefix). Used for randomized decode
/// fixtures where a per-prefix table would be too large to store.
class SeededScorer final : public Scorer {
 public:
  SeededScorer(Vocabulary vocab, std::uint64_t seed, double sharpness = 2.0)
      : vocab_(std::move(vocab)), seed_(seed), sharpness_(sharpness) {}

  const Vocabulary& vocabulary() const override { return vocab_; }

  StepScores score_step(std::span<const TokenSeq> prefixes) const override {
    detail::check_prefixes(prefixes, vocab_);
    StepScores out(prefixes.size(), vocab_.size());
    for (std::size_t r = 0; r < prefixes.size(); ++r) fill_row(prefixes[r], out.row(r));
    return out;
  }

 private:
  void fill_row(const TokenSeq& prefix, std::span<double> row) const {
    std::uint64_t h = seed_ ^ 0x9e3779b97f4a7c15ULL;
    for (TokenId t : prefix) h = mix(h ^ static_cast<std::uint64_t>(t + 1));
    std::mt19937_64 rng(mix(h + prefix.size()));
    std::normal_distribution<double> gauss(0.0, sharpness_);
    double max_logit = kNegInf;
    for (std::size_t i = 0; i < row.size(); ++i) {
      row[i] = (vocab_.bos_id() && static_cast<TokenId>(i) == *vocab_.bos_id()) ? kNegInf : gauss(rng);
      max_logit = std::max(max_logit, row[i]);
    }
    double z = 0.0;
    for (double v : row) z += std::exp(v - max_logit);
    const double log_z = max_logit + std::log(z);
    for (double& v : row) v -= log_z;
  }

  static std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  }

  Vocabulary vocab_;
  std::uint64_t seed_;
  double sharpness_;
};

}  // namespace lexiguide
