#pragma once

// Add-k smoothed n-gram language model behind the scorer contract.
//
// Conventions: every training sequence is padded with (n-1) <bos> tokens on
// the left and one <eos> event on the right. <bos> is never predicted, so
// |V| in the smoothing denominator excludes it.

#include <cmath>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexiguide/scorer.hpp"

namespace lexiguide {

class NGramModel final : public Scorer {
 public:
  struct ContextCounts {
    std::map<TokenId, std::uint64_t> next;
    std::uint64_t total = 0;
  };

  NGramModel(Vocabulary vocab, int order, double k) : vocab_(std::move(vocab)), order_(order), k_(k) {
    if (order_ < 1) throw Error("n-gram order must be >= 1");
    if (!(k_ > 0.0) || !std::isfinite(k_)) throw Error("n-gram smoothing constant must be > 0");
    if (order_ > 1 && !vocab_.bos_id()) throw Error("n-gram order > 1 needs a <bos> token in the vocabulary");
  }

  int order() const { return order_; }
  double k() const { return k_; }
  const Vocabulary& vocabulary() const override { return vocab_; }
  const std::map<TokenSeq, ContextCounts>& counts() const { return counts_; }

  void add_event(const TokenSeq& context, TokenId next) {
    auto& c = counts_[context];
    ++c.next[next];
    ++c.total;
  }

  /// Last (n-1) tokens of the <bos>-padded prefix.
  TokenSeq context_of(std::span<const TokenId> prefix) const {
    const std::size_t width = static_cast<std::size_t>(order_ - 1);
    TokenSeq ctx;
    ctx.reserve(width);
    for (std::size_t i = 0; i < width; ++i) {
      const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(prefix.size()) - static_cast<std::ptrdiff_t>(width) + static_cast<std::ptrdiff_t>(i);
      ctx.push_back(pos < 0 ? *vocab_.bos_id() : prefix[static_cast<std::size_t>(pos)]);
    }
    return ctx;
  }

  double prob(std::span<const TokenId> prefix, TokenId next) const {
    if (vocab_.bos_id() && next == *vocab_.bos_id()) return 0.0;
    const double v = static_cast<double>(vocab_.scorable_size());
    auto it = counts_.find(context_of(prefix));
    if (it == counts_.end()) return 1.0 / v;
    auto jt = it->second.next.find(next);
    const double c = jt == it->second.next.end() ? 0.0 : static_cast<double>(jt->second);
    return (c + k_) / (static_cast<double>(it->second.total) + k_ * v);
  }

  StepScores score_step(std::span<const TokenSeq> prefixes) const override {
    detail::check_prefixes(prefixes, vocab_);
    StepScores out(prefixes.size(), vocab_.size());
    for (std::size_t r = 0; r < prefixes.size(); ++r) {
      auto row = out.row(r);
      for (std::size_t t = 0; t < vocab_.size(); ++t) {
        const double p = prob(prefixes[r], static_cast<TokenId>(t));
        row[t] = p > 0.0 ? std::log(p) : kNegInf;
      }
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["order"] = order_;
    j["k"] = k_;
    j["tokens"] = vocab_.tokens();
    j["eos_id"] = vocab_.eos_id();
    if (vocab_.bos_id()) j["bos_id"] = *vocab_.bos_id();
    nlohmann::json counts = nlohmann::json::array();
    for (const auto& [ctx, cc] : counts_) {
      nlohmann::json next = nlohmann::json::array();
      for (const auto& [tok, n] : cc.next) next.push_back({tok, n});
      counts.push_back({{"context", ctx}, {"next", next}});
    }
    j["counts"] = counts;
    return j;
  }

  static NGramModel from_json(const nlohmann::json& j) {
    try {
      std::optional<TokenId> bos;
      if (j.contains("bos_id")) bos = j.at("bos_id").get<TokenId>();
      NGramModel m(Vocabulary(j.at("tokens").get<std::vector<std::string>>(), j.at("eos_id").get<TokenId>(), bos),
                   j.at("order").get<int>(), j.at("k").get<double>());
      for (const auto& c : j.at("counts")) {
        auto& cc = m.counts_[c.at("context").get<TokenSeq>()];
        for (const auto& e : c.at("next")) {
          const auto n = e.at(1).get<std::uint64_t>();
          cc.next[e.at(0).get<TokenId>()] += n;
          cc.total += n;
        }
      }
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw Error(std::string("n-gram model file: ") + e.what());
    }
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write model file " + path);
    out << to_json().dump() << '\n';
  }

  static NGramModel load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open model file " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception&) {
      throw Error("model file " + path + ": malformed JSON");
    }
    return from_json(j);
  }

 private:
  Vocabulary vocab_;
  int order_;
  double k_;
  std::map<TokenSeq, ContextCounts> counts_;
};

inline NGramModel train_ngram(const std::vector<TokenSeq>& corpus, int n, double k, const Vocabulary& vocab) {
  NGramModel model(vocab, n, k);
  if (corpus.empty()) throw Error("train_ngram: empty corpus");
  for (const auto& seq : corpus) {
    for (TokenId t : seq) {
      if (!vocab.contains(t) || t == vocab.eos_id() || (vocab.bos_id() && t == *vocab.bos_id())) {
        throw Error("train_ngram: invalid token id " + std::to_string(t) + " in corpus");
      }
    }
    for (std::size_t i = 0; i <= seq.size(); ++i) {
      const TokenId next = i < seq.size() ? seq[i] : vocab.eos_id();
      model.add_event(model.context_of(std::span<const TokenId>(seq.data(), i)), next);
    }
  }
  return model;
}

}  // namespace lexiguide
