#pragma once

// Source-token centrality features over a self-attention graph, plus the
// four-feature vector used to score constraint importance.
//
// E(i, j) is the attention from token i to token j and every column sums
// to one. out_degree(i) = sum_j E(i, j); T(i, j) = E(i, j) / out_degree(i);
// in_degree(i) = sum_j T(j, i).

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexiguide/core.hpp"

namespace lexiguide {

/// Dense square matrix, row-major.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  static SquareMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    SquareMatrix m(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) throw Error("attention matrix is not square");
      for (std::size_t j = 0; j < rows.size(); ++j) m(i, j) = rows[i][j];
    }
    return m;
  }

  static SquareMatrix identity(std::size_t n) {
    SquareMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

  SquareMatrix transposed() const {
    SquareMatrix t(n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

enum class AttentionLayout {
  column_stochastic,  // each column sums to 1 (the native convention)
  row_stochastic,     // each row sums to 1; transposed on ingestion
};

/// Validated column-stochastic attention graph.
class AttentionGraph {
 public:
  static constexpr double kColumnTolerance = 1e-6;

  explicit AttentionGraph(SquareMatrix e, AttentionLayout layout = AttentionLayout::column_stochastic)
      : e_(layout == AttentionLayout::row_stochastic ? e.transposed() : std::move(e)) {
    const std::size_t n = e_.size();
    for (std::size_t j = 0; j < n; ++j) {
      double col = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = e_(i, j);
        if (!(v >= 0.0) || !std::isfinite(v)) {
          throw Error("attention entry (" + std::to_string(i) + "," + std::to_string(j) + ") is negative or not finite");
        }
        col += v;
      }
      if (std::abs(col - 1.0) > kColumnTolerance) throw Error("attention column " + std::to_string(j) + " does not sum to 1");
    }
  }

  std::size_t size() const { return e_.size(); }
  const SquareMatrix& weights() const { return e_; }

 private:
  SquareMatrix e_;
};

inline std::vector<double> out_degree(const AttentionGraph& g) {
  const auto& e = g.weights();
  std::vector<double> out(e.size(), 0.0);
  for (std::size_t i = 0; i < e.size(); ++i)
    for (std::size_t j = 0; j < e.size(); ++j) out[i] += e(i, j);
  return out;
}

/// Row-normalized attention. Throws when a row has zero mass.
inline SquareMatrix transition_matrix(const AttentionGraph& g) {
  const auto& e = g.weights();
  const auto deg = out_degree(g);
  SquareMatrix t(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (!(deg[i] > 0.0)) throw Error("attention row " + std::to_string(i) + " has zero out-degree");
    for (std::size_t j = 0; j < e.size(); ++j) t(i, j) = e(i, j) / deg[i];
  }
  return t;
}

inline std::vector<double> in_degree_centrality(const AttentionGraph& g) {
  const auto t = transition_matrix(g);
  std::vector<double> out(t.size(), 0.0);
  for (std::size_t j = 0; j < t.size(); ++j)
    for (std::size_t i = 0; i < t.size(); ++i) out[i] += t(j, i);
  return out;
}

struct FeatureVector {
  double vocab_prob = 0.0;
  std::optional<double> copy_prob;
  double out_degree = 0.0;
  double in_degree = 0.0;
};

/// Features of constraint token `token` whose source position is `position`.
/// Rows hold log-probabilities, as produced by a scorer.
inline FeatureVector constraint_features(TokenId token, std::span<const double> step_row,
                                         std::optional<std::span<const double>> copy_row, const AttentionGraph& g,
                                         std::size_t position) {
  if (position >= g.size()) throw Error("source position out of range of the attention graph");
  if (token < 0 || static_cast<std::size_t>(token) >= step_row.size()) throw Error("token id out of range of the score row");
  FeatureVector f;
  f.vocab_prob = std::exp(step_row[static_cast<std::size_t>(token)]);
  if (copy_row) {
    if (static_cast<std::size_t>(token) >= copy_row->size()) throw Error("token id out of range of the copy row");
    f.copy_prob = std::exp((*copy_row)[static_cast<std::size_t>(token)]);
  }
  f.out_degree = out_degree(g)[position];
  f.in_degree = in_degree_centrality(g)[position];
  return f;
}

/// One export record for an external constraint-importance classifier.
/// `label`, when known, marks a gold constraint whose generation probability
/// exceeded the labelling threshold at this step.
inline nlohmann::json feature_record(const FeatureVector& f, const std::string& provenance, std::optional<bool> label = std::nullopt) {
  nlohmann::json j;
  j["vocab_prob"] = f.vocab_prob;
  j["copy_prob"] = f.copy_prob ? nlohmann::json(*f.copy_prob) : nlohmann::json();
  j["out_degree"] = f.out_degree;
  j["in_degree"] = f.in_degree;
  j["attention_provenance"] = provenance;
  if (label) j["label"] = *label;
  return j;
}

}  // namespace lexiguide
