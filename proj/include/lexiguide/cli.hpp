#pragma once

// Batch command-line front-end. Each command reads its input artifacts,
// writes one output artifact and is deterministic for fixed inputs.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lexiguide/concept_eval.hpp"
#include "lexiguide/corpus.hpp"
#include "lexiguide/decode.hpp"
#include "lexiguide/extract.hpp"
#include "lexiguide/ngram.hpp"
#include "lexiguide/remote_scorer.hpp"
#include "lexiguide/report.hpp"
#include "lexiguide/scorer.hpp"

namespace lexiguide::cli {

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"train-ngram", "label", "extract", "sweep", "decode",
                                                 "eval-concepts", "eval-extraction", "eval-rouge", "report"};
  return names;
}

struct PolicyFlags {
  bool no_casefold = false;
  bool no_collapse = false;
  bool no_strip = false;

  NormalizationPolicy policy() const { return {!no_casefold, !no_collapse, !no_strip}; }
};

namespace detail {

inline void require_input(const std::string& path) {
  if (path.empty() || !std::filesystem::exists(path)) throw Error("missing input artifact " + (path.empty() ? "<unset>" : path));
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  return out;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) { open_output(path) << j.dump(2) << '\n'; }

inline nlohmann::json read_json_file(const std::string& path) {
  require_input(path);
  std::ifstream in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception&) {
    throw Error(path + ": malformed JSON");
  }
}

inline std::vector<std::pair<std::size_t, nlohmann::json>> read_jsonl_file(const std::string& path) {
  require_input(path);
  std::ifstream in(path);
  return read_jsonl(in);
}

/// Runs `fn(i)` for i in [0, n) on a bounded pool. Results are stored by
/// index by the caller, so completion order never leaks into output order.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Gold-mapped labels file: {"id", "labels":[{"surface","span":[b,e],"origin"}], "unmapped":[...]}
inline std::map<std::string, std::vector<std::string>> read_label_surfaces(const std::string& path) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& [lineno, j] : read_jsonl_file(path)) {
    try {
      std::vector<std::string> s;
      for (const auto& l : j.at("labels")) s.push_back(l.at("surface").get<std::string>());
      out[j.at("id").get<std::string>()] = std::move(s);
    } catch (const nlohmann::json::exception&) {
      throw Error(path + ": line " + std::to_string(lineno) + ": malformed label record");
    }
  }
  return out;
}

// Candidate score file: {"id", "candidates":[{"surface","score"}]}
inline std::map<std::string, std::vector<ScoredCandidate>> read_candidates(const std::string& path) {
  std::map<std::string, std::vector<ScoredCandidate>> out;
  for (const auto& [lineno, j] : read_jsonl_file(path)) {
    try {
      std::vector<ScoredCandidate> c;
      for (const auto& x : j.at("candidates")) c.push_back({x.at("surface").get<std::string>(), x.at("score").get<double>()});
      out[j.at("id").get<std::string>()] = std::move(c);
    } catch (const nlohmann::json::exception&) {
      throw Error(path + ": line " + std::to_string(lineno) + ": malformed candidate record");
    }
  }
  return out;
}

struct CandidateSource {
  std::string candidates_file;
  std::string labels_file;
  bool heuristic = false;

  std::size_t count() const { return !candidates_file.empty() + !labels_file.empty() + heuristic; }
};

inline std::vector<std::vector<ScoredCandidate>> gather_candidates(const std::vector<CorpusExample>& corpus,
                                                                   const CandidateSource& src,
                                                                   const NormalizationPolicy& policy) {
  if (src.count() != 1) throw Error("choose exactly one of --candidates, --labels, --heuristic");
  std::vector<std::vector<ScoredCandidate>> out(corpus.size());
  if (src.heuristic) {
    for (std::size_t i = 0; i < corpus.size(); ++i) out[i] = heuristic_candidates(corpus[i].source, policy);
  } else if (!src.labels_file.empty()) {
    const auto labels = read_label_surfaces(src.labels_file);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (auto it = labels.find(corpus[i].id); it != labels.end()) {
        for (const auto& s : it->second) out[i].push_back({s, 1.0});
      }
    }
  } else {
    const auto cands = read_candidates(src.candidates_file);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (auto it = cands.find(corpus[i].id); it != cands.end()) out[i] = it->second;
    }
  }
  return out;
}

inline std::vector<std::string> gold_in_source(const CorpusExample& ex, const NormalizationPolicy& policy) {
  std::vector<std::string> out;
  for (const auto& l : label_gold_constraints(ex, policy).labels) out.push_back(l.surface);
  return out;
}

/// Maps normalized text onto scorer ids: exact token match first, then a
/// vocabulary entry with the same normalized form, then <unk> if present.
class TextEncoder {
 public:
  TextEncoder(const Scorer& scorer, const NormalizationPolicy& policy, const RemoteScorer* remote)
      : vocab_(scorer.vocabulary()), policy_(policy), remote_(remote) {
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
      const auto id = static_cast<TokenId>(i);
      if (id == vocab_.eos_id() || (vocab_.bos_id() && id == *vocab_.bos_id())) continue;
      by_norm_.emplace(normalize(vocab_.token(id), policy_), id);
    }
    unk_ = vocab_.find("<unk>");
  }

  std::optional<TokenSeq> encode(const std::string& text, bool allow_unk) const {
    if (remote_) return remote_->tokenize(text);
    TokenSeq ids;
    for (const auto& tok : tokenize(text, policy_)) {
      if (auto id = vocab_.find(tok); id && *id != vocab_.eos_id()) {
        ids.push_back(*id);
      } else if (auto it = by_norm_.find(tok); it != by_norm_.end()) {
        ids.push_back(it->second);
      } else if (allow_unk && unk_) {
        ids.push_back(*unk_);
      } else {
        return std::nullopt;
      }
    }
    return ids;
  }

  std::string decode(const TokenSeq& ids) const {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) s += ' ';
      s += vocab_.token(ids[i]);
    }
    return s;
  }

 private:
  const Vocabulary& vocab_;
  NormalizationPolicy policy_;
  const RemoteScorer* remote_;
  std::map<std::string, TokenId> by_norm_;
  std::optional<TokenId> unk_;
};

inline std::vector<double> parse_thresholds(const std::string& spec) {
  std::vector<double> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error("bad threshold '" + item + "'");
    }
  }
  if (out.empty()) throw Error("no thresholds given");
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

struct TrainOptions {
  std::string corpus, out, field = "target";
  int order = 3;
  double k = 0.1;
};

inline void run_train_ngram(const TrainOptions& o, const NormalizationPolicy& policy) {
  detail::require_input(o.corpus);
  const auto corpus = load_corpus(o.corpus);
  if (o.field != "target" && o.field != "source") throw Error("--field must be target or source");

  // Vocabulary: reserved symbols, then every source and target token in
  // first-seen order so ids are stable for a given corpus.
  std::vector<std::string> tokens = {"<bos>", "<eos>", "<unk>"};
  std::map<std::string, TokenId> index = {{"<bos>", 0}, {"<eos>", 1}, {"<unk>", 2}};
  auto intern = [&](const std::string& t) {
    auto [it, fresh] = index.emplace(t, static_cast<TokenId>(tokens.size()));
    if (fresh) tokens.push_back(t);
    return it->second;
  };
  std::vector<TokenSeq> seqs;
  for (const auto& ex : corpus) {
    const std::string* text = o.field == "target" ? (ex.target ? &*ex.target : nullptr) : &ex.source;
    if (!text) throw Error("example " + ex.id + " has no target");
    TokenSeq seq;
    for (const auto& t : tokenize(*text, policy)) seq.push_back(intern(t));
    seqs.push_back(std::move(seq));
    for (const auto& t : tokenize(ex.source, policy)) intern(t);
  }
  const Vocabulary vocab(tokens, 1, 0);
  train_ngram(seqs, o.order, o.k, vocab).save(o.out);
}

inline void run_label(const std::string& corpus_path, const std::string& out_path, const NormalizationPolicy& policy) {
  detail::require_input(corpus_path);
  const auto corpus = load_corpus(corpus_path);
  auto out = detail::open_output(out_path);
  for (const auto& ex : corpus) {
    const auto l = label_gold_constraints(ex, policy);
    nlohmann::json labels = nlohmann::json::array();
    for (const auto& c : l.labels) {
      labels.push_back({{"surface", c.surface}, {"span", {c.span_begin, c.span_end}}, {"origin", "gold-mapped"}});
    }
    out << nlohmann::json{{"id", ex.id}, {"labels", labels}, {"unmapped", l.unmapped}}.dump() << '\n';
  }
}

inline void run_extract(const std::string& corpus_path, const std::string& out_path, const detail::CandidateSource& src,
                        double threshold, const NormalizationPolicy& policy) {
  detail::require_input(corpus_path);
  auto corpus = load_corpus(corpus_path);
  const auto cands = detail::gather_candidates(corpus, src, policy);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    corpus[i].extracted_constraints = extract_constraints(corpus[i].source, cands[i], threshold, policy);
  }
  auto out = detail::open_output(out_path);
  write_corpus(out, corpus);
}

/// Constraint count and micro P/R/F1 against source-mapped gold concepts
/// for each threshold, ascending.
inline void run_sweep(const std::string& corpus_path, const std::string& out_path, const detail::CandidateSource& src,
                      const std::vector<double>& thresholds, const NormalizationPolicy& policy) {
  detail::require_input(corpus_path);
  const auto corpus = load_corpus(corpus_path);
  const auto cands = detail::gather_candidates(corpus, src, policy);
  auto out = detail::open_output(out_path);
  for (double t : thresholds) {
    SetMatchCounts total;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const auto pred = extract_constraints(corpus[i].source, cands[i], t, policy);
      const auto c = match_counts(pred, detail::gold_in_source(corpus[i], policy), policy);
      total.predicted += c.predicted;
      total.gold += c.gold;
      total.matched += c.matched;
    }
    const auto prf = prf_from_counts(total);
    out << nlohmann::json{{"threshold", t},     {"constraints", total.predicted}, {"precision", prf.precision},
                          {"recall", prf.recall}, {"f1", prf.f1}}
               .dump()
        << '\n';
  }
}

struct DecodeOptions {
  std::string corpus, out, trace;
  std::string table, ngram, remote;
  std::string mode = "dba";
  std::string eos_policy = "relaxed";
  std::string prompt = "none";
  std::size_t beam = 10;
  std::size_t max_len = 32;
  double tau = 0.05;
  double satisfaction_bonus = 0.0;
  bool length_norm = false;
  std::size_t workers = 4;
};

inline void run_decode(DecodeOptions o, const NormalizationPolicy& policy, std::ostream& err) {
  if (const char* env = std::getenv("LEXIGUIDE_BRIDGE"); env && *env) {
    if (!o.remote.empty() || (o.table.empty() && o.ngram.empty())) o.remote = env;
  }
  const int sources = !o.table.empty() + !o.ngram.empty() + !o.remote.empty();
  if (sources != 1) throw Error("choose exactly one scorer: --table, --ngram or --remote");
  detail::require_input(o.corpus);
  if (!o.table.empty()) detail::require_input(o.table);
  if (!o.ngram.empty()) detail::require_input(o.ngram);

  DecodeConfig config;
  config.beam_size = o.beam;
  config.max_len = o.max_len;
  config.length_normalization = o.length_norm ? LengthNormalization::divide_by_length : LengthNormalization::off;
  config.record_trace = !o.trace.empty();
  if (o.mode == "plain") config.mode = DecodeMode::plain;
  else if (o.mode == "dba") config.mode = DecodeMode::dba;
  else if (o.mode == "ddba") config.mode = DecodeMode::ddba;
  else throw Error("--mode must be plain, dba or ddba");
  DenoiseConfig denoise;
  denoise.tau = o.tau;
  denoise.satisfaction_bonus = o.satisfaction_bonus;
  if (o.eos_policy == "relaxed") denoise.eos_policy = EosPolicy::relaxed;
  else if (o.eos_policy == "gated") denoise.eos_policy = EosPolicy::gated;
  else throw Error("--eos-policy must be relaxed or gated");
  if (o.prompt != "none" && o.prompt != "source") throw Error("--prompt must be none or source");
  config.validate();
  denoise.validate();
  for (const auto& w : config.warnings()) err << "warning: " << w << '\n';

  auto corpus = load_corpus(o.corpus);

  std::unique_ptr<Scorer> owned;
  const RemoteScorer* remote = nullptr;
  if (!o.table.empty()) {
    owned = std::make_unique<TableScorer>(TableScorer::load(o.table));
  } else if (!o.ngram.empty()) {
    owned = std::make_unique<NGramModel>(NGramModel::load(o.ngram));
  } else {
    auto r = RemoteScorer::connect(o.remote);
    remote = r.get();
    owned = std::move(r);
  }
  const Scorer& scorer = *owned;
  const detail::TextEncoder encoder(scorer, policy, remote);

  struct Outcome {
    DecodeResult result;
    std::vector<std::string> used, dropped;
  };
  std::vector<Outcome> outcomes(corpus.size());
  detail::parallel_for(corpus.size(), remote ? 1 : o.workers, [&](std::size_t i) {
    const auto& ex = corpus[i];
    Outcome& oc = outcomes[i];
    ConstraintSet constraints;
    if (config.mode != DecodeMode::plain && ex.extracted_constraints) {
      for (const auto& c : *ex.extracted_constraints) {
        auto ids = encoder.encode(c, false);
        if (ids && !ids->empty()) {
          constraints.push_back({c, *ids});
          oc.used.push_back(c);
        } else {
          oc.dropped.push_back(c);
        }
      }
    }
    TokenSeq prompt;
    if (o.prompt == "source") prompt = encoder.encode(ex.source, true).value_or(TokenSeq{});
    oc.result = decode(scorer, prompt, constraints, config, denoise);
  });

  auto out = detail::open_output(o.out);
  std::unique_ptr<std::ofstream> trace;
  if (!o.trace.empty()) trace = std::make_unique<std::ofstream>(detail::open_output(o.trace));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto& ex = corpus[i];
    const auto& oc = outcomes[i];
    ex.system_output = encoder.decode(oc.result.tokens);
    ex.output_finished = oc.result.finished;
    auto j = example_to_json(ex);
    std::vector<std::string> satisfied;
    for (auto idx : oc.result.satisfied_constraints) satisfied.push_back(oc.used[idx]);
    j["decode"] = {{"mode", o.mode},
                   {"tokens", oc.result.tokens},
                   {"logprob", protocol::encode_double(oc.result.logprob)},
                   {"finished", oc.result.finished},
                   {"constraints", oc.used},
                   {"satisfied_constraints", satisfied},
                   {"dropped_constraints", oc.dropped}};
    out << j.dump() << '\n';
    if (trace) {
      for (const auto& t : oc.result.trace) {
        auto tj = trace_to_json(t);
        tj["id"] = ex.id;
        *trace << tj.dump() << '\n';
      }
    }
  }
}

struct EvalConceptsOptions {
  std::string corpus, out, averaging = "micro", preservation_mode;
  bool finished_only = false;
  std::optional<double> miss_fraction;
  bool text = false;
};

inline nlohmann::json build_concept_report(const std::vector<CorpusExample>& corpus, const EvalConceptsOptions& o,
                                           const NormalizationPolicy& policy) {
  Averaging averaging;
  if (o.averaging == "micro") averaging = Averaging::micro;
  else if (o.averaging == "macro") averaging = Averaging::macro;
  else throw Error("--averaging must be micro or macro");

  nlohmann::json report;
  report["averaging"] = std::string(to_string(averaging));
  report["num_examples"] = corpus.size();
  if (corpus.empty()) return report;

  const bool have_outputs = std::all_of(corpus.begin(), corpus.end(), [](const auto& e) { return e.system_output.has_value(); });
  const auto stats = have_outputs ? fulfillment_stats(corpus, policy, averaging) : availability_stats(corpus, policy, averaging);
  auto cj = to_json(stats);
  for (const char* k : {"averaging", "num_examples", "examples_with_concepts"}) cj.erase(k);
  report["concepts"] = cj;

  const auto rollup = missing_category_rollup(corpus, policy);
  if (rollup.annotated > 0) report["missing_categories"] = to_json(rollup);
  std::optional<double> miss = o.miss_fraction;
  if (!miss && rollup.annotated > 0) miss = rollup.share(MissingCategory::miss);
  if (miss) report["estimated_actual_missing"] = estimate_actual_missing(stats.availability, *miss);

  if (have_outputs) {
    std::optional<PreservationMode> mode;
    if (o.preservation_mode == "enforced-constraints") mode = PreservationMode::enforced_constraints;
    else if (o.preservation_mode == "output-concepts") mode = PreservationMode::output_concepts;
    else if (!o.preservation_mode.empty()) throw Error("--preservation-mode must be enforced-constraints or output-concepts");
    else if (std::all_of(corpus.begin(), corpus.end(), [](const auto& e) { return e.extracted_constraints.has_value(); }))
      mode = PreservationMode::enforced_constraints;
    if (mode) report["preservation"] = to_json(preservation_prf(corpus, *mode, policy));
  }
  return report;
}

inline void run_eval_concepts(const EvalConceptsOptions& o, const NormalizationPolicy& policy, std::ostream& out) {
  detail::require_input(o.corpus);
  auto corpus = load_corpus(o.corpus);
  if (o.finished_only) {
    std::erase_if(corpus, [](const CorpusExample& e) { return !e.output_finished.value_or(false); });
  }
  const auto report = build_concept_report(corpus, o, policy);
  detail::write_json_file(o.out, report);
  if (o.text) out << render_report(report);
}

inline void run_eval_extraction(const std::string& corpus_path, const std::string& labels_path, const std::string& out_path,
                                const NormalizationPolicy& policy) {
  detail::require_input(corpus_path);
  const auto corpus = load_corpus(corpus_path);
  std::map<std::string, std::vector<std::string>> gold_labels;
  if (!labels_path.empty()) gold_labels = detail::read_label_surfaces(labels_path);
  SetMatchCounts total;
  for (const auto& ex : corpus) {
    if (!ex.extracted_constraints) throw Error("example " + ex.id + " has no extracted_constraints");
    std::vector<std::string> gold;
    if (labels_path.empty()) {
      gold = detail::gold_in_source(ex, policy);
    } else if (auto it = gold_labels.find(ex.id); it != gold_labels.end()) {
      gold = it->second;
    }
    const auto c = match_counts(*ex.extracted_constraints, gold, policy);
    total.predicted += c.predicted;
    total.gold += c.gold;
    total.matched += c.matched;
  }
  auto j = to_json(prf_from_counts(total));
  j["examples"] = corpus.size();
  detail::write_json_file(out_path, {{"averaging", "micro"}, {"num_examples", corpus.size()}, {"extraction", j}});
}

/// Mean per-example ROUGE of system_output against target.
inline void run_eval_rouge(const std::string& corpus_path, const std::string& out_path, const NormalizationPolicy& policy) {
  detail::require_input(corpus_path);
  const auto corpus = load_corpus(corpus_path);
  nlohmann::json rouge_j = nlohmann::json::object();
  for (const auto& [key, variant] :
       {std::pair{"rouge1", RougeVariant::rouge1}, {"rouge2", RougeVariant::rouge2}, {"rougeL", RougeVariant::rougeL}}) {
    PRF sum;
    for (const auto& ex : corpus) {
      if (!ex.system_output || !ex.target) throw Error("example " + ex.id + " needs system_output and target");
      const auto r = rouge(*ex.system_output, *ex.target, variant, policy);
      sum.precision += r.precision;
      sum.recall += r.recall;
      sum.f1 += r.f1;
    }
    const double n = corpus.empty() ? 1.0 : static_cast<double>(corpus.size());
    rouge_j[key] = to_json(PRF{sum.precision / n, sum.recall / n, sum.f1 / n});
  }
  detail::write_json_file(out_path, {{"averaging", "macro"}, {"num_examples", corpus.size()}, {"rouge", rouge_j}});
}

/// Merges report documents (later sections win) and renders them.
inline void run_report(const std::vector<std::string>& inputs, const std::string& out_path, std::ostream& out) {
  if (inputs.empty()) throw Error("report needs at least one --in");
  nlohmann::json merged;
  for (const auto& path : inputs) {
    const auto j = detail::read_json_file(path);
    if (!j.is_object()) throw Error(path + ": report is not an object");
    if (merged.is_null()) {
      merged = j;
    } else {
      for (const auto& [k, v] : j.items()) {
        if (k != "averaging" && k != "num_examples") merged[k] = v;
      }
    }
  }
  const auto text = render_report(merged);
  if (out_path.empty()) {
    out << text;
  } else {
    detail::open_output(out_path) << text;
  }
}

// ---------------------------------------------------------------------------
// Dispatch

namespace detail {

// Appends `--key value` pairs from a JSON config object for keys not
// already given on the command line.
inline std::vector<std::string> expand_config(std::vector<std::string> args) {
  auto it = std::find(args.begin(), args.end(), "--config");
  if (it == args.end()) return args;
  if (it + 1 == args.end()) throw Error("--config needs a file");
  const std::string path = *(it + 1);
  args.erase(it, it + 2);
  const auto cfg = read_json_file(path);
  if (!cfg.is_object()) throw Error("config file must hold a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    const std::string flag = "--" + key;
    if (std::find(args.begin(), args.end(), flag) != args.end()) continue;
    auto push = [&](const nlohmann::json& v) {
      if (v.is_boolean()) {
        if (v.get<bool>()) args.push_back(flag);
        return;
      }
      args.push_back(flag);
      args.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    };
    if (value.is_array()) {
      for (const auto& v : value) push(v);
    } else {
      push(value);
    }
  }
  return args;
}

}  // namespace detail

/// Runs one command. `args` excludes the program name. Returns the exit
/// status: 0 success, 1 failure (one `error:` line on `err`), 2 usage error.
inline int dispatch(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Lexically constrained decoding and concept-preservation toolkit", "lexiguide"};
  app.require_subcommand(1);

  PolicyFlags pf;
  auto add_policy = [&](CLI::App* c) {
    c->add_flag("--no-casefold", pf.no_casefold, "Keep letter case when matching");
    c->add_flag("--no-collapse-whitespace", pf.no_collapse, "Split on single spaces only");
    c->add_flag("--no-strip-punctuation", pf.no_strip, "Keep punctuation at token edges");
  };

  TrainOptions train;
  auto* c_train = app.add_subcommand("train-ngram", "Train an add-k smoothed n-gram scorer");
  c_train->add_option("--corpus", train.corpus, "Corpus file (JSONL)")->required();
  c_train->add_option("--out", train.out, "Model file to write")->required();
  c_train->add_option("--order", train.order, "n-gram order")->capture_default_str();
  c_train->add_option("--k", train.k, "Add-k smoothing constant")->capture_default_str();
  c_train->add_option("--field", train.field, "Text field to train on: target|source")->capture_default_str();
  add_policy(c_train);

  std::string corpus_path, out_path, labels_path;
  auto* c_label = app.add_subcommand("label", "Map gold concepts into the source as constraint labels");
  c_label->add_option("--corpus", corpus_path)->required();
  c_label->add_option("--out", out_path)->required();
  add_policy(c_label);

  detail::CandidateSource src;
  double threshold = 0.5;
  auto* c_extract = app.add_subcommand("extract", "Threshold scored candidates into constraints");
  c_extract->add_option("--corpus", corpus_path)->required();
  c_extract->add_option("--out", out_path, "Corpus with extracted_constraints")->required();
  c_extract->add_option("--threshold", threshold)->capture_default_str();
  c_extract->add_option("--candidates", src.candidates_file, "Candidate score file (JSONL)");
  c_extract->add_option("--labels", src.labels_file, "Use gold-mapped labels as candidates");
  c_extract->add_flag("--heuristic", src.heuristic, "Use the built-in capitalization/digit heuristic");
  add_policy(c_extract);

  std::string thresholds = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1";
  auto* c_sweep = app.add_subcommand("sweep", "Constraint F1 per extraction threshold");
  c_sweep->add_option("--corpus", corpus_path)->required();
  c_sweep->add_option("--out", out_path)->required();
  c_sweep->add_option("--thresholds", thresholds, "Comma-separated thresholds")->capture_default_str();
  c_sweep->add_option("--candidates", src.candidates_file);
  c_sweep->add_option("--labels", src.labels_file);
  c_sweep->add_flag("--heuristic", src.heuristic);
  add_policy(c_sweep);

  DecodeOptions dec;
  auto* c_decode = app.add_subcommand("decode", "Decode every example (plain, dba or ddba)");
  c_decode->add_option("--corpus", dec.corpus)->required();
  c_decode->add_option("--out", dec.out)->required();
  c_decode->add_option("--mode", dec.mode)->check(CLI::IsMember({"plain", "dba", "ddba"}))->capture_default_str();
  c_decode->add_option("--beam", dec.beam)->capture_default_str();
  c_decode->add_option("--max-len", dec.max_len)->capture_default_str();
  c_decode->add_option("--tau", dec.tau, "DDBA probability threshold")->capture_default_str();
  c_decode->add_option("--eos-policy", dec.eos_policy)->check(CLI::IsMember({"relaxed", "gated"}))->capture_default_str();
  c_decode->add_option("--satisfaction-bonus", dec.satisfaction_bonus, "DDBA winner bonus per satisfied token")->capture_default_str();
  c_decode->add_flag("--length-norm", dec.length_norm, "Rank finished outputs by logprob / length");
  c_decode->add_option("--prompt", dec.prompt, "Scorer prompt: none|source")->capture_default_str();
  c_decode->add_option("--table", dec.table, "Table scorer file");
  c_decode->add_option("--ngram", dec.ngram, "n-gram model file");
  c_decode->add_option("--remote", dec.remote, "Bridge endpoint (tcp://HOST:PORT or exec:COMMAND)");
  c_decode->add_option("--trace", dec.trace, "Per-step trace file (JSONL)");
  c_decode->add_option("--workers", dec.workers)->capture_default_str();
  add_policy(c_decode);

  EvalConceptsOptions ec;
  double miss = -1.0;
  auto* c_eval = app.add_subcommand("eval-concepts", "Availability, fulfillment and preservation report");
  c_eval->add_option("--corpus", ec.corpus)->required();
  c_eval->add_option("--out", ec.out)->required();
  c_eval->add_option("--averaging", ec.averaging)->check(CLI::IsMember({"micro", "macro"}))->capture_default_str();
  c_eval->add_option("--preservation-mode", ec.preservation_mode, "enforced-constraints|output-concepts");
  c_eval->add_flag("--finished-only", ec.finished_only, "Only score outputs that emitted <eos>");
  c_eval->add_option("--miss-fraction", miss, "Miss share for the actual-missing estimate");
  c_eval->add_flag("--text", ec.text, "Also print the rendered table");
  add_policy(c_eval);

  auto* c_evx = app.add_subcommand("eval-extraction", "P/R/F1 of extracted constraints against gold labels");
  c_evx->add_option("--corpus", corpus_path)->required();
  c_evx->add_option("--labels", labels_path, "Gold labels file (default: map gold concepts on the fly)");
  c_evx->add_option("--out", out_path)->required();
  add_policy(c_evx);

  auto* c_rouge = app.add_subcommand("eval-rouge", "ROUGE-1/2/L of system outputs against targets");
  c_rouge->add_option("--corpus", corpus_path)->required();
  c_rouge->add_option("--out", out_path)->required();
  add_policy(c_rouge);

  std::vector<std::string> report_inputs;
  auto* c_report = app.add_subcommand("report", "Render report documents as a text table");
  c_report->add_option("--in", report_inputs, "Report JSON (repeatable)")->required();
  c_report->add_option("--out", out_path, "Write the table here instead of stdout");

  if (!args.empty() && args[0].rfind("-", 0) != 0 &&
      std::find(command_names().begin(), command_names().end(), args[0]) == command_names().end()) {
    err << "error: unknown command " << args[0] << '\n' << app.help();
    return 2;
  }

  std::string command = args.empty() ? "" : args[0];
  try {
    args = detail::expand_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << (command.empty() ? "usage" : command) << ": " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << command << ": " << e.what() << '\n';
    return 1;
  }

  const auto policy = pf.policy();
  try {
    if (c_train->parsed()) run_train_ngram(train, policy);
    else if (c_label->parsed()) run_label(corpus_path, out_path, policy);
    else if (c_extract->parsed()) run_extract(corpus_path, out_path, src, threshold, policy);
    else if (c_sweep->parsed()) run_sweep(corpus_path, out_path, src, detail::parse_thresholds(thresholds), policy);
    else if (c_decode->parsed()) run_decode(dec, policy, err);
    else if (c_eval->parsed()) {
      if (miss >= 0.0) ec.miss_fraction = miss;
      run_eval_concepts(ec, policy, out);
    } else if (c_evx->parsed()) run_eval_extraction(corpus_path, labels_path, out_path, policy);
    else if (c_rouge->parsed()) run_eval_rouge(corpus_path, out_path, policy);
    else if (c_report->parsed()) run_report(report_inputs, out_path, out);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << command << ": " << msg << '\n';
    return 1;
  }
  return 0;
}

inline int dispatch(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return dispatch(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace lexiguide::cli
