// Decodes the three-token table fixture in all three modes and prints the
// winner of each.

#include <cmath>
#include <iostream>

#include "lexiguide/decode.hpp"

using namespace lexiguide;

int main() {
  const Vocabulary vocab({"A", "B", "<eos>"}, 2);
  const TableScorer scorer(vocab, {0.6, 0.3, 0.1});
  const ConstraintSet constraints = {{"B", {1}}};

  DecodeConfig config;
  config.beam_size = 8;
  config.max_len = 2;

  auto show = [&](const char* label, const DecodeResult& r) {
    std::cout << label << ": \"";
    for (std::size_t i = 0; i < r.tokens.size(); ++i) std::cout << (i ? " " : "") << vocab.token(r.tokens[i]);
    std::cout << "\" p=" << std::exp(r.logprob) << " finished=" << r.finished
              << " satisfied=" << r.satisfied_constraints.size() << '\n';
  };

  show("plain", beam_search(scorer, {}, config));

  config.mode = DecodeMode::dba;
  show("dba  ", decode_dba(scorer, {}, constraints, config));

  config.mode = DecodeMode::ddba;
  DenoiseConfig denoise;
  denoise.tau = 0.35;
  show("ddba (tau=0.35)", decode_ddba(scorer, {}, constraints, config, denoise));
  denoise.tau = 0.0;
  denoise.eos_policy = EosPolicy::gated;
  show("ddba (tau=0, gated)", decode_ddba(scorer, {}, constraints, config, denoise));
  return 0;
}
