#include <gtest/gtest.h>

#include <random>

#include "lexiguide/constraint_state.hpp"
#include "support/oracle.hpp"

using namespace lexiguide;

namespace {

// n=0 y=1 q=2 j=3 other=4, <eos>=5
const Vocabulary kVocab({"n", "y", "q", "j", "o", "<eos>"}, 5);
constexpr TokenId N = 0, Y = 1, Q = 2, J = 3, O = 4;

int depth(const ConstraintTrie& t, const TrackerState& s) { return t.node(s.active).depth; }

}  // namespace

TEST(ConstraintTrie, EmptySet) {
  const auto t = ConstraintTrie::build({}, kVocab);
  EXPECT_EQ(t.num_nodes(), 1u);
  EXPECT_EQ(t.total_constraint_tokens(), 0);
}

TEST(ConstraintTrie, TwoConstraints) {
  const auto t = ConstraintTrie::build({{"ny", {N, Y}}, {"q", {Q}}}, kVocab);
  EXPECT_EQ(t.num_nodes() - 1, 3u);
  EXPECT_EQ(t.num_terminals(), 2u);
  EXPECT_EQ(t.total_constraint_tokens(), 3);
}

TEST(ConstraintTrie, SharedPrefix) {
  const auto t = ConstraintTrie::build({{"ny", {N, Y}}, {"nj", {N, J}}}, kVocab);
  EXPECT_EQ(t.node(ConstraintTrie::kRoot).children.size(), 1u);
  EXPECT_EQ(t.num_nodes(), 4u);
  EXPECT_EQ(t.num_terminals(), 2u);
  EXPECT_EQ(t.node(t.child(ConstraintTrie::kRoot, N)).depth, 1);
}

TEST(ConstraintTrie, DuplicatesShareOnePhrase) {
  const auto t = ConstraintTrie::build({{"q", {Q}}, {"Q", {Q}}, {"ny", {N, Y}}}, kVocab);
  EXPECT_EQ(t.num_terminals(), 2u);
  EXPECT_EQ(t.num_phrases(), 2u);
  EXPECT_EQ(t.multiplicity(0), 2u);
  EXPECT_EQ(t.total_constraint_tokens(), 3);
  const auto s = replay(t, {Q});
  EXPECT_EQ(satisfied_constraints(s, t), (std::vector<std::size_t>{0, 1}));
}

TEST(ConstraintTrie, RejectsOutOfVocabularyAndReservedTokens) {
  try {
    ConstraintTrie::build({{"paris", {N, 42}}}, kVocab);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("paris"), std::string::npos);
  }
  EXPECT_THROW(ConstraintTrie::build({{"end", {5}}}, kVocab), Error);
  EXPECT_THROW(ConstraintTrie::build({{"empty", {}}}, kVocab), Error);
}

TEST(Advance, WalksAndCompletesPhrase) {
  const auto t = ConstraintTrie::build({{"ny", {N, Y}}}, kVocab);
  auto s = advance(t, initial_state(t), N);
  EXPECT_EQ(s.satisfied_token_count, 1);
  EXPECT_EQ(depth(t, s), 1);
  s = advance(t, s, Y);
  EXPECT_TRUE(s.satisfied[0]);
  EXPECT_EQ(s.satisfied_token_count, 2);
  EXPECT_EQ(s.active, ConstraintTrie::kRoot);
}

TEST(Advance, AbandonThenRetry) {
  const auto t = ConstraintTrie::build({{"ny", {N, Y}}, {"q", {Q}}}, kVocab);
  auto s = advance(t, initial_state(t), N);
  ASSERT_EQ(depth(t, s), 1);
  s = advance(t, s, Q);
  EXPECT_FALSE(s.satisfied[0]);
  EXPECT_TRUE(s.satisfied[1]);
  EXPECT_EQ(s.satisfied_token_count, 1);
  EXPECT_EQ(s.active, ConstraintTrie::kRoot);
}

TEST(Advance, MismatchRestartsSamePhrase) {
  const auto t = ConstraintTrie::build({{"ny", {N, Y}}}, kVocab);
  const auto s = replay(t, {N, N, Y});
  EXPECT_TRUE(s.satisfied[0]);
}

TEST(Advance, SatisfiedPhraseIsNotCountedTwice) {
  const auto t = ConstraintTrie::build({{"ny", {N, Y}}, {"nj", {N, J}}}, kVocab);
  auto s = replay(t, {N, Y, N});
  EXPECT_EQ(s.satisfied_token_count, 3);  // ny done, one token into nj
  s = advance(t, s, Y);                    // would re-complete ny: abandoned instead
  EXPECT_EQ(s.satisfied_token_count, 2);
  s = replay(t, {N, Y, N, J});
  EXPECT_EQ(s.satisfied_token_count, 4);
  s = advance(t, s, N);  // nothing left to match
  EXPECT_EQ(s.satisfied_token_count, 4);
  EXPECT_EQ(s.active, ConstraintTrie::kRoot);
}

TEST(UnmetNextTokens, Examples) {
  const auto t = ConstraintTrie::build({{"ny", {N, Y}}, {"q", {Q}}}, kVocab);
  EXPECT_EQ(unmet_next_tokens(initial_state(t), t), (std::vector<TokenId>{N, Q}));
  EXPECT_EQ(unmet_next_tokens(replay(t, {N}), t), (std::vector<TokenId>{N, Y, Q}));
  EXPECT_TRUE(unmet_next_tokens(replay(t, {N, Y, Q}), t).empty());
}

// Random replay: invariants hold at every step, and on constraint sets where
// first-match tracking is exact, satisfaction equals plain containment.
TEST(Tracker, RandomReplayProperties) {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<TokenId> tok(0, 4);
  std::uniform_int_distribution<int> len(0, 12);
  for (int trial = 0; trial < 2000; ++trial) {
    const bool exact = trial % 2 == 0;
    const auto raw = fixtures::random_constraints(rng, 5, 3, 3, exact);
    ConstraintSet cs;
    for (const auto& r : raw) cs.push_back({"c", r});
    const auto t = ConstraintTrie::build(cs, kVocab);

    TokenSeq seq(static_cast<std::size_t>(len(rng)));
    for (auto& x : seq) x = tok(rng);

    auto s = initial_state(t);
    for (TokenId x : seq) {
      const auto before = s;
      s = advance(t, s, x);
      int sat_len = 0;
      for (std::size_t p = 0; p < s.satisfied.size(); ++p) {
        if (s.satisfied[p]) sat_len += t.phrase_length(static_cast<int>(p));
        if (before.satisfied[p]) EXPECT_TRUE(s.satisfied[p]);
      }
      EXPECT_EQ(s.satisfied_token_count, sat_len + depth(t, s));
      EXPECT_LE(s.satisfied_token_count, t.total_constraint_tokens());
      if (s.satisfied_token_count < before.satisfied_token_count) {
        // An abandon step drops exactly the abandoned depth, then may gain one.
        const int drop = depth(t, before);
        EXPECT_TRUE(s.satisfied_token_count == before.satisfied_token_count - drop ||
                    s.satisfied_token_count == before.satisfied_token_count - drop + 1);
      }
    }
    EXPECT_EQ(replay(t, seq), s);

    const auto sat = satisfied_constraints(s, t);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const bool tracked = std::find(sat.begin(), sat.end(), i) != sat.end();
      if (tracked) EXPECT_TRUE(fixtures::contains_run(seq, raw[i]));
      if (exact) EXPECT_EQ(tracked, fixtures::contains_run(seq, raw[i]));
    }
  }
}
