#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "lexiguide/corpus.hpp"

using namespace lexiguide;

namespace {

const NormalizationPolicy kDefault{};

std::vector<CorpusExample> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_corpus(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Tokenize, EmptyText) { EXPECT_TRUE(tokenize("", kDefault).empty()); }

TEST(Tokenize, CasefoldAndCollapse) {
  NormalizationPolicy p{true, true, false};
  EXPECT_EQ(tokenize("New York  City", p), (std::vector<std::string>{"new", "york", "city"}));
}

TEST(Tokenize, StripsEdgePunctuation) {
  EXPECT_EQ(tokenize("Obama, 2019.", kDefault), (std::vector<std::string>{"obama", "2019"}));
  // Inner punctuation stays.
  EXPECT_EQ(tokenize("U.S. co-op", kDefault), (std::vector<std::string>{"u.s", "co-op"}));
}

TEST(Tokenize, WithoutCollapseKeepsEmptyTokens) {
  NormalizationPolicy p{false, false, false};
  EXPECT_EQ(tokenize("a  b", p), (std::vector<std::string>{"a", "", "b"}));
  EXPECT_EQ(normalize("a  b", p), "a  b");
}

TEST(Tokenize, NormalizationIsIdempotent) {
  std::mt19937 rng(7);
  const std::string alphabet = "aBc ,.!\t-9Z";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1), len(0, 24);
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    for (std::size_t i = len(rng); i > 0; --i) s += alphabet[pick(rng)];
    for (int mask = 0; mask < 8; ++mask) {
      NormalizationPolicy p{(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0};
      const auto once = normalize(s, p);
      EXPECT_EQ(normalize(once, p), once) << "input '" << s << "' mask " << mask;
      EXPECT_EQ(tokenize(s, p), tokenize(s, p));
    }
  }
}

TEST(ConceptInText, Examples) {
  EXPECT_TRUE(concept_in_text("paris", "He visited Paris today", kDefault));
  EXPECT_FALSE(concept_in_text("new york", "newyork is big", kDefault));
  EXPECT_TRUE(concept_in_text("york city", "new york city hall", kDefault));
  EXPECT_FALSE(concept_in_text("art", "a party", kDefault));
}

TEST(ConceptInText, ReflexiveAndMonotoneUnderSuffix) {
  std::mt19937 rng(11);
  const std::vector<std::string> words = {"alpha", "Beta", "gamma,", "2019", "delta.", "x"};
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1), len(1, 4);
  for (int trial = 0; trial < 300; ++trial) {
    std::string c, t;
    for (std::size_t i = len(rng); i > 0; --i) c += words[pick(rng)] + " ";
    for (std::size_t i = len(rng) + 2; i > 0; --i) t += words[pick(rng)] + " ";
    EXPECT_TRUE(concept_in_text(c, c, kDefault));
    if (concept_in_text(c, t, kDefault)) {
      EXPECT_TRUE(concept_in_text(c, t + " " + words[pick(rng)], kDefault));
    }
  }
}

TEST(LoadCorpus, EmptyFileGivesEmptyList) { EXPECT_TRUE(parse("").empty()); }

TEST(LoadCorpus, SaveLoadPreservesOrderAndAbsence) {
  CorpusExample a;
  a.id = "a";
  a.source = "Paris is big";
  a.gold_concepts = {"Paris"};
  a.missing_categories = {};
  CorpusExample b;
  b.id = "b";
  b.source = "x";
  b.target = "y";
  b.extracted_constraints = std::vector<std::string>{"x"};
  b.gold_concepts = {"z"};
  b.missing_categories = {{"z", MissingCategory::knowledge}};
  std::ostringstream out;
  write_corpus(out, {a, b});
  const auto back = parse(out.str());
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].id, "a");
  EXPECT_EQ(back[1].id, "b");
  EXPECT_FALSE(back[0].target.has_value());
  EXPECT_FALSE(back[0].system_output.has_value());
  EXPECT_FALSE(back[0].extracted_constraints.has_value());
  EXPECT_EQ(back[1].target, "y");
  EXPECT_EQ(back[1].missing_categories.at("z"), MissingCategory::knowledge);
}

TEST(LoadCorpus, MissingSourceNamesLine) {
  const std::string text =
      R"({"id":"1","source":"a"})"
      "\n"
      R"({"id":"2","source":"b"})"
      "\n"
      R"({"id":"3"})"
      "\n";
  EXPECT_EQ(error_of(text), "line 3: missing field source");
}

TEST(LoadCorpus, MalformedAndDuplicateErrors) {
  EXPECT_EQ(error_of("{\"id\":\"1\",\"source\":\"a\"}\n{not json\n"), "line 2: malformed JSON");
  EXPECT_EQ(error_of("{\"id\":\"x\",\"source\":\"a\"}\n{\"id\":\"x\",\"source\":\"b\"}\n"), "line 2: duplicate id x");
  EXPECT_NE(error_of(R"({"id":"1","source":"a","gold_concepts":["c"],"missing_categories":{"c":"Typo"}})"), "");
}
