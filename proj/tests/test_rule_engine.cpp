#include <gtest/gtest.h>

#include <random>

#include "rulesp/errors.hpp"
#include "rulesp/executor.hpp"
#include "rulesp/rule_engine.hpp"
#include "rulesp/synthetic.hpp"
#include "support.hpp"

using namespace rulesp;
using namespace rulesp::testing;

namespace {

Tokens q(const char* text) { return tokenize_question(text); }

std::set<Tokens> phrases_of(const std::vector<Tokens>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST(Keywords, DefaultsMatchTheDictionary) {
  auto d = KeywordDictionary::defaults();
  const auto& agg = d.agg_keywords();
  EXPECT_EQ(phrases_of(agg.at(Agg::Sum)), (std::set<Tokens>{{"sum"}}));
  EXPECT_EQ(phrases_of(agg.at(Agg::Count)), (std::set<Tokens>{{"how", "many"}, {"total", "number"}}));
  EXPECT_EQ(phrases_of(agg.at(Agg::Max)), (std::set<Tokens>{{"maximum"}}));
  EXPECT_EQ(phrases_of(agg.at(Agg::Min)), (std::set<Tokens>{{"minimum"}}));
  EXPECT_EQ(phrases_of(agg.at(Agg::Avg)), (std::set<Tokens>{{"average"}}));
  EXPECT_EQ(agg.size(), 5u);
  const auto& op = d.op_keywords();
  EXPECT_EQ(phrases_of(op.at(Op::Gt)), (std::set<Tokens>{{"more"}, {"greater"}, {"higher"}, {"taller"}, {"longer"},
                                                         {"older"}, {"larger"}, {"after"}}));
  EXPECT_EQ(phrases_of(op.at(Op::Lt)),
            (std::set<Tokens>{{"less"}, {"smaller"}, {"lower"}, {"fewer"}, {"nearer"}, {"shorter"}, {"before"}}));
}

TEST(Keywords, Disjoint) {
  auto d = KeywordDictionary::defaults();
  std::set<Tokens> seen;
  for (const auto& [a, phrases] : d.agg_keywords())
    for (const auto& p : phrases) EXPECT_TRUE(seen.insert(p).second);
  seen.clear();
  for (const auto& [o, phrases] : d.op_keywords())
    for (const auto& p : phrases) EXPECT_TRUE(seen.insert(p).second);
  EXPECT_THROW(KeywordDictionary({{Agg::Sum, {"total"}}, {Agg::Count, {"total"}}}, {}), ConfigError);
  EXPECT_THROW(KeywordDictionary({}, {{Op::Gt, {"over"}}, {Op::Lt, {"over"}}}), ConfigError);
}

TEST(Keywords, FromJson) {
  auto d = KeywordDictionary::from_json_text(R"({"agg": {"count": ["number of"]}, "op": {">": ["above"]}})");
  EXPECT_EQ(d.agg_keywords().at(Agg::Count), (std::vector<Tokens>{{"number", "of"}}));
  EXPECT_EQ(d.op_keywords().at(Op::Gt), (std::vector<Tokens>{{"above"}}));
  EXPECT_THROW(KeywordDictionary::from_json_text(R"({"agg": {"median": ["middle"]}})"), ConfigError);
  EXPECT_THROW(KeywordDictionary::from_json_text("{"), ConfigError);
}

TEST(WhereValues, Examples) {
  RuleEngine rules;
  Table t = t1();
  auto v = rules.detect_where_values(q("what is gold for france"), t);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].span, (TokenSpan{4, 5}));
  EXPECT_EQ(v[0].candidates, (std::vector<CellCandidate>{{kNation, "france"}}));

  v = rules.detect_where_values(q("gold of 2"), t);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].span, (TokenSpan{2, 3}));
  EXPECT_EQ(v[0].candidates, (std::vector<CellCandidate>{{kGold, "2"}, {kRank, "2"}}));

  EXPECT_TRUE(rules.detect_where_values(q("total medals overall"), t).empty());
}

TEST(WhereValues, LongestSpanWins) {
  RuleEngine rules;
  Table t("x", {"City", "State"}, {ColumnType::Text, ColumnType::Text},
          {{"new york", "new york state"}, {"york", "maine"}});
  auto v = rules.detect_where_values(q("teams in new york state and york"), t);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].span, (TokenSpan{2, 5}));
  EXPECT_EQ(v[0].candidates, (std::vector<CellCandidate>{{1, "new york state"}}));
  EXPECT_EQ(v[1].span, (TokenSpan{6, 7}));
}

TEST(ResolveColumn, Examples) {
  Table t = t1();
  RuleEngine rules;
  ValueMatch unique{{4, 5}, {{kNation, "france"}}};
  EXPECT_EQ(rules.resolve_where_column(unique, q("what is gold for france"), t), (CellCandidate{kNation, "france"}));

  RuleConfig strict;
  strict.resolve_min_overlap = 2;
  RuleEngine strict_rules(strict);
  ValueMatch two{{2, 3}, {{kGold, "2"}, {kRank, "2"}}};
  EXPECT_FALSE(strict_rules.resolve_where_column(two, q("gold of 2"), t));
  EXPECT_FALSE(rules.resolve_where_column(two, q("medals of 2"), t));
  // With the default threshold of one shared word the single mention decides.
  EXPECT_EQ(rules.resolve_where_column(two, q("gold of 2"), t), (CellCandidate{kGold, "2"}));
}

TEST(ResolveColumn, TwoSharedWords) {
  Table t("x", {"Gold Medal", "Rank"}, {ColumnType::Number, ColumnType::Number}, {{"2", "2"}});
  RuleConfig strict;
  strict.resolve_min_overlap = 2;
  RuleEngine rules(strict);
  Tokens question = q("how many gold medal gold rank 2");
  ValueMatch m{{6, 7}, {{0, "2"}, {1, "2"}}};
  EXPECT_EQ(rules.resolve_where_column(m, question, t), (CellCandidate{0, "2"}));
}

TEST(Operator, Examples) {
  RuleEngine rules;
  EXPECT_EQ(rules.detect_where_operator(q("gold more than 2"), {3, 4}), Op::Gt);
  EXPECT_EQ(rules.detect_where_operator(q("rank before 2"), {2, 3}), Op::Lt);
  EXPECT_EQ(rules.detect_where_operator(q("gold of france"), {2, 3}), Op::Eq);
}

TEST(Operator, WindowIsThreeTokens) {
  RuleEngine rules;
  EXPECT_EQ(rules.detect_where_operator(q("more gold than in 2"), {4, 5}), Op::Eq);
  EXPECT_EQ(rules.detect_where_operator(q("more gold than 2"), {3, 4}), Op::Gt);
}

TEST(SelectClause, Examples) {
  RuleEngine rules;
  Table t = t1();
  EXPECT_EQ(rules.select_clause(q("what is gold for france"), t, {kNation}), std::make_pair(Agg::None, kGold));
  EXPECT_EQ(rules.select_clause(q("average gold for spain"), t, {kNation}), std::make_pair(Agg::Avg, kGold));
  EXPECT_FALSE(rules.select_clause(q("who won"), t, {}));
  EXPECT_FALSE(rules.select_clause(q("average nation for gold 2"), t, {kGold}));
}

TEST(Apply, Examples) {
  RuleEngine rules;
  Table t = t1();
  RuleOutput a = rules.apply(q("what is the average gold for spain"), t);
  ASSERT_TRUE(a.covered());
  EXPECT_EQ(*a.lf, (SQLQuery{Agg::Avg, kGold, {{kNation, Op::Eq, "spain"}}}));
  EXPECT_FALSE(a.trace.empty());

  RuleOutput b = rules.apply(q("how many nations have more than 2 gold"), t);
  ASSERT_TRUE(b.covered());
  EXPECT_EQ(*b.lf, (SQLQuery{Agg::Count, kNation, {{kGold, Op::Gt, "2"}}}));

  RuleOutput c = rules.apply(q("which country performed best"), t);
  EXPECT_FALSE(c.covered());
  EXPECT_FALSE(c.lf);

  EXPECT_TRUE(rules.is_covered(q("what is the average gold for spain"), t));
  EXPECT_TRUE(rules.is_covered(q("how many nations have more than 2 gold"), t));
  EXPECT_FALSE(rules.is_covered(q("which country performed best"), t));
}

TEST(Apply, UnresolvedValueMakesQuestionUncovered) {
  RuleConfig strict;
  strict.resolve_min_overlap = 2;
  EXPECT_FALSE(RuleEngine(strict).is_covered(q("what nation has gold 2"), t1()));
}

TEST(Apply, PropertiesOnSyntheticQuestions) {
  SyntheticSpec spec;
  spec.train = {20, 600};
  spec.dev = {1, 1};
  spec.test = {1, 1};
  auto corpus = generate_synthetic_corpus(spec);
  RuleEngine rules;
  std::size_t covered = 0;
  for (const auto& ex : corpus.train.examples) {
    const Table& t = corpus.train.table_of(ex);
    RuleOutput out = rules.apply(ex.question, t);
    RuleOutput again = rules.apply(ex.question, t);
    EXPECT_EQ(out.lf, again.lf);
    EXPECT_EQ(out.covered(), out.lf.has_value());
    EXPECT_EQ(rules.is_covered(ex.question, t), out.covered());
    if (!out.covered()) continue;
    ++covered;
    EXPECT_TRUE(is_valid(*out.lf, t));
    EXPECT_FALSE(out.lf->conds.empty());
    for (const auto& c : out.lf->conds) EXPECT_NE(c.col, out.lf->sel_col);
    EXPECT_NO_THROW(execute(*out.lf, t)) << to_string(*out.lf, t);
  }
  EXPECT_GT(covered, 0u);
  EXPECT_LT(covered, corpus.train.size());
}
