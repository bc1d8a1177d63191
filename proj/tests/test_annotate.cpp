#include <gtest/gtest.h>

#include <cctype>
#include <cmath>

#include "support.hpp"
#include "tacit/annotate.hpp"
#include "tacit/pipeline.hpp"
#include "tacit/sim.hpp"

using namespace tacit;

namespace {

std::vector<search::Hypothesis> world_hypotheses(const sim::WorldConfig& w) {
  std::vector<search::Hypothesis> out;
  for (const auto& c : w.criteria) {
    auto text = sim::hypothesis_text(c.description);
    out.push_back({search::make_hyp_id(text), text, 1, search::Origin::posterior_search});
  }
  return out;
}

}  // namespace

TEST(ParseScores, AcceptsOnlyExactVectors) {
  EXPECT_EQ(*annotate::parse_scores("{\"scores\": [1, 0, -1]}", 3), (std::vector<int>{1, 0, -1}));
  EXPECT_EQ(*annotate::parse_scores("Sure. {\"scores\":[0,0]} done", 2), (std::vector<int>{0, 0}));
  EXPECT_FALSE(annotate::parse_scores("{\"scores\": [1, 0]}", 3));
  EXPECT_FALSE(annotate::parse_scores("{\"scores\": [1, 2, 0]}", 3));
  EXPECT_FALSE(annotate::parse_scores("{\"scores\": [1, 0.5, 0]}", 3));
  EXPECT_FALSE(annotate::parse_scores("{\"values\": [1, 0, 0]}", 3));
  EXPECT_FALSE(annotate::parse_scores("no json", 3));
}

TEST(Annotate, ScriptedRigorCriticism) {
  tacit::testing::ScriptedSetup s(sim::default_world(), 10);
  auto hyps = world_hypotheses(s.world.config);
  auto v = annotate::annotate_comment("The proofs are sloppy and incomplete.", hyps, {}, *s.client);
  ASSERT_TRUE(v);
  EXPECT_EQ(*v, (std::vector<int>{-1, 0, 0}));
  auto zero = annotate::annotate_comment("The figures could use larger fonts.", hyps, {}, *s.client);
  EXPECT_EQ(*zero, (std::vector<int>{0, 0, 0}));
  EXPECT_THROW(annotate::annotate_comment("  ", hyps, {}, *s.client), ValidationError);
}

TEST(Annotate, MalformedOutputLeavesCommentUnannotated) {
  auto provider = std::make_shared<tacit::testing::FunctionProvider>(
      [](const judge::JudgeRequest& r, int) {
        if (r.rendered_prompt.find("bad comment") != std::string::npos) return std::string("{\"scores\": [7]}");
        return std::string("{\"scores\": [1]}");
      });
  judge::JudgeClient client(provider, tacit::testing::offline_config());
  std::vector<search::Hypothesis> hyps = {{"h1", "Compared to another paper, one paper is fine.", 1, {}}};
  std::vector<annotate::Comment> comments = {{"p#0", "p", "v", "good comment", 5.0, false},
                                             {"p#1", "p", "v", "bad comment", 4.0, false}};
  auto run = annotate::annotate_all(comments, hyps, {}, client, 1);
  ASSERT_EQ(run.vectors.size(), 1u);
  EXPECT_EQ(run.vectors[0].comment_id, "p#0");
  EXPECT_EQ(run.unannotated, std::vector<std::string>{"p#1"});
}

TEST(Annotate, PromptIsScoreBlind) {
  auto rec = tacit::testing::make_record("p1", "v", {3.25, 8.75});
  rec.comments = {"Nice idea.", "Unclear proofs."};
  rec.has_comments = true;
  auto comments = annotate::collect_comments({rec});
  ASSERT_EQ(comments.size(), 2u);
  EXPECT_DOUBLE_EQ(comments[1].reviewer_score, 8.75);
  EXPECT_FALSE(comments[1].score_from_mean);
  std::vector<search::Hypothesis> hyps = {{"h1", "Compared to another paper, one paper is fine.", 1, {}}};
  auto prompt = annotate::render_annotation_prompt(comments[1].text, hyps, {});
  EXPECT_EQ(prompt.find("8.75"), std::string::npos);
  EXPECT_EQ(prompt.find("3.25"), std::string::npos);
  EXPECT_NE(prompt.find("Unclear proofs."), std::string::npos);

  rec.scores = {6.0};
  auto fallback = annotate::collect_comments({rec});
  EXPECT_TRUE(fallback[0].score_from_mean);
  EXPECT_DOUBLE_EQ(fallback[0].reviewer_score, 6.0);
}

TEST(Annotate, FewShotExamplesRendered) {
  auto few = annotate::load_few_shot(tacit::testing::data_dir() / "few_shot_table1.json");
  auto hyps = pipeline::load_hypothesis_file(tacit::testing::data_dir() / "table1.json");
  ASSERT_EQ(hyps.size(), 20u);
  auto list = annotate::render_hypothesis_list(hyps, few);
  EXPECT_EQ(list.rfind("H1. ", 0), 0u);
  EXPECT_NE(list.find("\nH20. "), std::string::npos);
  EXPECT_NE(list.find("Example (-1): "), std::string::npos);
  for (const auto& h : hyps) {
    ASSERT_TRUE(few.count(h.hyp_id)) << h.hyp_id;
    EXPECT_EQ(few[h.hyp_id].praise.size(), 1u);
  }
}

TEST(Dictionary, ReproducibilityKeyword) {
  auto d = prior::load_dictionary(tacit::testing::data_dir() / "dictionary_table1.json");
  auto hyps = pipeline::load_hypothesis_file(tacit::testing::data_dir() / "table1.json");
  auto v = annotate::dictionary_annotate("Reproducibility is a concern; no code.", hyps, d);
  for (std::size_t i = 0; i < hyps.size(); ++i) EXPECT_EQ(v[i], hyps[i].hyp_id == "H05" ? 1 : 0) << hyps[i].hyp_id;
  auto none = annotate::dictionary_annotate("zzz qqq", hyps, d);
  EXPECT_EQ(none, std::vector<int>(20, 0));
}

TEST(Dictionary, KeywordInjectionMatchesBruteForce) {
  SplitMix64 rng(8);
  prior::Dictionary d;
  std::vector<search::Hypothesis> hyps;
  std::vector<std::string> vocab;
  for (int h = 0; h < 10; ++h) {
    std::string id = "k" + std::to_string(h);
    hyps.push_back({id, "Compared to another paper, one paper has k" + std::to_string(h) + ".", 1, {}});
    for (int w = 0; w < 3; ++w) {
      std::string kw = "term" + std::to_string(h) + "x" + std::to_string(w) + "y";
      d[id].push_back(kw);
      vocab.push_back(kw);
    }
  }
  vocab.push_back("filler");
  vocab.push_back("noise words");
  for (int rep = 0; rep < 500; ++rep) {
    std::string comment;
    int words = 1 + static_cast<int>(rng.below(6));
    for (int w = 0; w < words; ++w) {
      std::string token = vocab[rng.below(vocab.size())];
      if (rng.below(2)) token[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(token[0])));
      comment += token + " ";
    }
    auto got = annotate::dictionary_annotate(comment, hyps, d);
    std::string lower = to_lower(comment);
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      int want = 0;
      for (const auto& kw : d[hyps[i].hyp_id]) {
        for (std::size_t pos = 0; pos + kw.size() <= lower.size(); ++pos) {
          if (lower.compare(pos, kw.size(), kw) == 0) want = 1;
        }
      }
      EXPECT_EQ(got[i], want) << comment;
    }
  }
}

TEST(Agreement, OverlapAndPearson) {
  EXPECT_NEAR(annotate::agreement({1, 0, -1}, {1, 0, 1}, annotate::AgreementMode::overlap), 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(annotate::agreement({1, 0, 1}, {1, 0, 1}, annotate::AgreementMode::overlap), 1.0);
  EXPECT_NEAR(annotate::agreement({1, 0, -1}, {1, 0, -1}, annotate::AgreementMode::pearson), 1.0, 1e-12);
  EXPECT_THROW(annotate::agreement({1}, {1, 0}, annotate::AgreementMode::overlap), ValidationError);
}

TEST(MentionStats, Tallies) {
  std::vector<search::Hypothesis> hyps = {{"a", "x", 1, {}}, {"b", "y", 1, {}}};
  std::vector<annotate::AnnotationVector> v = {
      {"c0", "p", "v", 5, false, {1, 0}}, {"c1", "p", "v", 5, false, {-1, 0}},
      {"c2", "p", "v", 5, false, {1, 0}}, {"c3", "p", "v", 5, false, {0, 0}}};
  auto m = annotate::mention_stats(v, hyps);
  EXPECT_DOUBLE_EQ(m[0].mention_rate, 0.75);
  EXPECT_DOUBLE_EQ(m[0].praise_rate, 0.5);
  EXPECT_DOUBLE_EQ(m[0].criticism_rate, 0.25);
  EXPECT_DOUBLE_EQ(m[0].praise_rate + m[0].criticism_rate, m[0].mention_rate);
  EXPECT_DOUBLE_EQ(m[1].mention_rate, 0.0);
  EXPECT_THROW(annotate::mention_stats({}, hyps), ValidationError);
  v[0].values = {1};
  EXPECT_THROW(annotate::mention_stats(v, hyps), ValidationError);
}

TEST(AnnotationsIo, RoundTripAndRangeCheck) {
  tacit::testing::TempDir tmp;
  std::vector<annotate::AnnotationVector> v = {{"p#0", "p", "v", 6.5, true, {1, -1, 0}}};
  annotate::save_annotations(tmp / "a.jsonl", v);
  auto back = annotate::load_annotations(tmp / "a.jsonl");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].values, v[0].values);
  EXPECT_TRUE(back[0].score_from_mean);
  write_file_atomic(tmp / "bad.jsonl",
                    "{\"comment_id\":\"x\",\"paper_id\":\"p\",\"venue_id\":\"v\",\"reviewer_score\":1,\"values\":[2]}\n");
  EXPECT_THROW(annotate::load_annotations(tmp / "bad.jsonl"), ValidationError);
}
