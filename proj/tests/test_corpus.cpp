#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "support.hpp"
#include "tacit/corpus.hpp"

using namespace tacit;
using tacit::testing::make_record;

namespace {

std::vector<corpus::PaperRecord> venue_with_means(const std::vector<double>& means) {
  std::vector<corpus::PaperRecord> out;
  for (std::size_t i = 0; i < means.size(); ++i) {
    out.push_back(make_record("p" + std::to_string(i), "V", {means[i], means[i]}));
  }
  return out;
}

}  // namespace

TEST(Corpus, LoadsValidLinesAndReportsRejects) {
  tacit::testing::TempDir dir;
  std::string lines;
  for (int i = 0; i < 3; ++i) lines += corpus::serialize_record(make_record("a" + std::to_string(i), "V", {5})) + "\n";
  write_file_atomic(dir / "ok.jsonl", lines);
  auto ok = corpus::load_corpus(dir / "ok.jsonl");
  EXPECT_EQ(ok.records.size(), 3u);
  EXPECT_TRUE(ok.rejects.empty());

  auto bad = nlohmann::json::parse(corpus::serialize_record(make_record("b", "V", {5})));
  bad.erase("scores");
  std::string two = corpus::serialize_record(make_record("a0", "V", {5})) + "\n" + bad.dump() + "\n" +
                    corpus::serialize_record(make_record("a1", "V", {6})) + "\n";
  write_file_atomic(dir / "mixed.jsonl", two);
  auto mixed = corpus::load_corpus(dir / "mixed.jsonl");
  EXPECT_EQ(mixed.records.size(), 2u);
  ASSERT_EQ(mixed.rejects.size(), 1u);
  EXPECT_EQ(mixed.rejects[0].line, 2u);
  EXPECT_NE(mixed.rejects[0].reason.find("scores"), std::string::npos);
}

TEST(Corpus, DuplicateIdIsHardError) {
  tacit::testing::TempDir dir;
  auto line = corpus::serialize_record(make_record("dup", "V", {5}));
  write_file_atomic(dir / "c.jsonl", line + "\n" + line + "\n");
  EXPECT_THROW(corpus::load_corpus(dir / "c.jsonl"), ValidationError);
}

TEST(Corpus, UnknownSchemaVersionRejected) {
  tacit::testing::TempDir dir;
  write_file_atomic(dir / "c.jsonl", "");
  EXPECT_THROW(corpus::load_corpus(dir / "c.jsonl", "99"), ValidationError);
}

TEST(Corpus, SerializeRoundTripsBitIdentically) {
  auto r = make_record("x", "V", {3.5, 6.25});
  r.has_comments = true;
  r.comments = {"first \"quoted\"", "second\nline"};
  r.has_confidences = true;
  r.reviewer_confidences = {3, 4};
  r.extended_abstract.raw_abstract = "raw";
  std::string once = corpus::serialize_record(r);
  auto back = corpus::parse_record(once);
  EXPECT_EQ(back, r);
  EXPECT_EQ(corpus::serialize_record(back), once);

  auto bare = make_record("y", "V", {1});
  EXPECT_EQ(corpus::parse_record(corpus::serialize_record(bare)), bare);
}

TEST(Corpus, ParseRecordNamesBadField) {
  try {
    corpus::parse_record(R"({"paper_id":"a","venue_id":"v","year":"2024"})");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("year"), std::string::npos);
  }
}

TEST(VenueStats, ZeroVarianceReviews) {
  std::vector<corpus::PaperRecord> rs = {make_record("a", "V", {5, 5, 5}), make_record("b", "V", {7, 7, 7})};
  auto s = corpus::venue_stats(rs, "V");
  EXPECT_DOUBLE_EQ(s.mean_score, 6.0);
  EXPECT_DOUBLE_EQ(s.std_score, 1.0);
  EXPECT_DOUBLE_EQ(s.within_paper_std_mean, 0.0);
}

TEST(VenueStats, MedianConfidence) {
  auto a = make_record("a", "V", {5, 6, 7});
  a.has_confidences = true;
  a.reviewer_confidences = {3, 4, 3.67};
  auto b = make_record("b", "V", {4, 8});
  b.has_confidences = true;
  b.reviewer_confidences = {5, 2};
  EXPECT_DOUBLE_EQ(corpus::venue_stats({a, b}, "V").median_reviewer_confidence, 3.67);
}

TEST(VenueStats, PopulationStd) {
  auto s = corpus::venue_stats(venue_with_means({4, 6, 8}), "V");
  EXPECT_NEAR(s.std_score, std::sqrt(8.0 / 3.0), 1e-12);
  EXPECT_NEAR(s.std_score, 1.633, 5e-4);
}

TEST(Pairs, ThresholdArithmetic) {
  EXPECT_EQ(corpus::pairs_above_gap(venue_with_means({5.5, 7.0}), "V", 1.2).size(), 1u);
  EXPECT_TRUE(corpus::pairs_above_gap(venue_with_means({6.0, 7.0}), "V", 1.2).empty());
}

TEST(Pairs, MatchesBruteForceEnumeration) {
  std::vector<double> means = {2, 4, 6, 8};
  auto records = venue_with_means(means);
  double mu = (2 + 4 + 6 + 8) / 4.0, ss = 0;
  for (double m : means) ss += (m - mu) * (m - mu);
  const double sigma = std::sqrt(ss / 4.0);
  std::size_t expected = 0;
  for (double lo : means) {
    for (double hi : means) expected += (hi - lo) > sigma;
  }
  auto pairs = corpus::build_pairs(records, "V", 1.0);
  EXPECT_EQ(pairs.size(), expected);
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : pairs) {
    EXPECT_GT(p.gap, sigma);
    EXPECT_NE(p.low, p.high);
    EXPECT_EQ(seen.count({p.high, p.low}), 0u);
    seen.insert({p.low, p.high});
  }
}

TEST(Pairs, NeverCrossVenues) {
  std::vector<corpus::PaperRecord> rs = {make_record("a", "A", {1}), make_record("b", "A", {9}),
                                         make_record("c", "B", {1}), make_record("d", "B", {9})};
  std::map<std::string, std::string> venue_of;
  for (const auto& r : rs) venue_of[r.paper_id] = r.venue_id;
  auto pairs = corpus::build_all_pairs(rs, 0.5);
  EXPECT_EQ(pairs.size(), 2u);
  for (const auto& p : pairs) {
    EXPECT_EQ(venue_of[p.low], p.venue_id);
    EXPECT_EQ(venue_of[p.high], p.venue_id);
  }
}

TEST(Pairs, ZeroVarianceVenueSkipped) {
  std::vector<corpus::PaperRecord> rs = {make_record("a", "Flat", {5}), make_record("b", "Flat", {5})};
  std::vector<std::string> skipped;
  EXPECT_TRUE(corpus::build_all_pairs(rs, 1.0, &skipped).empty());
  EXPECT_EQ(skipped, std::vector<std::string>{"Flat"});
  EXPECT_THROW(corpus::build_pairs(rs, "Flat"), ValidationError);
}

TEST(SamplePairs, ExhaustiveDeterministicAndDistinct) {
  std::vector<corpus::PaperPair> pool;
  for (int i = 0; i < 5000; ++i) pool.push_back({"pair" + std::to_string(i), "V", "l", "h", 1.0});
  auto all = corpus::sample_pairs(pool, pool.size(), 3);
  EXPECT_EQ(all.size(), pool.size());
  EXPECT_TRUE(std::is_permutation(all.begin(), all.end(), pool.begin()));
  EXPECT_EQ(corpus::sample_pairs(pool, 50, 9), corpus::sample_pairs(pool, 50, 9));
  auto s = corpus::sample_pairs(pool, 50, 9);
  std::set<std::string> ids;
  for (const auto& p : s) ids.insert(p.pair_id);
  EXPECT_EQ(ids.size(), 50u);
}

TEST(Pairs, SaveLoadRoundTrip) {
  tacit::testing::TempDir dir;
  auto pairs = corpus::build_pairs(venue_with_means({1, 3, 5, 9}), "V");
  corpus::save_pairs(dir / "p.jsonl", pairs);
  EXPECT_EQ(corpus::load_pairs(dir / "p.jsonl"), pairs);
}
