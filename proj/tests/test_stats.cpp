#include <gtest/gtest.h>

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "oracles.hpp"
#include "support.hpp"
#include "tacit/pipeline.hpp"
#include "tacit/stats.hpp"

using namespace tacit;

namespace {

std::map<std::string, double> column(const std::vector<pipeline::Table1Row>& rows, double pipeline::Table1Row::*f) {
  std::map<std::string, double> out;
  for (const auto& r : rows) out[r.hyp_id] = r.*f;
  return out;
}

struct Instance {
  std::vector<double> y;
  std::vector<std::vector<double>> X;
};

Instance random_instance(SplitMix64& rng, std::size_t n, std::size_t p) {
  Instance in;
  std::vector<double> beta(p);
  for (auto& b : beta) b = 4.0 * rng.uniform() - 2.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(p);
    double yi = 1.5;
    for (std::size_t j = 0; j < p; ++j) {
      row[j] = 10.0 * rng.uniform() - 5.0;
      yi += beta[j] * row[j];
    }
    yi += 3.0 * (rng.uniform() - 0.5);
    in.X.push_back(row);
    in.y.push_back(yi);
  }
  return in;
}

}  // namespace

TEST(SpecialFunctions, IncompleteBetaMatchesBoost) {
  SplitMix64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    double a = 0.2 + 60.0 * rng.uniform(), b = 0.2 + 60.0 * rng.uniform(), x = rng.uniform();
    EXPECT_NEAR(stats::incomplete_beta(a, b, x), boost::math::ibeta(a, b, x), 1e-12) << a << " " << b << " " << x;
  }
  EXPECT_EQ(stats::incomplete_beta(2, 3, 0.0), 0.0);
  EXPECT_EQ(stats::incomplete_beta(2, 3, 1.0), 1.0);
}

TEST(SpecialFunctions, StudentTMatchesBoost) {
  SplitMix64 rng(12);
  for (int i = 0; i < 2000; ++i) {
    double df = 1.0 + 300.0 * rng.uniform();
    double t = 20.0 * rng.uniform() - 10.0;
    boost::math::students_t d(df);
    EXPECT_NEAR(stats::student_t_cdf(t, df), boost::math::cdf(d, t), 1e-12);
    double p = 2.0 * boost::math::cdf(boost::math::complement(d, std::fabs(t)));
    EXPECT_LE(tacit::testing::rel_err(stats::student_t_two_sided_p(t, df), p), 1e-10) << t << " df " << df;
  }
  boost::math::students_t d(17.0);
  EXPECT_NEAR(stats::student_t_quantile(0.975, 17.0), boost::math::quantile(d, 0.975), 1e-9);
}

TEST(Ols, PerfectFit) {
  std::vector<double> y;
  std::vector<std::vector<double>> X;
  for (int i = 0; i < 10; ++i) {
    X.push_back({static_cast<double>(i)});
    y.push_back(2.0 * i);
  }
  auto r = stats::ols_fit(y, X);
  EXPECT_NEAR(r.coefficients[1], 2.0, 1e-12);
  EXPECT_NEAR(r.coefficients[0], 0.0, 1e-12);
  EXPECT_NEAR(r.r_squared, 1.0, 1e-12);
  EXPECT_EQ(r.names[0], "const");
}

TEST(Ols, MatchesNormalEquationsOracle) {
  SplitMix64 rng(99);
  for (int rep = 0; rep < 30; ++rep) {
    auto in = random_instance(rng, 100, 5);
    auto r = stats::ols_fit(in.y, in.X);
    auto o = tacit::testing::ols_oracle(in.y, in.X);
    for (std::size_t j = 0; j < o.coef.size(); ++j) {
      EXPECT_LE(tacit::testing::rel_err(r.coefficients[j], o.coef[j]), 1e-8);
      EXPECT_LE(tacit::testing::rel_err(r.std_errors[j], o.se[j]), 1e-8);
    }
    EXPECT_LE(tacit::testing::rel_err(r.r_squared, o.r2), 1e-8);
  }
}

TEST(Ols, ResidualsOrthogonalToDesign) {
  SplitMix64 rng(5);
  auto in = random_instance(rng, 80, 4);
  auto r = stats::ols_fit(in.y, in.X);
  double sum = std::accumulate(r.residuals.begin(), r.residuals.end(), 0.0);
  EXPECT_NEAR(sum, 0.0, 1e-8);
  for (std::size_t j = 0; j < 4; ++j) {
    double dot = 0, scale = 0;
    for (std::size_t i = 0; i < in.y.size(); ++i) {
      dot += r.residuals[i] * in.X[i][j];
      scale += std::fabs(r.residuals[i] * in.X[i][j]);
    }
    EXPECT_LE(std::fabs(dot), 1e-8 * scale);
  }
}

TEST(Ols, RankDeficientNamesColumns) {
  std::vector<double> y;
  std::vector<std::vector<double>> X;
  for (int i = 0; i < 20; ++i) {
    X.push_back({static_cast<double>(i), 2.0 * i, static_cast<double>(i * i % 7)});
    y.push_back(i);
  }
  try {
    stats::ols_fit(y, X, true, {"a", "b", "c"});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("b"), std::string::npos);
  }
  EXPECT_THROW(stats::ols_fit({1, 2}, {{1}, {2}}), ValidationError);
}

TEST(Pearson, BasicsAndInvariance) {
  EXPECT_NEAR(stats::pearson({1, 2, 3}, {2, 4, 6}), 1.0, 1e-15);
  std::vector<double> x = {1, 5, 2, 8, 3}, y = {2, 3, 1, 9, 4};
  double r = stats::pearson(x, y);
  std::vector<double> x2;
  for (double v : x) x2.push_back(3.0 * v + 7.0);
  std::vector<double> yneg;
  for (double v : y) yneg.push_back(-2.0 * v);
  EXPECT_NEAR(stats::pearson(x2, y), r, 1e-12);
  EXPECT_NEAR(stats::pearson(x, yneg), -r, 1e-12);
  EXPECT_THROW(stats::pearson({1, 1, 1}, {1, 2, 3}), ValidationError);
}

TEST(TableOne, Correlations) {
  auto rows = pipeline::load_table(tacit::testing::data_dir() / "table1.json");
  ASSERT_EQ(rows.size(), 20u);
  std::vector<double> p, q, m;
  for (const auto& r : rows) {
    p.push_back(r.prior);
    q.push_back(r.posterior);
    m.push_back(r.mention);
  }
  EXPECT_NEAR(stats::pearson(p, m), 0.49, 0.01);
  EXPECT_NEAR(stats::pearson(q, m), -0.14, 0.02);
}

TEST(TableOne, ShiftRanksAndTieBreak) {
  auto rows = pipeline::load_table(tacit::testing::data_dir() / "table1.json");
  auto table = stats::shift_table(column(rows, &pipeline::Table1Row::prior),
                                  column(rows, &pipeline::Table1Row::posterior),
                                  column(rows, &pipeline::Table1Row::mention));
  std::map<std::string, int> rank;
  for (const auto& r : table) rank[r.hyp_id] = r.shift_rank;
  for (const auto& r : rows) EXPECT_EQ(rank[r.hyp_id], r.rank) << r.label;
  EXPECT_EQ(rank["H20"], 1);
  EXPECT_EQ(rank["H08"], 17);  // balance, delta -0.48, higher posterior
  EXPECT_EQ(rank["H03"], 18);  // over-engineered, delta -0.48

  auto asc = stats::shift_table(column(rows, &pipeline::Table1Row::prior),
                                column(rows, &pipeline::Table1Row::posterior),
                                column(rows, &pipeline::Table1Row::mention), stats::TieBreak::posterior_asc);
  for (const auto& r : asc) {
    if (r.hyp_id == "H03") EXPECT_EQ(r.shift_rank, 17);
  }
}

TEST(TableOne, AttentionShares) {
  auto rows = pipeline::load_table(tacit::testing::data_dir() / "table1.json");
  auto a = pipeline::analyze_table(rows, stats::TieBreak::posterior_desc);
  EXPECT_NEAR(a.shares.gain_posterior_mean, 0.61, 0.01);
  EXPECT_NEAR(a.shares.gain_mention_mean, 0.21, 0.01);
  EXPECT_NEAR(a.shares.gain_prior_mean, 0.15, 0.015);
  EXPECT_NEAR(a.shares.loss_prior_mean, 0.68, 0.01);
  EXPECT_NEAR(a.shares.loss_posterior_mean, 0.17, 0.01);
  EXPECT_NEAR(a.shares.loss_mention_mean, 0.50, 0.01);
}

TEST(Shift, RanksMatchBruteForceAndShiftInvariance) {
  SplitMix64 rng(3);
  std::map<std::string, double> p, q, m, p2, q2;
  for (int i = 0; i < 30; ++i) {
    std::string id = "h" + std::to_string(i);
    p[id] = rng.uniform();
    q[id] = rng.uniform();
    m[id] = rng.uniform();
    p2[id] = p[id] + 0.25;
    q2[id] = q[id] + 0.25;
  }
  auto rows = stats::shift_table(p, q, m);
  std::vector<std::pair<double, std::string>> brute;
  for (const auto& [id, v] : p) brute.push_back({q[id] - v, id});
  std::sort(brute.begin(), brute.end(), [](auto& a, auto& b) { return a.first > b.first; });
  std::map<std::string, int> want;
  for (std::size_t i = 0; i < brute.size(); ++i) want[brute[i].second] = static_cast<int>(i + 1);
  for (const auto& r : rows) EXPECT_EQ(r.shift_rank, want[r.hyp_id]);
  auto shifted = stats::shift_table(p2, q2, m);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(shifted[i].shift_rank, rows[i].shift_rank);
}

TEST(Shift, IdMismatchRejected) {
  EXPECT_THROW(stats::shift_table({{"a", 0.1}}, {{"b", 0.2}}, {{"a", 0.3}}), ValidationError);
}

TEST(Shares, UniformColumns) {
  std::map<std::string, double> p, q, m;
  for (int i = 0; i < 12; ++i) {
    std::string id = "h" + std::to_string(i);
    p[id] = q[id] = m[id] = 0.3;
  }
  auto s = stats::attention_shares(stats::shift_table(p, q, m), 5);
  for (double v : {s.gain_posterior_mean, s.gain_prior_mean, s.gain_mention_mean, s.loss_posterior_mean,
                   s.loss_prior_mean, s.loss_mention_mean}) {
    EXPECT_NEAR(v, 0.3, 1e-12);
  }
}

TEST(PositionBias, RecoversSyntheticSlope) {
  SplitMix64 rng(21);
  std::vector<std::pair<double, double>> obs;
  for (int i = 0; i < 5000; ++i) {
    double gap = 1.0 + 4.0 * rng.uniform();
    obs.push_back({gap, 0.74 + 0.01 * gap + 0.05 * (rng.uniform() - 0.5)});
  }
  auto r = stats::position_bias_regression(obs);
  EXPECT_NEAR(r.coefficients[1], 0.01, 0.002);
  EXPECT_EQ(r.names[1], "gap");
  std::vector<std::pair<double, double>> flat(20, {1.0, 0.5});
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i].first = static_cast<double>(i);
  try {
    stats::position_bias_regression(flat);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate series"), std::string::npos);
  }
}

TEST(Cosine, IdentityAndOrthogonal) {
  search::CoverageMatrix same({"a", "b", "c"}, {"h1", "h2"});
  for (const char* p : {"a", "b"}) {
    same.set(p, "h1", {1, 0, true});
    same.set(p, "h2", {1, 0, true});
  }
  same.set("c", "h1", {0, 0, true});
  same.set("c", "h2", {0, 0, true});
  EXPECT_NEAR(stats::coverage_cosine(same).mean, 1.0, 1e-12);

  search::CoverageMatrix orth({"a", "b", "c"}, {"h1", "h2", "h3"});
  orth.set("a", "h1", {1, 0, true});
  orth.set("a", "h2", {0, 0, true});
  orth.set("b", "h1", {0, 0, true});
  orth.set("b", "h2", {1, 0, true});
  for (const char* p : {"a", "b", "c"}) orth.set(p, "h3", {0, 0, true});
  orth.set("c", "h1", {0, 0, true});
  orth.set("c", "h2", {0, 0, true});
  auto c = stats::coverage_cosine(orth);
  EXPECT_NEAR(c.mean, 0.0, 1e-12);
  EXPECT_EQ(c.excluded, std::vector<std::string>{"h3"});
}

TEST(RoundTrends, SingleRoundEqualsGlobalMeans) {
  search::CoverageMatrix m({"a", "b"}, {"h1", "h2"});
  m.set("a", "h1", {1, 4, true});
  m.set("b", "h1", {0, 2, false});
  m.set("a", "h2", {1, 6, true});
  m.set("b", "h2", {1, 0, true});
  search::RoundReport rep;
  rep.round = 1;
  rep.new_hypotheses = {"h1", "h2"};
  auto t = stats::round_trends({rep}, m, {{"h1", 0.2}, {"h2", 0.4}});
  ASSERT_EQ(t.size(), 1u);
  EXPECT_DOUBLE_EQ(t[0].mean_posterior_coverage, 0.75);
  EXPECT_DOUBLE_EQ(t[0].mean_confidence_margin, 3.0);
  EXPECT_DOUBLE_EQ(t[0].consistency_rate, 0.75);
  EXPECT_DOUBLE_EQ(t[0].mean_prior_frequency, 0.3);
}
