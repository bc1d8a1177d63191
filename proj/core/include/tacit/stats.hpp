#pragma once
// Numerical analysis: OLS, correlations, belief-shift ranking, attention shares, round trends.

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tacit/search.hpp"

namespace tacit::stats {

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);
// Student's t with `df` degrees of freedom.
double student_t_cdf(double t, double df);
double student_t_two_sided_p(double t, double df);
double student_t_quantile(double p, double df);

struct RegressionResult {
  std::vector<std::string> names;  // "const" first when an intercept was added
  std::vector<double> coefficients;
  std::vector<double> std_errors;
  std::vector<double> t_values;
  std::vector<double> p_values;
  std::vector<std::pair<double, double>> conf_intervals_95;
  std::vector<double> residuals;
  double r_squared = 0.0;
  std::size_t n_observations = 0;
  double df_resid = 0.0;
};

// X is row-major, n rows of p predictors. Householder QR; classical (nonrobust) standard errors.
// Throws ValidationError on n <= p + 1 or a rank-deficient design (naming the dependent columns).
RegressionResult ols_fit(const std::vector<double>& y, const std::vector<std::vector<double>>& X,
                         bool add_intercept = true, std::vector<std::string> names = {});

// Sample correlation. Throws ValidationError("degenerate series") on zero variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

enum class TieBreak { posterior_desc, posterior_asc, prior_asc, hyp_id };
std::string_view to_string(TieBreak t);
TieBreak tie_break_from_string(std::string_view name);

struct ShiftRow {
  std::string hyp_id;
  double prior = 0.0;
  double posterior = 0.0;
  double mention = 0.0;
  double delta = 0.0;
  int shift_rank = 0;
};

// Rows in input (prior map) order with ranks by descending delta. Deltas are compared after
// rounding to 1e-9 so values equal at table precision tie.
std::vector<ShiftRow> shift_table(const std::map<std::string, double>& prior,
                                  const std::map<std::string, double>& posterior,
                                  const std::map<std::string, double>& mention,
                                  TieBreak tie_break = TieBreak::posterior_desc);

struct AttentionShares {
  double gain_posterior_mean = 0.0;
  double gain_prior_mean = 0.0;
  double gain_mention_mean = 0.0;
  double loss_posterior_mean = 0.0;
  double loss_prior_mean = 0.0;
  double loss_mention_mean = 0.0;
};

// Gains are the top_k rows by shift rank, losses the bottom top_k.
AttentionShares attention_shares(const std::vector<ShiftRow>& rows, std::size_t top_k = 5);

struct RoundTrend {
  int round = 0;
  std::size_t n_hypotheses = 0;
  double mean_prior_frequency = 0.0;  // NaN when no prior frequencies were supplied
  double mean_posterior_coverage = 0.0;
  double mean_confidence_margin = 0.0;
  double consistency_rate = 0.0;
};

// Per generation round, each hypothesis weighted equally.
std::vector<RoundTrend> round_trends(const std::vector<search::RoundReport>& reports,
                                     const search::CoverageMatrix& coverage,
                                     const std::map<std::string, double>& prior_frequency = {});

RegressionResult position_bias_regression(const std::vector<std::pair<double, double>>& gap_consistency);

struct CosineSummary {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n_pairs = 0;
  std::vector<std::string> excluded;  // all-zero columns
};
CosineSummary coverage_cosine(const search::CoverageMatrix& coverage);

}  // namespace tacit::stats
