#include "tacit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "tacit/util.hpp"

namespace tacit::stats {

RegressionResult ols_fit(const std::vector<double>& y, const std::vector<std::vector<double>>& X,
                         bool add_intercept, std::vector<std::string> names) {
  const std::size_t n = y.size();
  if (X.size() != n) {
    throw ValidationError("ols_fit: " + std::to_string(X.size()) + " design rows for " + std::to_string(n) +
                          " observations");
  }
  const std::size_t p = n == 0 ? 0 : X.front().size();
  for (const auto& row : X) {
    if (row.size() != p) throw ValidationError("ols_fit: ragged design matrix");
  }
  const std::size_t m = p + (add_intercept ? 1 : 0);
  if (m == 0) throw ValidationError("ols_fit: no regressors");
  if (n <= m) {
    throw ValidationError("ols_fit: need more observations than parameters (n = " + std::to_string(n) +
                          ", parameters = " + std::to_string(m) + ")");
  }
  if (names.empty()) {
    if (add_intercept) names.push_back("const");
    for (std::size_t j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  } else if (names.size() == p && add_intercept) {
    names.insert(names.begin(), "const");
  }
  if (names.size() != m) throw ValidationError("ols_fit: wrong number of column names");

  // Column-major copy of the augmented design.
  std::vector<std::vector<double>> a(m, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = 0;
    if (add_intercept) a[c++][i] = 1.0;
    for (std::size_t j = 0; j < p; ++j) a[c++][i] = X[i][j];
  }
  std::vector<double> col_norm(m);
  for (std::size_t j = 0; j < m; ++j) {
    col_norm[j] = std::sqrt(std::inner_product(a[j].begin(), a[j].end(), a[j].begin(), 0.0));
  }
  std::vector<double> qty = y;

  // Householder QR.
  std::vector<double> rdiag(m);
  for (std::size_t k = 0; k < m; ++k) {
    double norm = 0.0;
    for (std::size_t i = k; i < n; ++i) norm += a[k][i] * a[k][i];
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      rdiag[k] = 0.0;
      continue;
    }
    const double alpha = a[k][k] > 0 ? -norm : norm;
    std::vector<double> v(a[k].begin() + static_cast<std::ptrdiff_t>(k), a[k].end());
    v[0] -= alpha;
    const double vnorm2 = std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
    auto reflect = [&](std::vector<double>& col) {
      double dot = 0.0;
      for (std::size_t i = k; i < n; ++i) dot += v[i - k] * col[i];
      const double f = 2.0 * dot / vnorm2;
      for (std::size_t i = k; i < n; ++i) col[i] -= f * v[i - k];
    };
    for (std::size_t j = k; j < m; ++j) reflect(a[j]);
    reflect(qty);
    rdiag[k] = a[k][k];
  }

  std::vector<std::string> dependent;
  for (std::size_t k = 0; k < m; ++k) {
    if (col_norm[k] == 0.0 || std::fabs(rdiag[k]) <= 1e-10 * col_norm[k]) dependent.push_back(names[k]);
  }
  if (!dependent.empty()) {
    std::string list;
    for (const auto& d : dependent) list += (list.empty() ? "" : ", ") + d;
    throw ValidationError("ols_fit: design matrix is rank deficient; dependent columns: " + list);
  }

  // R is stored as a[j][i] for i <= j.
  auto R = [&](std::size_t i, std::size_t j) { return a[j][i]; };
  RegressionResult out;
  out.names = std::move(names);
  out.n_observations = n;
  out.df_resid = static_cast<double>(n - m);
  out.coefficients.assign(m, 0.0);
  for (std::size_t ii = m; ii-- > 0;) {
    double s = qty[ii];
    for (std::size_t j = ii + 1; j < m; ++j) s -= R(ii, j) * out.coefficients[j];
    out.coefficients[ii] = s / R(ii, ii);
  }

  // R^{-1}, upper triangular.
  std::vector<std::vector<double>> rinv(m, std::vector<double>(m, 0.0));
  for (std::size_t j = 0; j < m; ++j) {
    rinv[j][j] = 1.0 / R(j, j);
    for (std::size_t ii = j; ii-- > 0;) {
      double s = 0.0;
      for (std::size_t k = ii + 1; k <= j; ++k) s += R(ii, k) * rinv[k][j];
      rinv[ii][j] = -s / R(ii, ii);
    }
  }

  out.residuals.resize(n);
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double fit = add_intercept ? out.coefficients[0] : 0.0;
    for (std::size_t j = 0; j < p; ++j) fit += out.coefficients[j + (add_intercept ? 1 : 0)] * X[i][j];
    out.residuals[i] = y[i] - fit;
    ssr += out.residuals[i] * out.residuals[i];
  }
  const double sigma2 = ssr / out.df_resid;
  const double q = student_t_quantile(0.975, out.df_resid);
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (std::size_t k = j; k < m; ++k) s += rinv[j][k] * rinv[j][k];
    const double se = std::sqrt(sigma2 * s);
    const double b = out.coefficients[j];
    out.std_errors.push_back(se);
    out.t_values.push_back(b / se);
    out.p_values.push_back(student_t_two_sided_p(b / se, out.df_resid));
    out.conf_intervals_95.emplace_back(b - q * se, b + q * se);
  }

  double sst = 0.0;
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  for (double v : y) sst += add_intercept ? (v - ybar) * (v - ybar) : v * v;
  out.r_squared = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
  if (add_intercept) out.r_squared = std::clamp(out.r_squared, 0.0, 1.0);
  return out;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ValidationError("pearson: length mismatch");
  if (x.size() < 3) throw ValidationError("pearson: need at least 3 observations");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw ValidationError("degenerate series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::string_view to_string(TieBreak t) {
  switch (t) {
    case TieBreak::posterior_desc: return "posterior_desc";
    case TieBreak::posterior_asc: return "posterior_asc";
    case TieBreak::prior_asc: return "prior_asc";
    case TieBreak::hyp_id: return "hyp_id";
  }
  return "unknown";
}

TieBreak tie_break_from_string(std::string_view name) {
  for (auto t : {TieBreak::posterior_desc, TieBreak::posterior_asc, TieBreak::prior_asc, TieBreak::hyp_id}) {
    if (to_string(t) == name) return t;
  }
  throw ValidationError("unknown tie-break rule '" + std::string(name) + "'");
}

namespace {

std::string key_difference(const std::map<std::string, double>& a, const std::map<std::string, double>& b,
                           const char* a_name, const char* b_name) {
  std::string out;
  for (const auto& [k, v] : a) {
    if (!b.count(k)) out += std::string(out.empty() ? "" : "; ") + k + " in " + a_name + " only";
  }
  for (const auto& [k, v] : b) {
    if (!a.count(k)) out += std::string(out.empty() ? "" : "; ") + k + " in " + b_name + " only";
  }
  return out;
}

}  // namespace

std::vector<ShiftRow> shift_table(const std::map<std::string, double>& prior,
                                  const std::map<std::string, double>& posterior,
                                  const std::map<std::string, double>& mention, TieBreak tie_break) {
  std::string diff = key_difference(prior, posterior, "prior", "posterior");
  std::string diff2 = key_difference(prior, mention, "prior", "mention");
  if (!diff.empty() || !diff2.empty()) {
    throw ValidationError("shift_table: hypothesis ids differ: " + diff + (diff.empty() || diff2.empty() ? "" : "; ") +
                          diff2);
  }
  std::vector<ShiftRow> rows;
  for (const auto& [id, p] : prior) {
    ShiftRow r;
    r.hyp_id = id;
    r.prior = p;
    r.posterior = posterior.at(id);
    r.mention = mention.at(id);
    r.delta = r.posterior - r.prior;
    rows.push_back(r);
  }
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  auto q = [](double d) { return std::llround(d * 1e9); };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const auto& a = rows[i];
    const auto& b = rows[j];
    if (q(a.delta) != q(b.delta)) return q(a.delta) > q(b.delta);
    switch (tie_break) {
      case TieBreak::posterior_desc:
        if (a.posterior != b.posterior) return a.posterior > b.posterior;
        break;
      case TieBreak::posterior_asc:
        if (a.posterior != b.posterior) return a.posterior < b.posterior;
        break;
      case TieBreak::prior_asc:
        if (a.prior != b.prior) return a.prior < b.prior;
        break;
      case TieBreak::hyp_id:
        break;
    }
    return a.hyp_id < b.hyp_id;
  });
  for (std::size_t r = 0; r < order.size(); ++r) rows[order[r]].shift_rank = static_cast<int>(r + 1);
  return rows;
}

AttentionShares attention_shares(const std::vector<ShiftRow>& rows, std::size_t top_k) {
  if (top_k == 0 || rows.size() < 2 * top_k) {
    throw ValidationError("attention_shares: need at least " + std::to_string(2 * top_k) + " rows, got " +
                          std::to_string(rows.size()));
  }
  std::vector<const ShiftRow*> ranked;
  for (const auto& r : rows) ranked.push_back(&r);
  std::sort(ranked.begin(), ranked.end(), [](auto* a, auto* b) { return a->shift_rank < b->shift_rank; });
  AttentionShares s;
  const double k = static_cast<double>(top_k);
  for (std::size_t i = 0; i < top_k; ++i) {
    const auto* g = ranked[i];
    const auto* l = ranked[ranked.size() - 1 - i];
    s.gain_posterior_mean += g->posterior / k;
    s.gain_prior_mean += g->prior / k;
    s.gain_mention_mean += g->mention / k;
    s.loss_posterior_mean += l->posterior / k;
    s.loss_prior_mean += l->prior / k;
    s.loss_mention_mean += l->mention / k;
  }
  return s;
}

std::vector<RoundTrend> round_trends(const std::vector<search::RoundReport>& reports,
                                     const search::CoverageMatrix& coverage,
                                     const std::map<std::string, double>& prior_frequency) {
  std::vector<RoundTrend> out;
  const std::size_t n_pairs = coverage.pair_index().size();
  for (const auto& report : reports) {
    RoundTrend t;
    t.round = report.round;
    double prior_sum = 0.0;
    std::size_t prior_n = 0;
    for (const auto& id : report.new_hypotheses) {
      const std::size_t h = coverage.hyp_position(id);
      double ones = 0, margin = 0, consistent = 0;
      for (std::size_t p = 0; p < n_pairs; ++p) {
        const auto& cell = coverage.cell(p, h);
        if (!cell) throw ValidationError("round_trends: coverage cell missing for " + id);
        ones += cell->final_label;
        margin += cell->confidence_margin;
        consistent += cell->consistent;
      }
      const double np = static_cast<double>(std::max<std::size_t>(n_pairs, 1));
      t.mean_posterior_coverage += ones / np;
      t.mean_confidence_margin += margin / np;
      t.consistency_rate += consistent / np;
      if (auto it = prior_frequency.find(id); it != prior_frequency.end()) {
        prior_sum += it->second;
        ++prior_n;
      }
      ++t.n_hypotheses;
    }
    if (t.n_hypotheses > 0) {
      const double nh = static_cast<double>(t.n_hypotheses);
      t.mean_posterior_coverage /= nh;
      t.mean_confidence_margin /= nh;
      t.consistency_rate /= nh;
    }
    t.mean_prior_frequency =
        prior_n ? prior_sum / static_cast<double>(prior_n) : std::numeric_limits<double>::quiet_NaN();
    out.push_back(t);
  }
  return out;
}

RegressionResult position_bias_regression(const std::vector<std::pair<double, double>>& gap_consistency) {
  if (gap_consistency.size() < 10) {
    throw ValidationError("position_bias_regression: need at least 10 observations, got " +
                          std::to_string(gap_consistency.size()));
  }
  std::vector<double> y;
  std::vector<std::vector<double>> X;
  for (const auto& [gap, consistency] : gap_consistency) {
    X.push_back({gap});
    y.push_back(consistency);
  }
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  if (*lo == *hi) throw ValidationError("degenerate series");
  return ols_fit(y, X, true, {"gap"});
}

CosineSummary coverage_cosine(const search::CoverageMatrix& coverage) {
  coverage.require_complete();
  const std::size_t n_pairs = coverage.pair_index().size();
  std::vector<std::vector<int>> cols;
  CosineSummary s;
  for (std::size_t h = 0; h < coverage.hyp_index().size(); ++h) {
    std::vector<int> col(n_pairs);
    int ones = 0;
    for (std::size_t p = 0; p < n_pairs; ++p) ones += col[p] = coverage.cell(p, h)->final_label;
    if (ones == 0) {
      s.excluded.push_back(coverage.hyp_index()[h]);
    } else {
      cols.push_back(std::move(col));
    }
  }
  if (cols.size() < 2) throw ValidationError("coverage_cosine: fewer than 2 nonzero coverage columns");
  std::vector<double> sims;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    for (std::size_t j = i + 1; j < cols.size(); ++j) {
      double dot = 0, ni = 0, nj = 0;
      for (std::size_t p = 0; p < n_pairs; ++p) {
        dot += cols[i][p] * cols[j][p];
        ni += cols[i][p];
        nj += cols[j][p];
      }
      sims.push_back(dot / std::sqrt(ni * nj));
    }
  }
  s.n_pairs = sims.size();
  s.mean = std::accumulate(sims.begin(), sims.end(), 0.0) / static_cast<double>(sims.size());
  double ss = 0.0;
  for (double v : sims) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(sims.size()));
  return s;
}

}  // namespace tacit::stats
