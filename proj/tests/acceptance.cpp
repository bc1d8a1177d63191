// Acceptance checks: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include <unistd.h>

#include "oracles.hpp"
#include "tacit/pipeline.hpp"
#include "tacit/search.hpp"
#include "tacit/sim.hpp"
#include "tacit/stats.hpp"
#include "tacit/util.hpp"

using namespace tacit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kData = TACIT_TEST_DATA_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("tacit-acceptance-" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

bool near(double got, double want, double tol) { return std::fabs(got - want) <= tol + 1e-12; }

// ---------------------------------------------------------------------------

Outcome table_correlations() {
  auto a = pipeline::analyze_table(pipeline::load_table(kData / "table1.json"), stats::TieBreak::posterior_desc);
  bool ok = near(a.prior_mention, 0.49, 0.01) && near(a.posterior_mention, -0.14, 0.02);
  return {ok, "prior-mention " + fixed(a.prior_mention) + ", posterior-mention " + fixed(a.posterior_mention)};
}

Outcome table_ranks() {
  auto rows = pipeline::load_table(kData / "table1.json");
  auto a = pipeline::analyze_table(rows, stats::TieBreak::posterior_desc);
  return {a.rank_matches == 20 && rows.size() == 20, std::to_string(a.rank_matches) + "/20 ranks reproduced"};
}

Outcome table_shares() {
  auto a = pipeline::analyze_table(pipeline::load_table(kData / "table1.json"), stats::TieBreak::posterior_desc);
  const auto& s = a.shares;
  bool ok = near(s.gain_posterior_mean, 0.61, 0.01) && near(s.gain_mention_mean, 0.21, 0.01) &&
            near(s.gain_prior_mean, 0.15, 0.015) && near(s.loss_prior_mean, 0.68, 0.01) &&
            near(s.loss_posterior_mean, 0.17, 0.01) && near(s.loss_mention_mean, 0.50, 0.01);
  return {ok, "gains " + fixed(s.gain_posterior_mean, 3) + "/" + fixed(s.gain_mention_mean, 3) + "/" +
                  fixed(s.gain_prior_mean, 3) + ", losses " + fixed(s.loss_prior_mean, 3) + "/" +
                  fixed(s.loss_posterior_mean, 3) + "/" + fixed(s.loss_mention_mean, 3)};
}

Outcome ols_oracle() {
  SplitMix64 rng(2024);
  double worst = 0.0, worst_p = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t p = 1 + rng.below(10);
    const std::size_t n = p + 12 + rng.below(200 - p - 11);
    std::vector<double> beta(p);
    for (auto& b : beta) b = 4.0 * rng.uniform() - 2.0;
    const double noise = 0.5 + 5.0 * rng.uniform();
    std::vector<double> y;
    std::vector<std::vector<double>> X;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(p);
      double yi = 3.0 * rng.uniform() - 1.5;
      for (std::size_t j = 0; j < p; ++j) {
        row[j] = 20.0 * rng.uniform() - 10.0;
        yi += beta[j] * row[j];
      }
      y.push_back(yi + noise * (rng.uniform() - 0.5));
      X.push_back(std::move(row));
    }
    auto got = stats::ols_fit(y, X);
    auto want = testing::ols_oracle(y, X);
    for (std::size_t j = 0; j <= p; ++j) {
      worst = std::max({worst, testing::rel_err(got.coefficients[j], want.coef[j]),
                        testing::rel_err(got.std_errors[j], want.se[j]), testing::rel_err(got.t_values[j], want.t[j])});
      // Tails below the smallest normal double carry no relative precision in either implementation.
      if (want.p[j] > 1e-300) worst_p = std::max(worst_p, testing::rel_err(got.p_values[j], want.p[j]));
    }
    worst = std::max(worst, testing::rel_err(got.r_squared, want.r2));
  }
  return {worst <= 1e-8 && worst_p <= 1e-10,
          "max rel err " + sci(worst) + " (estimates), " + sci(worst_p) + " (p-values)"};
}

struct SimRun {
  pipeline::SimulationSummary summary;
  fs::path dir;
};

SimRun default_simulation() {
  static std::optional<SimRun> cached;
  if (cached) return *cached;
  pipeline::RunConfig cfg;
  cfg.output_dir = scratch("default");
  cfg.sim_papers = 500;
  cfg.threads = 2;
  std::ostringstream out;
  cached = SimRun{pipeline::cmd_simulate(cfg, {}, out), cfg.output_dir};
  return *cached;
}

Outcome sim_recovery() {
  auto run = default_simulation();
  const auto& s = run.summary;
  const auto& r = s.recovery;
  double worst = *std::max_element(r.per_criterion_error.begin(), r.per_criterion_error.end());
  bool ok = s.n_pairs >= 300 && s.unexplained_fraction < 0.05 && r.recall == 1.0 && r.precision >= 0.8 && worst < 0.05;
  return {ok, std::to_string(s.n_pairs) + " pairs, unexplained " + fixed(s.unexplained_fraction) + ", recall " +
                  fixed(r.recall, 3) + ", precision " + fixed(r.precision, 3) + ", worst coverage error " +
                  fixed(worst)};
}

std::map<std::string, double> read_mention(const fs::path& csv) {
  std::map<std::string, double> out;
  for (const auto& line : read_lines(csv)) {
    if (line.number == 1) continue;
    auto comma = line.text.find(',');
    out[line.text.substr(0, comma)] = std::stod(line.text.substr(comma + 1));
  }
  return out;
}

Outcome implicit_separation() {
  auto world = sim::default_world();
  world.criteria[0].explicitness = 1.0;
  world.criteria[1].explicitness = 0.5;
  world.criteria[2].explicitness = 0.0;
  fs::path dir = scratch("implicit");
  write_file_atomic(dir / "input-world.json", world.to_json().dump(2));
  pipeline::RunConfig cfg;
  cfg.output_dir = dir;
  cfg.scripted_world = dir / "input-world.json";
  cfg.sim_papers = 500;
  cfg.search.stop_fraction = 0.01;  // let the search reach every planted criterion
  cfg.prior.n_sims = 50;
  cfg.threads = 2;
  std::ostringstream out;
  auto summary = pipeline::cmd_simulate(cfg, {}, out);

  auto hyps = search::load_hypotheses(dir / "hypotheses.json");
  auto mention = read_mention(dir / "mention.csv");
  const std::size_t n_comments = read_lines(dir / "annotations.jsonl").size();
  std::vector<double> rate(3, -1.0);
  bool consistent = true;
  for (const auto& h : hyps) {
    int c = sim::map_hypothesis(world, h.text);
    if (c < 0) continue;
    double m = mention.at(h.hyp_id);
    if (rate[c] >= 0 && rate[c] != m) consistent = false;
    rate[c] = m;
  }
  auto within = [&](double got, double p) {
    double half = 2.576 * std::sqrt(p * (1 - p) / static_cast<double>(n_comments));
    return got >= p - half - 1e-12 && got <= p + half + 1e-12;
  };
  const auto& err = summary.recovery.per_criterion_error;
  bool ok = consistent && rate[2] == 0.0 && err[2] < 0.05 && summary.recovery.measured[2] > 0.0 &&
            within(rate[0], 1.0) && within(rate[1], 0.5);
  return {ok, "mention explicit " + fixed(rate[0], 3) + ", partial " + fixed(rate[1], 3) + ", implicit " +
                  fixed(rate[2], 3) + " over " + std::to_string(n_comments) + " comments; implicit coverage " +
                  fixed(summary.recovery.measured[2], 3) + " vs expected " + fixed(summary.recovery.expected[2], 3)};
}

Outcome vote_agreement() {
  auto run = default_simulation();
  auto votes = search::load_votes(run.dir / "votes.jsonl");
  double a = search::vote_scheme_agreement(votes);
  return {a >= 0.95, "agreement " + fixed(a) + " over " + std::to_string(votes.size() / 3) + " cells"};
}

stats::RegressionResult bias_regression(double position_bias, std::size_t* n_obs) {
  sim::WorldConfig w;
  w.criteria = {{"rigor", "is not theoretically rigorous", "theoretical rigor", {"rigor", "proof"}, 1.0, 1.0, 0.5,
                 0.5, 1.0}};
  w.position_bias = position_bias;
  w.label_noise = 0.1;
  w.validate_and_normalize();
  auto world = sim::generate_world(w, 400, 1);
  auto records = world.records();
  corpus::CorpusIndex index(records);
  auto judge = std::make_shared<sim::ScriptedJudge>(world.config);
  judge::ProviderConfig pc;
  pc.provider_url = "scripted://world";
  pc.model_id = "scripted";
  judge::JudgeClient client(judge, pc);
  auto pairs = corpus::sample_pairs(corpus::build_all_pairs(records, 0.25), 2000, 31);
  std::vector<search::Hypothesis> hyps;
  auto text = sim::hypothesis_text(w.criteria[0].description);
  hyps.push_back({search::make_hyp_id(text), text, 1, search::Origin::posterior_search});
  search::JudgeContext ctx{&index, &client, 31, 2};
  std::vector<std::pair<double, double>> obs;
  for (const auto& o : search::measure_swap_consistency(pairs, hyps, ctx)) obs.push_back({o.gap, o.consistency});
  *n_obs = obs.size();
  return stats::position_bias_regression(obs);
}

Outcome position_bias() {
  std::size_t n_on = 0, n_off = 0;
  auto on = bias_regression(0.5, &n_on);
  auto off = bias_regression(0.0, &n_off);
  const auto& ci = off.conf_intervals_95[1];
  bool ok = n_on == 2000 && n_off == 2000 && on.coefficients[1] > 0 && on.p_values[1] < 0.01 && ci.first <= 0.0 &&
            ci.second >= 0.0;
  return {ok, "bias 0.5: gap " + fixed(on.coefficients[1]) + " (p " + sci(on.p_values[1]) +
                  "); bias 0: CI [" + fixed(ci.first) + ", " + fixed(ci.second) + "]"};
}

// corpus, pairs, search (optionally halted at `halt` then resumed), priors, match, annotate, analyze.
void staged_run(const fs::path& dir, std::optional<int> halt) {
  pipeline::RunConfig cfg;
  cfg.output_dir = dir;
  cfg.sample_n = 400;
  cfg.prior.n_sims = 40;
  cfg.threads = 2;
  auto world = sim::generate_world(sim::default_world(), 500, 2);
  corpus::save_corpus(dir / "corpus.jsonl", world.records());
  write_file_atomic(dir / "world.json", world.config.to_json().dump(2) + "\n");
  cfg.corpus_path = dir / "corpus.jsonl";
  cfg.scripted_world = dir / "world.json";
  std::ostringstream out;
  pipeline::cmd_pairs(cfg, {}, out);
  if (halt) {
    pipeline::CommandOptions stop;
    stop.halt_after_round = *halt;
    pipeline::cmd_search(cfg, stop, out);
    pipeline::CommandOptions resume;
    resume.resume = true;
    pipeline::cmd_search(cfg, resume, out);
  } else {
    pipeline::cmd_search(cfg, {}, out);
  }
  pipeline::cmd_priors(cfg, {}, out);
  pipeline::cmd_match(cfg, {}, out);
  pipeline::cmd_annotate(cfg, {}, out);
  pipeline::cmd_analyze(cfg, {}, out);
}

Outcome determinism() {
  const std::vector<std::string> artifacts = {"votes.jsonl", "hypotheses.json", "rounds.json", "analysis.json"};
  auto a = scratch("det-a"), b = scratch("det-b");
  staged_run(a, std::nullopt);
  staged_run(b, std::nullopt);
  std::vector<std::string> diffs;
  auto compare = [&](const fs::path& x, const fs::path& y, const std::string& tag) {
    for (const auto& f : artifacts) {
      if (read_file(x / f) != read_file(y / f)) diffs.push_back(tag + ":" + f);
    }
  };
  compare(a, b, "repeat");
  const int rounds = static_cast<int>(search::load_round_reports(a / "rounds.json").size());
  for (int r = 1; r < rounds; ++r) {
    auto c = scratch("det-halt-" + std::to_string(r));
    staged_run(c, r);
    compare(a, c, "halt@" + std::to_string(r));
  }
  std::string detail = std::to_string(rounds) + " rounds, " + std::to_string(rounds - 1) + " resume points";
  if (!diffs.empty()) {
    detail += "; differing:";
    for (const auto& d : diffs) detail += " " + d;
  }
  return {diffs.empty() && rounds >= 2, detail};
}

Outcome aggregation_contract() {
  using search::VoteRecord;
  auto votes = [](std::vector<std::pair<int, int>> lc) {
    std::vector<VoteRecord> v;
    for (std::size_t i = 0; i < lc.size(); ++i) {
      VoteRecord r;
      r.fold = static_cast<int>(i);
      r.label = lc[i].first;
      r.confidence = lc[i].second;
      v.push_back(r);
    }
    return v;
  };
  bool ok = true;
  auto e1 = search::aggregate_confidence_weighted(votes({{1, 7}, {0, 3}, {0, 5}}));
  auto e2 = search::aggregate_confidence_weighted(votes({{1, 10}, {1, 0}, {0, 9}}));
  auto e3 = search::aggregate_confidence_weighted(votes({{1, 5}, {0, 5}, {0, 0}}));
  ok = ok && e1.final_label == 0 && e1.confidence_margin == 1 && !e1.consistent;
  ok = ok && e2.final_label == 1 && e2.confidence_margin == 1 && !e2.consistent;
  ok = ok && e3.final_label == 0;

  SplitMix64 rng(10000);
  std::size_t violations = 0;
  const std::size_t n_pairs = 200, n_hyps = 50;  // 10,000 triples
  std::vector<std::string> pair_ids, hyp_ids;
  for (std::size_t p = 0; p < n_pairs; ++p) pair_ids.push_back("p" + std::to_string(p));
  for (std::size_t h = 0; h < n_hyps; ++h) hyp_ids.push_back("h" + std::to_string(h));
  search::CoverageMatrix m(pair_ids, {});
  std::size_t previous = n_pairs;
  for (std::size_t h = 0; h < n_hyps; ++h) {
    m.add_hypothesis(hyp_ids[h]);
    for (std::size_t p = 0; p < n_pairs; ++p) {
      std::vector<std::pair<int, int>> t(3);
      int ones = 0, zeros = 0, n1 = 0;
      for (auto& [l, c] : t) {
        l = static_cast<int>(rng.below(2));
        c = static_cast<int>(rng.below(11));
        (l ? ones : zeros) += c;
        n1 += l;
      }
      auto agg = search::aggregate_confidence_weighted(votes(t));
      const int want = ones > zeros ? 1 : 0;
      bool same = agg.final_label == want && agg.confidence_margin == std::abs(ones - zeros) &&
                  agg.consistent == (n1 == 0 || n1 == 3) &&
                  search::aggregate_majority(votes(t)) == (n1 >= 2 ? 1 : 0);
      auto perm = t;
      std::swap(perm[0], perm[2]);
      auto agg2 = search::aggregate_confidence_weighted(votes(perm));
      same = same && agg2.final_label == agg.final_label && agg2.confidence_margin == agg.confidence_margin;
      violations += !same;
      m.set(pair_ids[p], hyp_ids[h], agg);
    }
    const std::size_t now = search::unexplained_set(m).size();
    violations += now > previous;
    previous = now;
  }
  ok = ok && violations == 0;
  return {ok, "examples " + std::string(e1.final_label == 0 && e2.final_label == 1 && e3.final_label == 0 ? "ok" : "bad") +
                  ", " + std::to_string(violations) + " violations over 10000 triples"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {1, "table correlations", 1, table_correlations},
      {2, "table shift ranks", 1, table_ranks},
      {3, "attention shares", 1, table_shares},
      {4, "OLS oracle equivalence", 10, ols_oracle},
      {5, "sim recovery", 120, sim_recovery},
      {6, "implicit-criterion separation", 120, implicit_separation},
      {7, "vote-scheme agreement", 30, vote_agreement},
      {8, "position-bias regression", 60, position_bias},
      {9, "determinism and resume", 300, determinism},
      {10, "aggregation contract", 5, aggregation_contract},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool in_time = secs <= c.budget_s;
    bool pass = o.pass && in_time;
    failures += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
              << fixed(secs, 2) << " s" << (in_time ? "" : ", over budget") << "]" << std::endl;
  }
  std::error_code ec;
  if (std::getenv("TACIT_KEEP_SCRATCH")) return failures == 0 ? 0 : 1;
  fs::remove_all(fs::temp_directory_path() / ("tacit-acceptance-" + std::to_string(::getpid())), ec);
  return failures == 0 ? 0 : 1;
}
