#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "tacit/annotate.hpp"
#include "tacit/judge.hpp"
#include "tacit/search.hpp"
#include "tacit/stats.hpp"

namespace {

using tacit::search::VoteRecord;

std::vector<std::vector<VoteRecord>> make_triples(std::size_t n) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> label(0, 1), conf(0, 10);
  std::vector<std::vector<VoteRecord>> out(n);
  for (auto& t : out) {
    for (int f = 0; f < 3; ++f) {
      VoteRecord v;
      v.fold = f;
      v.label = label(rng);
      v.confidence = conf(rng);
      t.push_back(v);
    }
  }
  return out;
}

void BM_AggregateConfidenceWeighted(benchmark::State& state) {
  auto triples = make_triples(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    int ones = 0;
    for (const auto& t : triples) ones += tacit::search::aggregate_confidence_weighted(t).final_label;
    benchmark::DoNotOptimize(ones);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AggregateConfidenceWeighted)->Arg(1000)->Arg(30000);

void BM_OlsFit(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t p = 20;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> X(n, std::vector<double>(p));
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& x : X[i]) x = z(rng);
    y[i] = X[i][0] - 0.5 * X[i][3] + z(rng);
  }
  std::vector<std::string> names;
  for (std::size_t j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
  for (auto _ : state) benchmark::DoNotOptimize(tacit::stats::ols_fit(y, X, true, names));
}
BENCHMARK(BM_OlsFit)->Arg(500)->Arg(5000);

void BM_ParseJudgeResponse(benchmark::State& state) {
  const std::string raw =
      "Both papers address the same question, but the second is clearer about its assumptions.\n"
      "<label>1</label>\n<confidence>8</confidence>\n";
  for (auto _ : state) benchmark::DoNotOptimize(tacit::judge::parse_judge_response(raw));
}
BENCHMARK(BM_ParseJudgeResponse);

void BM_DictionaryAnnotate(benchmark::State& state) {
  std::vector<tacit::search::Hypothesis> hyps;
  tacit::prior::Dictionary dict;
  for (int i = 1; i <= 20; ++i) {
    const std::string id = "H" + std::string(i < 10 ? "0" : "") + std::to_string(i);
    hyps.push_back({id, "criterion " + std::to_string(i)});
    dict[id] = {"keyword" + std::to_string(i), "term" + std::to_string(i) + " phrase"};
  }
  const std::string comment =
      "The experiments are thorough and the keyword7 analysis is convincing, although term12 phrase "
      "is missing from the ablations and the writing could be tightened in places.";
  for (auto _ : state) benchmark::DoNotOptimize(tacit::annotate::dictionary_annotate(comment, hyps, dict));
}
BENCHMARK(BM_DictionaryAnnotate);

}  // namespace

BENCHMARK_MAIN();
