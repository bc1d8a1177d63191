#pragma once
// Data-free prior elicitation and prior frequency of posterior hypotheses.

#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tacit/judge.hpp"
#include "tacit/search.hpp"

namespace tacit::prior {

struct PriorSample {
  int sim_id = 0;
  int round = 1;
  int slot = 0;
  std::string text;

  bool operator==(const PriorSample&) const = default;
};

struct PriorConfig {
  int n_sims = 250;
  int rounds = 4;
  int k = 5;
};

struct ElicitResult {
  std::vector<PriorSample> samples;  // ordered by (sim_id, round, slot)
  std::vector<int> excluded_sims;    // underfilled twice
  std::vector<int> retried_sims;
};

// Prompt for one round of one simulation. Round 1 is the shipped template; later rounds carry
// a "Round r of R" block listing the simulation's earlier hypotheses.
std::string render_prior_prompt(int round, int rounds, int k, const std::vector<std::string>& earlier);

// Runs n_sims independent simulations. With `state_file` set, completed simulations are
// appended to it as JSONL and skipped when the call is repeated (resume).
ElicitResult elicit_priors(judge::JudgeClient& client, const PriorConfig& config,
                           const std::optional<std::filesystem::path>& state_file = std::nullopt,
                           unsigned threads = 4);

std::string sample_to_json(const PriorSample& s);
std::vector<PriorSample> load_priors(const std::filesystem::path& path);
void save_priors(const std::filesystem::path& path, const std::vector<PriorSample>& samples);

class Matcher {
 public:
  virtual ~Matcher() = default;
  virtual bool matches(const search::Hypothesis& posterior, const std::string& prior_text) = 0;
  // Number of distinct underlying comparisons performed (cache misses).
  virtual std::size_t calls() const = 0;
};

// Judge-mediated matching with the match prompt. The two texts are ordered before rendering
// so (a, b) and (b, a) share one request. Identical texts match without a call.
class JudgeMatcher : public Matcher {
 public:
  explicit JudgeMatcher(judge::JudgeClient& client) : client_(client) {}
  bool matches(const search::Hypothesis& posterior, const std::string& prior_text) override;
  bool matches_text(const std::string& a, const std::string& b);
  std::size_t calls() const override { return calls_.load(); }
  std::size_t flagged() const { return flagged_.load(); }

 private:
  judge::JudgeClient& client_;
  std::mutex mu_;
  std::map<std::pair<std::string, std::string>, bool> memo_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> flagged_{0};
};

// hyp_id -> keyword list, case-insensitive substring semantics.
using Dictionary = std::map<std::string, std::vector<std::string>>;
Dictionary load_dictionary(const std::filesystem::path& path);
bool dictionary_hit(const std::vector<std::string>& keywords, const std::string& text);

// A hypothesis without a dictionary entry never matches.
class DictionaryMatcher : public Matcher {
 public:
  explicit DictionaryMatcher(Dictionary dictionary) : dictionary_(std::move(dictionary)) {}
  bool matches(const search::Hypothesis& posterior, const std::string& prior_text) override;
  std::size_t calls() const override { return calls_.load(); }

 private:
  Dictionary dictionary_;
  std::atomic<std::size_t> calls_{0};
};

enum class CountMode {
  binary_window,    // default: a window counts once if any sample matches
  occurrence_rate,  // non-default: matching samples / all samples
};
std::string_view to_string(CountMode mode);

struct PriorFrequency {
  std::string hyp_id;
  double frequency = 0.0;
  int n_windows = 0;
  CountMode mode = CountMode::binary_window;
};

// One window per simulation. The matcher is called once per (hypothesis, distinct prior text).
std::vector<PriorFrequency> prior_frequency(const std::vector<search::Hypothesis>& posterior,
                                            const std::vector<PriorSample>& priors, Matcher& matcher,
                                            CountMode mode = CountMode::binary_window,
                                            unsigned threads = 4);

std::string prior_frequency_csv(const std::vector<PriorFrequency>& rows);

}  // namespace tacit::prior
