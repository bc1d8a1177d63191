#pragma once
// Synthetic worlds with planted evaluation criteria, and a scripted judge that plays every
// prompt role (evaluate, search, prior, match, annotate) from prompt text alone.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tacit/annotate.hpp"
#include "tacit/corpus.hpp"
#include "tacit/judge.hpp"
#include "tacit/prior.hpp"
#include "tacit/search.hpp"

namespace tacit::sim {

struct LatentCriterion {
  std::string crit_id;
  std::string description;  // hypothesis clause after "Compared to another paper, one paper"
  std::string aspect;       // noun phrase used in the feature sentence
  std::vector<std::string> keywords;
  double weight = 1.0;
  double prevalence = 0.3;
  double explicitness = 0.5;
  double prior_inclusion = 0.5;
  double feature_spread = 1.0;

  bool operator==(const LatentCriterion&) const = default;
};

struct WorldConfig {
  std::uint64_t world_seed = 7;
  std::vector<LatentCriterion> criteria;
  double confidence_gain = 1.0;
  std::vector<std::string> reveal_order;
  double position_bias = 0.0;
  double bias_threshold = 0.25;
  double label_noise = 0.0;
  double score_noise = 0.3;  // reviewer noise is uniform in [-score_noise, score_noise]
  int reviewers = 3;
  int first_round_distractors = 1;
  std::vector<std::string> distractors;  // clauses that map to no criterion

  // Throws ValidationError. Weights are normalized to sum to one.
  void validate_and_normalize();
  static WorldConfig from_json(const nlohmann::json& j);
  static WorldConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  bool operator==(const WorldConfig&) const = default;
};

// Three criteria of descending prevalence: one explicit, one partly explicit, one implicit.
WorldConfig default_world();

std::string hypothesis_text(const std::string& clause);
// Wording variants of a criterion, all of which map back to it.
std::vector<std::string> criterion_variants(const LatentCriterion& c);
// Index of the criterion whose description occurs in the text, or -1.
int map_hypothesis(const WorldConfig& config, const std::string& text);

std::string feature_sentence(const std::string& aspect, double value);

struct SyntheticPaper {
  std::string paper_id;
  std::string venue_id;
  std::vector<double> features;
  int criterion = -1;  // the one discriminating criterion, or -1
  std::vector<double> reviewer_scores;
  std::vector<std::string> comments;

  double score() const;
};

struct World {
  WorldConfig config;
  std::vector<SyntheticPaper> papers;

  std::vector<corpus::PaperRecord> records() const;
  const SyntheticPaper& paper(const std::string& paper_id) const;

 private:
  mutable std::map<std::string, std::size_t> index_;
};

World generate_world(WorldConfig config, std::size_t n_papers, std::size_t n_venues);

struct ScriptedVote {
  int label = 0;
  int confidence = 0;
};

// Rule for one judgment. margin = feature(Paper 2) - feature(Paper 1); u_bias and u_noise are
// uniform draws in [0, 1). tie_label is the answer for an exact tie (margin 0); the judge sets it
// to 1 when Paper 1 looks stronger overall, so a tie is stored as 0 in either presentation order.
ScriptedVote scripted_vote(std::optional<double> margin, const WorldConfig& config, double u_bias, double u_noise,
                           int tie_label = 0);

// Provider that answers every template from the prompt text and the world config.
class ScriptedJudge : public judge::Provider {
 public:
  explicit ScriptedJudge(WorldConfig config);
  std::string complete(const judge::JudgeRequest& request) override;
  std::string respond(const std::string& prompt) const;

  const WorldConfig& config() const { return config_; }

 private:
  std::string evaluate(const std::string& prompt) const;
  std::string generate(const std::string& prompt) const;
  std::string generate_prior(const std::string& prompt) const;
  std::string match(const std::string& prompt) const;
  std::string annotate(const std::string& prompt) const;
  double draw(const std::string& prompt, const char* tag) const;

  WorldConfig config_;
};

// Fraction of pairs whose higher-scored paper has the larger feature on each criterion; what a
// noise-free judge reports as posterior coverage.
std::vector<double> expected_coverage(const World& world, const std::vector<corpus::PaperPair>& pairs);

struct RecoveryScore {
  double recall = 0.0;
  double precision = 0.0;
  double coverage_error = 0.0;
  std::vector<double> per_criterion_error;
  std::vector<double> measured;  // mean coverage of the hypotheses mapped to each criterion
  std::vector<double> expected;
};

RecoveryScore recovery_score(const std::vector<search::Hypothesis>& found,
                             const std::map<std::string, double>& posterior_coverage, const World& world,
                             const std::vector<corpus::PaperPair>& pairs);

// Keyword dictionary over found hypotheses (criterion keywords; none for unmapped ones).
prior::Dictionary dictionary_for(const std::vector<search::Hypothesis>& hyps, const WorldConfig& config);

}  // namespace tacit::sim
