#pragma once
// Iterative hypothesis search: generation from unexplained pairs, three-fold
// confidence-weighted evaluation with randomized positions, coverage tracking, and the
// stop-fraction rule. State is checkpointed per round and resumable.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tacit/corpus.hpp"
#include "tacit/judge.hpp"

namespace tacit::search {

inline constexpr const char* kCanonicalPrefix = "Compared to another paper, one paper";

enum class Origin { posterior_search, prior_simulation };
std::string_view to_string(Origin origin);

struct Hypothesis {
  std::string hyp_id;
  std::string text;
  int round = 1;
  Origin origin = Origin::posterior_search;

  bool operator==(const Hypothesis&) const = default;
};

// hyp_id for a canonical text: "h" + 12 hex digits of its SHA-256.
std::string make_hyp_id(const std::string& canonical_text);
std::string canonicalize_hypothesis(const std::string& text);

// Pulls canonical hypothesis sentences out of a generation reply. Accepts a JSON array of
// strings, a JSON object holding such an array, quoted sentences inside prose, or bare lines.
std::vector<std::string> parse_hypotheses(const std::string& raw);

struct VoteRecord {
  std::string pair_id;
  std::string hyp_id;
  int fold = 0;
  judge::PresentationOrder order = judge::PresentationOrder::high_first;
  int label = 0;
  int confidence = 0;
  bool flagged = false;

  bool operator==(const VoteRecord&) const = default;
};

struct Aggregate {
  int final_label = 0;
  int confidence_margin = 0;
  bool consistent = true;
};

// final_label = 1 iff the summed confidence of label-1 votes strictly exceeds that of label-0
// votes. Requires exactly three votes.
Aggregate aggregate_confidence_weighted(const std::vector<VoteRecord>& votes);
int aggregate_majority(const std::vector<VoteRecord>& votes);

class CoverageMatrix {
 public:
  CoverageMatrix() = default;
  CoverageMatrix(std::vector<std::string> pair_index, std::vector<std::string> hyp_index);

  const std::vector<std::string>& pair_index() const { return pair_index_; }
  const std::vector<std::string>& hyp_index() const { return hyp_index_; }

  void add_hypothesis(const std::string& hyp_id);
  void set(const std::string& pair_id, const std::string& hyp_id, const Aggregate& cell);
  const Aggregate& at(const std::string& pair_id, const std::string& hyp_id) const;
  const std::optional<Aggregate>& cell(std::size_t pair, std::size_t hyp) const;
  bool filled(const std::string& pair_id, const std::string& hyp_id) const;

  // "pair_id/hyp_id" for every empty cell.
  std::vector<std::string> missing_cells() const;
  void require_complete() const;

  std::size_t hyp_position(const std::string& hyp_id) const;
  std::size_t pair_position(const std::string& pair_id) const;

 private:
  std::vector<std::string> pair_index_;
  std::vector<std::string> hyp_index_;
  std::map<std::string, std::size_t> pair_pos_;
  std::map<std::string, std::size_t> hyp_pos_;
  std::vector<std::vector<std::optional<Aggregate>>> cells_;  // [pair][hyp]
};

// Pairs whose final label is 0 under every hypothesis. Throws on an incomplete matrix.
std::vector<std::string> unexplained_set(const CoverageMatrix& coverage);

// Fraction of pairs with final label 1, per hypothesis.
std::map<std::string, double> posterior_coverage(const CoverageMatrix& coverage);

// Rebuilds the coverage view from a vote log (three votes per cell).
CoverageMatrix coverage_from_votes(const std::vector<std::string>& pair_index,
                                   const std::vector<std::string>& hyp_index,
                                   const std::vector<VoteRecord>& votes);

struct RoundReport {
  int round = 0;
  std::vector<std::string> new_hypotheses;
  double unexplained_fraction_before = 1.0;
  double unexplained_fraction_after = 1.0;
  double mean_confidence_margin = 0.0;
  double mean_consistency = 0.0;
};

// Shared context for judge calls over a corpus.
struct JudgeContext {
  const corpus::CorpusIndex* corpus = nullptr;
  judge::JudgeClient* client = nullptr;
  std::uint64_t seed = 0;
  unsigned threads = 4;
};

// Order for one fold, derived from (seed, pair_id, hyp_id, fold) only.
judge::PresentationOrder fold_order(std::uint64_t seed, const std::string& pair_id,
                                    const std::string& hyp_id, int fold);

// Renders the evaluation prompt with the papers bound per `order` (without nonce).
std::string render_evaluation(const corpus::PaperPair& pair, const Hypothesis& hyp,
                              const corpus::CorpusIndex& corpus, judge::PresentationOrder order);

// One fold judged in a fixed order; the stored label is already position-corrected.
VoteRecord judge_fold(const corpus::PaperPair& pair, const Hypothesis& hyp, int fold,
                      judge::PresentationOrder order, const JudgeContext& ctx);

// Three folds with nonces 0..2 and seeded per-fold presentation order.
std::vector<VoteRecord> evaluate_pair(const corpus::PaperPair& pair, const Hypothesis& hyp,
                                      const JudgeContext& ctx);

class GenerationUnderfilled : public std::runtime_error {
 public:
  GenerationUnderfilled(const std::string& what, std::vector<Hypothesis> partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const std::vector<Hypothesis>& partial() const { return partial_; }

 private:
  std::vector<Hypothesis> partial_;
};

// Renders the {df} block for the search prompt; the lower-scored paper is always Paper 1.
std::string render_pair_dataset(const std::vector<corpus::PaperPair>& pairs,
                                const corpus::CorpusIndex& corpus);
std::string render_hypothesis_list_json(const std::vector<Hypothesis>& hyps);

// Generates k new distinct hypotheses. Duplicates of existing text are discarded and the
// prompt is re-issued once; still short of k throws GenerationUnderfilled.
std::vector<Hypothesis> generate_hypotheses(const std::vector<corpus::PaperPair>& sampled_pairs,
                                            const std::vector<Hypothesis>& existing, std::size_t k,
                                            int round, const JudgeContext& ctx);

struct SearchConfig {
  std::size_t k_per_round = 5;
  std::size_t sample_size = 50;
  double stop_fraction = 0.05;
  int max_rounds = 10;
};

struct SearchResult {
  std::vector<Hypothesis> hypotheses;
  CoverageMatrix coverage;
  std::vector<RoundReport> reports;
  std::vector<VoteRecord> votes;
  bool stopped_by_threshold = false;
};

struct RunControl {
  std::optional<std::filesystem::path> state_dir;  // vote log + checkpoint live here
  bool resume = false;
  bool force = false;                    // resume even if the config digest differs
  std::optional<int> halt_after_round;   // return after checkpointing this round (testing)
  std::string config_digest;             // embedded in the checkpoint
};

// Algorithm loop. Each round: sample min(sample_size, |W|) pairs from W, generate k
// hypotheses, evaluate them on all pairs, recompute W, report, checkpoint.
SearchResult run_search(const std::vector<corpus::PaperPair>& pairs, const JudgeContext& ctx,
                        const SearchConfig& config, const RunControl& control = {});

// Evaluates a frozen hypothesis set on (possibly new) pairs, no generation.
SearchResult apply_hypotheses(const std::vector<Hypothesis>& frozen,
                              const std::vector<corpus::PaperPair>& pairs, const JudgeContext& ctx);

// Judges every (pair, hypothesis) once in each presentation order; consistency is the share of
// hypotheses whose stored labels agree across the swap.
struct SwapObservation {
  std::string pair_id;
  double gap = 0.0;
  double consistency = 0.0;
  std::size_t flagged = 0;
};
std::vector<SwapObservation> measure_swap_consistency(const std::vector<corpus::PaperPair>& pairs,
                                                      const std::vector<Hypothesis>& hyps,
                                                      const JudgeContext& ctx);

// Artifact IO.
std::string vote_to_json(const VoteRecord& v);
VoteRecord vote_from_json(const std::string& line);
std::vector<VoteRecord> load_votes(const std::filesystem::path& path);
void save_hypotheses(const std::filesystem::path& path, const std::vector<Hypothesis>& hyps);
std::vector<Hypothesis> load_hypotheses(const std::filesystem::path& path);
void save_round_reports(const std::filesystem::path& path, const std::vector<RoundReport>& reports);
std::vector<RoundReport> load_round_reports(const std::filesystem::path& path);
std::string coverage_csv(const CoverageMatrix& coverage);

// Fraction of cells where majority and confidence-weighted labels agree.
double vote_scheme_agreement(const std::vector<VoteRecord>& votes);

}  // namespace tacit::search
