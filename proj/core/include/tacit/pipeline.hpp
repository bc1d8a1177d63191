#pragma once
// Command implementations behind the `tacit` CLI. Commands talk to each other only through
// artifacts in the output directory.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tacit/prior.hpp"
#include "tacit/search.hpp"
#include "tacit/sim.hpp"
#include "tacit/stats.hpp"

namespace tacit::pipeline {

enum class MatcherKind { judge, dictionary, both };

struct RunConfig {
  std::filesystem::path corpus_path = "corpus.jsonl";
  std::optional<std::filesystem::path> provider_path;
  std::optional<std::filesystem::path> scripted_world;
  std::uint64_t seed = 42;
  double threshold_sigma = 1.0;
  std::size_t sample_n = 0;  // 0 keeps every pair
  search::SearchConfig search;
  prior::PriorConfig prior;
  prior::CountMode count_mode = prior::CountMode::binary_window;
  MatcherKind matcher = MatcherKind::judge;
  std::optional<std::filesystem::path> dictionary_path;
  std::optional<std::filesystem::path> few_shot_path;
  std::optional<std::filesystem::path> cache_dir;
  stats::TieBreak tie_break = stats::TieBreak::posterior_desc;
  std::size_t sim_papers = 500;
  std::size_t sim_venues = 2;
  unsigned threads = 4;
  std::filesystem::path output_dir = "tacit-out";

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  // SHA-256 of the settings that affect results. Input files count by content, not path;
  // output_dir, threads and cache_dir are excluded.
  std::string digest() const;
};

struct CommandOptions {
  bool resume = false;
  bool force = false;
  std::optional<int> halt_after_round;          // search: stop after checkpointing this round
  std::optional<std::filesystem::path> table;   // analyze: Table 1 style fixture instead of artifacts
  std::optional<std::filesystem::path> hypotheses;  // annotate/match: hypothesis file override
  // ingest
  std::string venue_id;
  std::string api_base = "https://api2.openreview.net";
  std::size_t page_size = 100;
  std::optional<std::filesystem::path> transcript;
  std::optional<std::string> resume_token;
  std::optional<std::filesystem::path> sidecar;
  bool live = false;
};

// Exclusive writer lock on an output directory (a lock file holding the owner pid). A lock
// left by a dead process is taken over.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

// Reads either a hypothesis-set array or an object with a "hypotheses" array (Table 1 fixture).
std::vector<search::Hypothesis> load_hypothesis_file(const std::filesystem::path& path);

struct Table1Row {
  std::string hyp_id;
  std::string label;
  std::string text;
  int round = 0;
  double prior = 0.0;
  double posterior = 0.0;
  int rank = 0;
  double mention = 0.0;
};
std::vector<Table1Row> load_table(const std::filesystem::path& path);

struct TableAnalysis {
  double prior_mention = 0.0;
  double posterior_mention = 0.0;
  std::vector<stats::ShiftRow> shifts;
  std::size_t rank_matches = 0;
  stats::AttentionShares shares;
};
TableAnalysis analyze_table(const std::vector<Table1Row>& rows, stats::TieBreak tie_break);

void cmd_ingest(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out);
void cmd_pairs(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out);
void cmd_search(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out);
void cmd_priors(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out);
void cmd_match(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out);
void cmd_annotate(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out);
void cmd_analyze(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out);
void cmd_report(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out);

struct SimulationSummary {
  sim::RecoveryScore recovery;
  std::size_t n_pairs = 0;
  std::size_t rounds = 0;
  double unexplained_fraction = 1.0;
};
// Generates the world into output_dir and runs every stage on it with the scripted judge.
SimulationSummary cmd_simulate(RunConfig cfg, const CommandOptions& opts, std::ostream& out);

// Exit code for an exception escaping a command: 2 validation, 3 transport, 4 resume conflict,
// 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace tacit::pipeline
