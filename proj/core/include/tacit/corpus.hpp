#pragma once
// Judged corpus: paper records, venue score statistics, and score-gapped pairs.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tacit::corpus {

struct ExtendedAbstract {
  std::string context;
  std::string key_idea;
  std::string method_details;
  std::string experiments_results;
  std::string impact;
  std::optional<std::string> raw_abstract;

  // All five structured sections non-empty.
  bool judgeable() const;

  bool operator==(const ExtendedAbstract&) const = default;
};

struct PaperRecord {
  std::string paper_id;
  std::string venue_id;
  int year = 0;
  std::string title;
  std::vector<double> scores;
  std::vector<double> reviewer_confidences;
  std::vector<std::string> comments;
  ExtendedAbstract extended_abstract;
  // Optional fields are kept distinct from empty lists so serialization round-trips.
  bool has_confidences = false;
  bool has_comments = false;

  double mean_score() const;

  bool operator==(const PaperRecord&) const = default;
};

struct Reject {
  std::size_t line = 0;
  std::string reason;
};

struct LoadResult {
  std::vector<PaperRecord> records;
  std::vector<Reject> rejects;
};

inline constexpr const char* kCorpusSchemaVersion = "1";

// Parses one JSON object into a record. Throws ValidationError naming the offending field.
PaperRecord parse_record(const std::string& json_line);
std::string serialize_record(const PaperRecord& record);

// Reads corpus JSONL. Malformed lines go to the reject report with their line number;
// a duplicate paper_id is a hard ValidationError.
LoadResult load_corpus(const std::filesystem::path& path,
                       const std::string& schema_version = kCorpusSchemaVersion);
void save_corpus(const std::filesystem::path& path, const std::vector<PaperRecord>& records);
std::string serialize_corpus(const std::vector<PaperRecord>& records);

struct VenueStats {
  std::string venue_id;
  double mean_score = 0.0;
  double std_score = 0.0;  // population std of per-paper mean scores
  double within_paper_std_mean = 0.0;
  double across_paper_std = 0.0;
  double median_reviewer_confidence = 0.0;  // NaN when no confidences were reported
  std::size_t n_papers = 0;
};

VenueStats venue_stats(const std::vector<PaperRecord>& records, const std::string& venue_id);

// Median of a list; even-sized lists average the two middle values.
double median(std::vector<double> values);
double population_std(const std::vector<double>& values);

struct PaperPair {
  std::string pair_id;
  std::string venue_id;
  std::string low;
  std::string high;
  double gap = 0.0;

  bool operator==(const PaperPair&) const = default;
};

std::string make_pair_id(const std::string& venue_id, const std::string& low,
                         const std::string& high);

// Every ordered (low, high) pair in the venue with mean(high) - mean(low) > min_gap,
// sorted by pair_id. Records with no scores are ineligible.
std::vector<PaperPair> pairs_above_gap(const std::vector<PaperRecord>& records,
                                       const std::string& venue_id, double min_gap);

// pairs_above_gap with min_gap = threshold_sigma * venue std_score.
std::vector<PaperPair> build_pairs(const std::vector<PaperRecord>& records,
                                   const std::string& venue_id, double threshold_sigma = 1.0);

// Pairs for every venue in the corpus, sorted by pair_id. Venues with fewer than two scored
// papers or zero spread are skipped and listed in `skipped`.
std::vector<PaperPair> build_all_pairs(const std::vector<PaperRecord>& records,
                                       double threshold_sigma,
                                       std::vector<std::string>* skipped = nullptr);

// Uniform sample without replacement (seeded partial Fisher-Yates).
std::vector<PaperPair> sample_pairs(const std::vector<PaperPair>& pairs, std::size_t n,
                                    std::uint64_t seed);

std::vector<PaperPair> load_pairs(const std::filesystem::path& path);
void save_pairs(const std::filesystem::path& path, const std::vector<PaperPair>& pairs);

// Index of records by paper_id for pair lookups.
class CorpusIndex {
 public:
  explicit CorpusIndex(const std::vector<PaperRecord>& records);
  const PaperRecord& at(const std::string& paper_id) const;
  bool contains(const std::string& paper_id) const { return by_id_.count(paper_id) != 0; }

 private:
  std::map<std::string, const PaperRecord*> by_id_;
};

// The "comprehensive content" block shown to the judge for one paper.
std::string render_content(const ExtendedAbstract& abstract);

}  // namespace tacit::corpus
