#pragma once
// Maps human review comments onto the hypothesis set as {-1, 0, 1} attitude vectors.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tacit/corpus.hpp"
#include "tacit/judge.hpp"
#include "tacit/prior.hpp"
#include "tacit/search.hpp"

namespace tacit::annotate {

struct Comment {
  std::string comment_id;  // "<paper_id>#<index>"
  std::string paper_id;
  std::string venue_id;
  std::string text;
  double reviewer_score = 0.0;
  bool score_from_mean = false;  // no per-review score; paper mean used instead
};

// One Comment per review text. Comment i takes scores[i] when the counts line up.
std::vector<Comment> collect_comments(const std::vector<corpus::PaperRecord>& records);

struct AnnotationVector {
  std::string comment_id;
  std::string paper_id;
  std::string venue_id;
  double reviewer_score = 0.0;
  bool score_from_mean = false;
  std::vector<int> values;
};

// Example comments per hypothesis, keyed by hyp_id.
struct FewShot {
  std::vector<std::string> praise;
  std::vector<std::string> criticism;
  std::vector<std::string> not_mentioned;
};
using FewShotSet = std::map<std::string, FewShot>;
FewShotSet load_few_shot(const std::filesystem::path& path);

// "H1. <text>" per hypothesis, followed by its indented examples when present.
std::string render_hypothesis_list(const std::vector<search::Hypothesis>& hyps, const FewShotSet& few_shot);
std::string render_annotation_prompt(const std::string& comment, const std::vector<search::Hypothesis>& hyps,
                                     const FewShotSet& few_shot);

// Parses {"scores": [...]} with exactly n entries in {-1, 0, 1}.
std::optional<std::vector<int>> parse_scores(const std::string& raw, std::size_t n);

// Judge annotation of one comment. Returns nullopt when the retry budget is spent on malformed
// output; the comment is then excluded from statistics.
std::optional<std::vector<int>> annotate_comment(const std::string& comment,
                                                 const std::vector<search::Hypothesis>& hyps,
                                                 const FewShotSet& few_shot, judge::JudgeClient& client);

struct AnnotationRun {
  std::vector<AnnotationVector> vectors;
  std::vector<std::string> unannotated;  // comment ids
};

AnnotationRun annotate_all(const std::vector<Comment>& comments, const std::vector<search::Hypothesis>& hyps,
                           const FewShotSet& few_shot, judge::JudgeClient& client, unsigned threads = 4);

// 1 at i iff any keyword of hyps[i] occurs case-insensitively in the comment.
std::vector<int> dictionary_annotate(const std::string& comment, const std::vector<search::Hypothesis>& hyps,
                                     const prior::Dictionary& dictionary);

enum class AgreementMode { overlap, pearson };
double agreement(const std::vector<int>& a, const std::vector<int>& b, AgreementMode mode);

struct MentionStats {
  std::string hyp_id;
  double mention_rate = 0.0;
  double praise_rate = 0.0;
  double criticism_rate = 0.0;
};

std::vector<MentionStats> mention_stats(const std::vector<AnnotationVector>& vectors,
                                        const std::vector<search::Hypothesis>& hyps);

std::string vector_to_json(const AnnotationVector& v);
std::vector<AnnotationVector> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::filesystem::path& path, const std::vector<AnnotationVector>& vectors);
std::string mention_csv(const std::vector<MentionStats>& stats);

}  // namespace tacit::annotate
