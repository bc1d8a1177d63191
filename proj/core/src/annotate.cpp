#include "tacit/annotate.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>

#include "tacit/stats.hpp"
#include "tacit/util.hpp"

namespace tacit::annotate {

using json = nlohmann::json;

std::vector<Comment> collect_comments(const std::vector<corpus::PaperRecord>& records) {
  std::vector<Comment> out;
  for (const auto& r : records) {
    const bool linked = r.scores.size() == r.comments.size();
    for (std::size_t i = 0; i < r.comments.size(); ++i) {
      if (trim(r.comments[i]).empty()) continue;
      Comment c;
      c.comment_id = r.paper_id + "#" + std::to_string(i);
      c.paper_id = r.paper_id;
      c.venue_id = r.venue_id;
      c.text = r.comments[i];
      c.reviewer_score = linked ? r.scores[i] : r.mean_score();
      c.score_from_mean = !linked;
      out.push_back(std::move(c));
    }
  }
  return out;
}

FewShotSet load_few_shot(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("few-shot fixtures not found: " + path.string());
  try {
    json j = json::parse(read_file(path));
    FewShotSet out;
    for (auto& [id, entry] : j.items()) {
      FewShot f;
      f.praise = entry.value("praise", std::vector<std::string>{});
      f.criticism = entry.value("criticism", std::vector<std::string>{});
      f.not_mentioned = entry.value("not_mentioned", std::vector<std::string>{});
      out[id] = std::move(f);
    }
    return out;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string render_hypothesis_list(const std::vector<search::Hypothesis>& hyps, const FewShotSet& few_shot) {
  std::string out;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    if (i) out += "\n";
    out += "H" + std::to_string(i + 1) + ". " + hyps[i].text;
    auto it = few_shot.find(hyps[i].hyp_id);
    if (it == few_shot.end()) continue;
    for (const auto& s : it->second.praise) out += "\n    Example (1): \"" + s + "\"";
    for (const auto& s : it->second.criticism) out += "\n    Example (-1): \"" + s + "\"";
    for (const auto& s : it->second.not_mentioned) out += "\n    Example (0): \"" + s + "\"";
  }
  return out;
}

std::string render_annotation_prompt(const std::string& comment, const std::vector<search::Hypothesis>& hyps,
                                     const FewShotSet& few_shot) {
  return judge::render_prompt(judge::builtin_template(judge::TemplateId::annotate),
                              {{"hypothesis_list", render_hypothesis_list(hyps, few_shot)},
                               {"feedback_text", comment}});
}

std::optional<std::vector<int>> parse_scores(const std::string& raw, std::size_t n) {
  std::size_t a = raw.find('{');
  std::size_t b = raw.rfind('}');
  if (a == std::string::npos || b == std::string::npos || b < a) return std::nullopt;
  try {
    json j = json::parse(raw.substr(a, b - a + 1));
    const json& arr = j.at("scores");
    if (!arr.is_array() || arr.size() != n) return std::nullopt;
    std::vector<int> out;
    for (const auto& v : arr) {
      if (!v.is_number_integer()) return std::nullopt;
      int x = v.get<int>();
      if (x < -1 || x > 1) return std::nullopt;
      out.push_back(x);
    }
    return out;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

std::optional<std::vector<int>> annotate_comment(const std::string& comment,
                                                 const std::vector<search::Hypothesis>& hyps,
                                                 const FewShotSet& few_shot, judge::JudgeClient& client) {
  if (trim(comment).empty()) throw ValidationError("annotate_comment: empty comment");
  if (hyps.empty()) throw ValidationError("annotate_comment: empty hypothesis set");
  const std::size_t n = hyps.size();
  auto request = client.make_request(judge::TemplateId::annotate, render_annotation_prompt(comment, hyps, few_shot));
  auto [raw, valid] = client.complete(request, [n](const std::string& r) { return parse_scores(r, n).has_value(); });
  if (!valid) return std::nullopt;
  return parse_scores(raw, n);
}

AnnotationRun annotate_all(const std::vector<Comment>& comments, const std::vector<search::Hypothesis>& hyps,
                           const FewShotSet& few_shot, judge::JudgeClient& client, unsigned threads) {
  std::vector<std::optional<std::vector<int>>> out(comments.size());
  parallel_for(comments.size(), threads,
               [&](std::size_t i) { out[i] = annotate_comment(comments[i].text, hyps, few_shot, client); });
  AnnotationRun run;
  for (std::size_t i = 0; i < comments.size(); ++i) {
    const auto& c = comments[i];
    if (!out[i]) {
      run.unannotated.push_back(c.comment_id);
      continue;
    }
    // The score is attached only here, after the judge has seen the text.
    run.vectors.push_back({c.comment_id, c.paper_id, c.venue_id, c.reviewer_score, c.score_from_mean, *out[i]});
  }
  return run;
}

std::vector<int> dictionary_annotate(const std::string& comment, const std::vector<search::Hypothesis>& hyps,
                                     const prior::Dictionary& dictionary) {
  std::vector<int> out;
  out.reserve(hyps.size());
  for (const auto& h : hyps) {
    auto it = dictionary.find(h.hyp_id);
    out.push_back(it != dictionary.end() && prior::dictionary_hit(it->second, comment) ? 1 : 0);
  }
  return out;
}

double agreement(const std::vector<int>& a, const std::vector<int>& b, AgreementMode mode) {
  if (a.size() != b.size()) {
    throw ValidationError("agreement: length mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw ValidationError("agreement: empty label lists");
  if (mode == AgreementMode::overlap) {
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
    return static_cast<double>(same) / static_cast<double>(a.size());
  }
  return stats::pearson(std::vector<double>(a.begin(), a.end()), std::vector<double>(b.begin(), b.end()));
}

std::vector<MentionStats> mention_stats(const std::vector<AnnotationVector>& vectors,
                                        const std::vector<search::Hypothesis>& hyps) {
  if (vectors.empty()) throw ValidationError("mention_stats: no annotated comments");
  const std::size_t n = hyps.size();
  std::vector<std::size_t> praise(n, 0), criticism(n, 0);
  for (const auto& v : vectors) {
    if (v.values.size() != n) {
      throw ValidationError("mention_stats: vector " + v.comment_id + " has " + std::to_string(v.values.size()) +
                            " entries, expected " + std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      praise[i] += v.values[i] == 1;
      criticism[i] += v.values[i] == -1;
    }
  }
  const double total = static_cast<double>(vectors.size());
  std::vector<MentionStats> out;
  for (std::size_t i = 0; i < n; ++i) {
    MentionStats m;
    m.hyp_id = hyps[i].hyp_id;
    m.praise_rate = static_cast<double>(praise[i]) / total;
    m.criticism_rate = static_cast<double>(criticism[i]) / total;
    m.mention_rate = static_cast<double>(praise[i] + criticism[i]) / total;
    out.push_back(m);
  }
  return out;
}

std::string vector_to_json(const AnnotationVector& v) {
  json j = {{"comment_id", v.comment_id},         {"paper_id", v.paper_id}, {"venue_id", v.venue_id},
            {"reviewer_score", v.reviewer_score}, {"values", v.values}};
  if (v.score_from_mean) j["score_from_mean"] = true;
  return j.dump();
}

std::vector<AnnotationVector> load_annotations(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("annotations not found: " + path.string());
  std::vector<AnnotationVector> out;
  for (auto& line : read_lines(path)) {
    try {
      json j = json::parse(line.text);
      AnnotationVector v;
      v.comment_id = j.at("comment_id").get<std::string>();
      v.paper_id = j.at("paper_id").get<std::string>();
      v.venue_id = j.at("venue_id").get<std::string>();
      v.reviewer_score = j.at("reviewer_score").get<double>();
      v.score_from_mean = j.value("score_from_mean", false);
      v.values = j.at("values").get<std::vector<int>>();
      for (int x : v.values) {
        if (x < -1 || x > 1) throw ValidationError("annotation value out of range in " + v.comment_id);
      }
      out.push_back(std::move(v));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line.number) + ": " + e.what());
    }
  }
  return out;
}

void save_annotations(const std::filesystem::path& path, const std::vector<AnnotationVector>& vectors) {
  std::string out;
  for (const auto& v : vectors) out += vector_to_json(v) + "\n";
  write_file_atomic(path, out);
}

std::string mention_csv(const std::vector<MentionStats>& stats) {
  std::string out = "hyp_id,mention_rate,praise_rate,criticism_rate\n";
  for (const auto& m : stats) {
    char buf[96];
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f\n", m.mention_rate, m.praise_rate, m.criticism_rate);
    out += m.hyp_id + buf;
  }
  return out;
}

}  // namespace tacit::annotate
