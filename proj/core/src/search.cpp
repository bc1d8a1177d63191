#include "tacit/search.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>

#include "tacit/util.hpp"

namespace tacit::search {

using json = nlohmann::json;
using judge::PresentationOrder;

std::string_view to_string(Origin origin) {
  return origin == Origin::posterior_search ? "posterior_search" : "prior_simulation";
}

namespace {

Origin origin_from_string(const std::string& s) {
  if (s == "posterior_search") return Origin::posterior_search;
  if (s == "prior_simulation") return Origin::prior_simulation;
  throw ValidationError("unknown hypothesis origin '" + s + "'");
}

bool has_canonical_prefix(const std::string& text) {
  static const std::string kAlt = "compared to the other, one paper";
  std::string lower = to_lower(text.substr(0, 48));
  return lower.rfind(to_lower(kCanonicalPrefix), 0) == 0 || lower.rfind(kAlt, 0) == 0;
}

void collect_strings(const json& j, std::vector<std::string>& out) {
  if (j.is_string()) {
    out.push_back(j.get<std::string>());
  } else if (j.is_array() || j.is_object()) {
    for (const auto& v : j) collect_strings(v, out);
  }
}

std::vector<std::string> keep_canonical(const std::vector<std::string>& candidates) {
  std::vector<std::string> out;
  for (const auto& c : candidates) {
    std::string t = canonicalize_hypothesis(c);
    if (has_canonical_prefix(t) && t.size() > std::string(kCanonicalPrefix).size() + 1) out.push_back(t);
  }
  return out;
}

}  // namespace

std::string canonicalize_hypothesis(const std::string& text) {
  std::string t = normalize_space(text);
  while (t.size() >= 2 && ((t.front() == '"' && t.back() == '"') || (t.front() == '\'' && t.back() == '\''))) {
    t = trim(t.substr(1, t.size() - 2));
  }
  return t;
}

std::string make_hyp_id(const std::string& canonical_text) {
  return "h" + sha256_hex(canonical_text).substr(0, 12);
}

std::vector<std::string> parse_hypotheses(const std::string& raw) {
  // JSON first: the whole reply, then the outermost bracketed span.
  for (auto [open, close] : {std::pair{'[', ']'}, std::pair{'{', '}'}}) {
    std::size_t a = raw.find(open);
    std::size_t b = raw.rfind(close);
    if (a == std::string::npos || b == std::string::npos || b <= a) continue;
    try {
      json j = json::parse(raw.substr(a, b - a + 1));
      std::vector<std::string> strings;
      collect_strings(j, strings);
      auto out = keep_canonical(strings);
      if (!out.empty()) return out;
    } catch (const json::exception&) {
    }
  }
  // Quoted sentences inside prose.
  std::vector<std::string> quoted;
  for (std::size_t pos = raw.find('"'); pos != std::string::npos;) {
    std::size_t end = raw.find('"', pos + 1);
    if (end == std::string::npos) break;
    quoted.push_back(raw.substr(pos + 1, end - pos - 1));
    pos = raw.find('"', end + 1);
  }
  auto out = keep_canonical(quoted);
  if (!out.empty()) return out;
  // Bare lines, optionally numbered or bulleted.
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= raw.size()) {
    std::size_t nl = raw.find('\n', start);
    std::string line = trim(raw.substr(start, nl == std::string::npos ? std::string::npos : nl - start));
    std::size_t skip = 0;
    while (skip < line.size() && (std::isdigit(static_cast<unsigned char>(line[skip])) || line[skip] == '.' ||
                                  line[skip] == ')' || line[skip] == '-' || line[skip] == '*' || line[skip] == ' ')) {
      ++skip;
    }
    lines.push_back(line.substr(skip));
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  return keep_canonical(lines);
}

// ---------------------------------------------------------------------------
// Aggregation

namespace {
void require_three(const std::vector<VoteRecord>& votes) {
  if (votes.size() != 3) {
    throw ValidationError("aggregation needs exactly 3 votes, got " + std::to_string(votes.size()));
  }
}
}  // namespace

Aggregate aggregate_confidence_weighted(const std::vector<VoteRecord>& votes) {
  require_three(votes);
  int ones = 0;
  int zeros = 0;
  for (const auto& v : votes) (v.label == 1 ? ones : zeros) += v.confidence;
  Aggregate a;
  a.final_label = ones > zeros ? 1 : 0;
  a.confidence_margin = ones > zeros ? ones - zeros : zeros - ones;
  a.consistent = votes[0].label == votes[1].label && votes[1].label == votes[2].label;
  return a;
}

int aggregate_majority(const std::vector<VoteRecord>& votes) {
  require_three(votes);
  int ones = 0;
  for (const auto& v : votes) ones += v.label == 1;
  return ones >= 2 ? 1 : 0;
}

// ---------------------------------------------------------------------------
// CoverageMatrix

CoverageMatrix::CoverageMatrix(std::vector<std::string> pair_index, std::vector<std::string> hyp_index)
    : pair_index_(std::move(pair_index)) {
  for (std::size_t i = 0; i < pair_index_.size(); ++i) {
    if (!pair_pos_.emplace(pair_index_[i], i).second) {
      throw ValidationError("duplicate pair id in coverage index: " + pair_index_[i]);
    }
  }
  cells_.resize(pair_index_.size());
  for (auto& h : hyp_index) add_hypothesis(h);
}

void CoverageMatrix::add_hypothesis(const std::string& hyp_id) {
  if (!hyp_pos_.emplace(hyp_id, hyp_index_.size()).second) {
    throw ValidationError("duplicate hypothesis id in coverage index: " + hyp_id);
  }
  hyp_index_.push_back(hyp_id);
  for (auto& row : cells_) row.emplace_back();
}

std::size_t CoverageMatrix::hyp_position(const std::string& hyp_id) const {
  auto it = hyp_pos_.find(hyp_id);
  if (it == hyp_pos_.end()) throw ValidationError("unknown hypothesis id " + hyp_id);
  return it->second;
}

std::size_t CoverageMatrix::pair_position(const std::string& pair_id) const {
  auto it = pair_pos_.find(pair_id);
  if (it == pair_pos_.end()) throw ValidationError("unknown pair id " + pair_id);
  return it->second;
}

void CoverageMatrix::set(const std::string& pair_id, const std::string& hyp_id, const Aggregate& cell) {
  cells_[pair_position(pair_id)][hyp_position(hyp_id)] = cell;
}

const Aggregate& CoverageMatrix::at(const std::string& pair_id, const std::string& hyp_id) const {
  const auto& c = cells_[pair_position(pair_id)][hyp_position(hyp_id)];
  if (!c) throw ValidationError("coverage cell " + pair_id + "/" + hyp_id + " is empty");
  return *c;
}

const std::optional<Aggregate>& CoverageMatrix::cell(std::size_t pair, std::size_t hyp) const {
  return cells_.at(pair).at(hyp);
}

bool CoverageMatrix::filled(const std::string& pair_id, const std::string& hyp_id) const {
  return cells_[pair_position(pair_id)][hyp_position(hyp_id)].has_value();
}

std::vector<std::string> CoverageMatrix::missing_cells() const {
  std::vector<std::string> out;
  for (std::size_t p = 0; p < pair_index_.size(); ++p) {
    for (std::size_t h = 0; h < hyp_index_.size(); ++h) {
      if (!cells_[p][h]) out.push_back(pair_index_[p] + "/" + hyp_index_[h]);
    }
  }
  return out;
}

void CoverageMatrix::require_complete() const {
  auto missing = missing_cells();
  if (missing.empty()) return;
  std::string list;
  for (std::size_t i = 0; i < missing.size() && i < 10; ++i) list += (i ? ", " : "") + missing[i];
  if (missing.size() > 10) list += ", ... (" + std::to_string(missing.size()) + " total)";
  throw ValidationError("incomplete coverage matrix; missing cells: " + list);
}

std::vector<std::string> unexplained_set(const CoverageMatrix& coverage) {
  coverage.require_complete();
  std::vector<std::string> out;
  const auto& hyps = coverage.hyp_index();
  for (std::size_t p = 0; p < coverage.pair_index().size(); ++p) {
    bool explained = false;
    for (std::size_t h = 0; h < hyps.size() && !explained; ++h) {
      explained = coverage.cell(p, h)->final_label == 1;
    }
    if (!explained) out.push_back(coverage.pair_index()[p]);
  }
  return out;
}

std::map<std::string, double> posterior_coverage(const CoverageMatrix& coverage) {
  coverage.require_complete();
  std::map<std::string, double> out;
  const auto n = coverage.pair_index().size();
  for (std::size_t h = 0; h < coverage.hyp_index().size(); ++h) {
    std::size_t ones = 0;
    for (std::size_t p = 0; p < n; ++p) ones += coverage.cell(p, h)->final_label == 1;
    out[coverage.hyp_index()[h]] = n == 0 ? 0.0 : static_cast<double>(ones) / static_cast<double>(n);
  }
  return out;
}

CoverageMatrix coverage_from_votes(const std::vector<std::string>& pair_index,
                                   const std::vector<std::string>& hyp_index,
                                   const std::vector<VoteRecord>& votes) {
  CoverageMatrix m(pair_index, hyp_index);
  std::map<std::pair<std::string, std::string>, std::vector<VoteRecord>> grouped;
  for (const auto& v : votes) grouped[{v.pair_id, v.hyp_id}].push_back(v);
  for (auto& [key, group] : grouped) {
    std::sort(group.begin(), group.end(), [](const VoteRecord& a, const VoteRecord& b) { return a.fold < b.fold; });
    m.set(key.first, key.second, aggregate_confidence_weighted(group));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Evaluation

PresentationOrder fold_order(std::uint64_t seed, const std::string& pair_id, const std::string& hyp_id,
                             int fold) {
  std::uint64_t h = mix64(seed ^ stable_hash64(pair_id + "|" + hyp_id + "|" + std::to_string(fold)));
  return (h & 1) ? PresentationOrder::low_first : PresentationOrder::high_first;
}

std::string render_evaluation(const corpus::PaperPair& pair, const Hypothesis& hyp,
                              const corpus::CorpusIndex& corpus, PresentationOrder order) {
  const auto& low = corpus.at(pair.low);
  const auto& high = corpus.at(pair.high);
  const auto& first = order == PresentationOrder::high_first ? low : high;
  const auto& second = order == PresentationOrder::high_first ? high : low;
  return judge::render_prompt(judge::builtin_template(judge::TemplateId::evaluate),
                              {{"hypothesis", hyp.text},
                               {"content1", corpus::render_content(first.extended_abstract)},
                               {"content2", corpus::render_content(second.extended_abstract)}});
}

VoteRecord judge_fold(const corpus::PaperPair& pair, const Hypothesis& hyp, int fold, PresentationOrder order,
                      const JudgeContext& ctx) {
  std::string prompt = judge::with_nonce(render_evaluation(pair, hyp, *ctx.corpus, order), fold);
  auto request = ctx.client->make_request(judge::TemplateId::evaluate, std::move(prompt), fold, order);
  auto response = ctx.client->submit(request);
  VoteRecord v;
  v.pair_id = pair.pair_id;
  v.hyp_id = hyp.hyp_id;
  v.fold = fold;
  v.order = order;
  if (!response.ok()) {
    v.label = 0;
    v.confidence = 0;
    v.flagged = true;
    return v;
  }
  v.label = order == PresentationOrder::high_first ? response.label : 1 - response.label;
  v.confidence = response.confidence;
  return v;
}

std::vector<VoteRecord> evaluate_pair(const corpus::PaperPair& pair, const Hypothesis& hyp,
                                      const JudgeContext& ctx) {
  std::vector<VoteRecord> votes;
  votes.reserve(3);
  for (int fold = 0; fold < 3; ++fold) {
    votes.push_back(judge_fold(pair, hyp, fold, fold_order(ctx.seed, pair.pair_id, hyp.hyp_id, fold), ctx));
  }
  return votes;
}

namespace {

// Votes for hyps x pairs, hypothesis-major, folds in order.
std::vector<VoteRecord> evaluate_all(const std::vector<Hypothesis>& hyps,
                                     const std::vector<corpus::PaperPair>& pairs, const JudgeContext& ctx) {
  const std::size_t n = hyps.size() * pairs.size();
  std::vector<std::vector<VoteRecord>> results(n);
  parallel_for(n, ctx.threads, [&](std::size_t t) {
    results[t] = evaluate_pair(pairs[t % pairs.size()], hyps[t / pairs.size()], ctx);
  });
  std::vector<VoteRecord> out;
  out.reserve(n * 3);
  for (auto& r : results) out.insert(out.end(), r.begin(), r.end());
  return out;
}

std::string format_rating(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string render_pair_dataset(const std::vector<corpus::PaperPair>& pairs, const corpus::CorpusIndex& corpus) {
  std::string out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& low = corpus.at(pairs[i].low);
    const auto& high = corpus.at(pairs[i].high);
    out += "\n[Pair " + std::to_string(i + 1) + "]\n";
    out += "comprehensive_content_1: " + corpus::render_content(low.extended_abstract) + "\n";
    out += "rating_1: " + format_rating(low.mean_score()) + "\n";
    out += "comprehensive_content_2: " + corpus::render_content(high.extended_abstract) + "\n";
    out += "rating_2: " + format_rating(high.mean_score()) + "\n";
  }
  return out;
}

std::string render_hypothesis_list_json(const std::vector<Hypothesis>& hyps) {
  json arr = json::array();
  for (const auto& h : hyps) arr.push_back(h.text);
  return arr.dump();
}

std::vector<Hypothesis> generate_hypotheses(const std::vector<corpus::PaperPair>& sampled_pairs,
                                            const std::vector<Hypothesis>& existing, std::size_t k, int round,
                                            const JudgeContext& ctx) {
  if (sampled_pairs.empty()) throw ValidationError("generate_hypotheses: no pairs sampled");
  const std::string prompt =
      judge::render_prompt(judge::builtin_template(judge::TemplateId::search),
                           {{"df", render_pair_dataset(sampled_pairs, *ctx.corpus)},
                            {"df_hypothesis", render_hypothesis_list_json(existing)}});
  std::set<std::string> seen;
  for (const auto& h : existing) seen.insert(h.hyp_id);
  std::vector<Hypothesis> accepted;
  auto wants_k = [k](const std::string& raw) { return parse_hypotheses(raw).size() >= k; };

  for (int attempt = 0; attempt < 2 && accepted.size() < k; ++attempt) {
    std::string p = attempt == 0 ? prompt : judge::with_retry_marker(prompt, attempt);
    auto request = ctx.client->make_request(judge::TemplateId::search, std::move(p), round);
    auto [raw, valid] = ctx.client->complete(request, wants_k);
    for (auto& text : parse_hypotheses(raw)) {
      if (accepted.size() == k) break;
      std::string id = make_hyp_id(text);
      if (!seen.insert(id).second) continue;
      accepted.push_back({id, text, round, Origin::posterior_search});
    }
  }
  if (accepted.size() < k) {
    throw GenerationUnderfilled("generation underfilled: got " + std::to_string(accepted.size()) + " of " +
                                    std::to_string(k) + " distinct hypotheses in round " + std::to_string(round),
                                accepted);
  }
  return accepted;
}

// ---------------------------------------------------------------------------
// Artifact IO

std::string vote_to_json(const VoteRecord& v) {
  json j = {{"pair_id", v.pair_id},       {"hyp_id", v.hyp_id},         {"fold", v.fold},
            {"order", to_string(v.order)}, {"label", v.label},           {"confidence", v.confidence},
            {"flagged", v.flagged}};
  return j.dump();
}

VoteRecord vote_from_json(const std::string& line) {
  try {
    json j = json::parse(line);
    VoteRecord v;
    v.pair_id = j.at("pair_id").get<std::string>();
    v.hyp_id = j.at("hyp_id").get<std::string>();
    v.fold = j.at("fold").get<int>();
    v.order = judge::order_from_string(j.at("order").get<std::string>());
    v.label = j.at("label").get<int>();
    v.confidence = j.at("confidence").get<int>();
    v.flagged = j.at("flagged").get<bool>();
    if (v.fold < 0 || v.fold > 2 || (v.label != 0 && v.label != 1) || v.confidence < 0 || v.confidence > 10) {
      throw ValidationError("vote out of range: " + line);
    }
    return v;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad vote record: ") + e.what());
  }
}

std::vector<VoteRecord> load_votes(const std::filesystem::path& path) {
  std::vector<VoteRecord> out;
  for (auto& line : read_lines(path)) out.push_back(vote_from_json(line.text));
  return out;
}

void save_hypotheses(const std::filesystem::path& path, const std::vector<Hypothesis>& hyps) {
  json arr = json::array();
  for (const auto& h : hyps) {
    arr.push_back({{"hyp_id", h.hyp_id}, {"text", h.text}, {"round", h.round}, {"origin", to_string(h.origin)}});
  }
  write_file_atomic(path, arr.dump(2) + "\n");
}

std::vector<Hypothesis> load_hypotheses(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("hypothesis file not found: " + path.string());
  try {
    json arr = json::parse(read_file(path));
    std::vector<Hypothesis> out;
    for (const auto& j : arr) {
      Hypothesis h;
      h.text = j.at("text").get<std::string>();
      h.hyp_id = j.contains("hyp_id") ? j.at("hyp_id").get<std::string>() : make_hyp_id(canonicalize_hypothesis(h.text));
      h.round = j.value("round", 1);
      h.origin = origin_from_string(j.value("origin", std::string("posterior_search")));
      if (trim(h.text).empty()) throw ValidationError("hypothesis " + h.hyp_id + " has empty text");
      out.push_back(std::move(h));
    }
    return out;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void save_round_reports(const std::filesystem::path& path, const std::vector<RoundReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) {
    arr.push_back({{"round", r.round},
                   {"new_hypotheses", r.new_hypotheses},
                   {"unexplained_fraction_before", r.unexplained_fraction_before},
                   {"unexplained_fraction_after", r.unexplained_fraction_after},
                   {"mean_confidence_margin", r.mean_confidence_margin},
                   {"mean_consistency", r.mean_consistency}});
  }
  write_file_atomic(path, arr.dump(2) + "\n");
}

std::vector<RoundReport> load_round_reports(const std::filesystem::path& path) {
  json arr = json::parse(read_file(path));
  std::vector<RoundReport> out;
  for (const auto& j : arr) {
    RoundReport r;
    r.round = j.at("round").get<int>();
    r.new_hypotheses = j.at("new_hypotheses").get<std::vector<std::string>>();
    r.unexplained_fraction_before = j.at("unexplained_fraction_before").get<double>();
    r.unexplained_fraction_after = j.at("unexplained_fraction_after").get<double>();
    r.mean_confidence_margin = j.at("mean_confidence_margin").get<double>();
    r.mean_consistency = j.at("mean_consistency").get<double>();
    out.push_back(std::move(r));
  }
  return out;
}

std::string coverage_csv(const CoverageMatrix& coverage) {
  std::string out = "pair_id,hyp_id,final_label,confidence_margin,consistent\n";
  for (std::size_t p = 0; p < coverage.pair_index().size(); ++p) {
    for (std::size_t h = 0; h < coverage.hyp_index().size(); ++h) {
      const auto& c = coverage.cell(p, h);
      if (!c) continue;
      out += coverage.pair_index()[p] + "," + coverage.hyp_index()[h] + "," + std::to_string(c->final_label) + "," +
             std::to_string(c->confidence_margin) + "," + (c->consistent ? "1" : "0") + "\n";
    }
  }
  return out;
}

double vote_scheme_agreement(const std::vector<VoteRecord>& votes) {
  std::map<std::pair<std::string, std::string>, std::vector<VoteRecord>> grouped;
  for (const auto& v : votes) grouped[{v.pair_id, v.hyp_id}].push_back(v);
  if (grouped.empty()) throw ValidationError("vote_scheme_agreement: no votes");
  std::size_t agree = 0;
  for (const auto& [key, group] : grouped) {
    agree += aggregate_majority(group) == aggregate_confidence_weighted(group).final_label;
  }
  return static_cast<double>(agree) / static_cast<double>(grouped.size());
}

// ---------------------------------------------------------------------------
// Search loop

namespace {

struct StatePaths {
  std::filesystem::path votes, hypotheses, rounds, checkpoint;
  explicit StatePaths(const std::filesystem::path& dir)
      : votes(dir / "votes.jsonl"),
        hypotheses(dir / "hypotheses.json"),
        rounds(dir / "rounds.json"),
        checkpoint(dir / "checkpoint.json") {}
};

std::string pairs_digest(const std::vector<corpus::PaperPair>& pairs) {
  std::string ids;
  for (const auto& p : pairs) ids += p.pair_id + "\n";
  return sha256_hex(ids);
}

double fraction(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : static_cast<double>(part) / static_cast<double>(whole);
}

void append_votes(const std::filesystem::path& path, const std::vector<VoteRecord>& votes) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  for (const auto& v : votes) out << vote_to_json(v) << '\n';
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_checkpoint(const StatePaths& paths, int round, bool done, const std::string& config_digest,
                      const std::string& pairs_dig) {
  std::string log = std::filesystem::exists(paths.votes) ? read_file(paths.votes) : std::string();
  json j = {{"round", round},
            {"done", done},
            {"vote_log_bytes", log.size()},
            {"vote_log_sha256", sha256_hex(log)},
            {"config_digest", config_digest},
            {"pairs_digest", pairs_dig}};
  write_file_atomic(paths.checkpoint, j.dump(2) + "\n");
}

}  // namespace

SearchResult run_search(const std::vector<corpus::PaperPair>& pairs, const JudgeContext& ctx,
                        const SearchConfig& config, const RunControl& control) {
  if (pairs.empty()) throw ValidationError("run_search: no pairs");
  if (!ctx.client || !ctx.corpus) throw std::invalid_argument("run_search: judge context incomplete");
  if (config.k_per_round == 0 || config.sample_size == 0 || config.max_rounds < 1) {
    throw ValidationError("run_search: k_per_round, sample_size and max_rounds must be positive");
  }

  std::vector<std::string> pair_index;
  for (const auto& p : pairs) pair_index.push_back(p.pair_id);
  std::map<std::string, const corpus::PaperPair*> pair_by_id;
  for (const auto& p : pairs) pair_by_id[p.pair_id] = &p;
  const std::string pdigest = pairs_digest(pairs);

  SearchResult result;
  result.coverage = CoverageMatrix(pair_index, {});
  int completed_round = 0;
  bool done = false;

  std::optional<StatePaths> paths;
  if (control.state_dir) {
    std::filesystem::create_directories(*control.state_dir);
    paths.emplace(*control.state_dir);
  }

  if (paths && control.resume && std::filesystem::exists(paths->checkpoint)) {
    json cp = json::parse(read_file(paths->checkpoint));
    if (!control.force && (cp.at("config_digest").get<std::string>() != control.config_digest ||
                           cp.at("pairs_digest").get<std::string>() != pdigest)) {
      throw ResumeConflict("checkpoint in " + control.state_dir->string() +
                           " was written under a different configuration or pair set");
    }
    completed_round = cp.at("round").get<int>();
    done = cp.at("done").get<bool>();
    auto bytes = cp.at("vote_log_bytes").get<std::size_t>();
    std::string log = std::filesystem::exists(paths->votes) ? read_file(paths->votes) : std::string();
    if (log.size() < bytes) throw ResumeConflict("vote log shorter than checkpoint records");
    log.resize(bytes);
    if (sha256_hex(log) != cp.at("vote_log_sha256").get<std::string>()) {
      throw ResumeConflict("vote log digest does not match checkpoint");
    }
    write_file_atomic(paths->votes, log);  // drops votes from an interrupted round
    for (auto& h : load_hypotheses(paths->hypotheses)) {
      if (h.round <= completed_round) result.hypotheses.push_back(std::move(h));
    }
    if (std::filesystem::exists(paths->rounds)) {
      for (auto& r : load_round_reports(paths->rounds)) {
        if (r.round <= completed_round) result.reports.push_back(std::move(r));
      }
    }
    result.votes = load_votes(paths->votes);
    std::vector<std::string> hyp_ids;
    for (const auto& h : result.hypotheses) hyp_ids.push_back(h.hyp_id);
    result.coverage = coverage_from_votes(pair_index, hyp_ids, result.votes);
    result.coverage.require_complete();
  } else if (paths) {
    std::filesystem::remove(paths->votes);
    std::filesystem::remove(paths->checkpoint);
    save_hypotheses(paths->hypotheses, {});
    save_round_reports(paths->rounds, {});
  }

  std::size_t unexplained = completed_round == 0 ? pairs.size() : unexplained_set(result.coverage).size();
  result.stopped_by_threshold = completed_round > 0 && fraction(unexplained, pairs.size()) < config.stop_fraction;

  for (int round = completed_round + 1; !done && round <= config.max_rounds; ++round) {
    std::vector<std::string> w_ids =
        round == 1 ? pair_index : unexplained_set(result.coverage);
    std::vector<corpus::PaperPair> w_pairs;
    for (const auto& id : w_ids) w_pairs.push_back(*pair_by_id.at(id));
    auto sampled = corpus::sample_pairs(w_pairs, std::min(config.sample_size, w_pairs.size()),
                                        mix64(ctx.seed ^ (0x9000ULL + static_cast<std::uint64_t>(round))));

    auto fresh = generate_hypotheses(sampled, result.hypotheses, config.k_per_round, round, ctx);
    auto votes = evaluate_all(fresh, pairs, ctx);

    RoundReport report;
    report.round = round;
    report.unexplained_fraction_before = fraction(w_ids.size(), pairs.size());
    std::map<std::pair<std::string, std::string>, std::vector<VoteRecord>> grouped;
    for (const auto& v : votes) grouped[{v.pair_id, v.hyp_id}].push_back(v);
    for (const auto& h : fresh) {
      result.coverage.add_hypothesis(h.hyp_id);
      report.new_hypotheses.push_back(h.hyp_id);
    }
    double margin_sum = 0.0;
    std::size_t consistent = 0;
    for (const auto& [key, group] : grouped) {
      auto cell = aggregate_confidence_weighted(group);
      result.coverage.set(key.first, key.second, cell);
      margin_sum += cell.confidence_margin;
      consistent += cell.consistent;
    }
    report.mean_confidence_margin = margin_sum / static_cast<double>(grouped.size());
    report.mean_consistency = fraction(consistent, grouped.size());

    unexplained = unexplained_set(result.coverage).size();
    report.unexplained_fraction_after = fraction(unexplained, pairs.size());
    result.hypotheses.insert(result.hypotheses.end(), fresh.begin(), fresh.end());
    result.votes.insert(result.votes.end(), votes.begin(), votes.end());
    result.reports.push_back(report);

    result.stopped_by_threshold = report.unexplained_fraction_after < config.stop_fraction;
    done = result.stopped_by_threshold || round == config.max_rounds;
    if (paths) {
      append_votes(paths->votes, votes);
      save_hypotheses(paths->hypotheses, result.hypotheses);
      save_round_reports(paths->rounds, result.reports);
      write_checkpoint(*paths, round, done, control.config_digest, pdigest);
    }
    if (control.halt_after_round && *control.halt_after_round == round) break;
  }
  return result;
}

SearchResult apply_hypotheses(const std::vector<Hypothesis>& frozen, const std::vector<corpus::PaperPair>& pairs,
                              const JudgeContext& ctx) {
  if (frozen.empty()) throw ValidationError("apply_hypotheses: frozen hypothesis set is empty");
  std::vector<std::string> pair_index, hyp_index;
  for (const auto& p : pairs) pair_index.push_back(p.pair_id);
  for (const auto& h : frozen) hyp_index.push_back(h.hyp_id);
  SearchResult result;
  result.hypotheses = frozen;
  result.votes = evaluate_all(frozen, pairs, ctx);
  result.coverage = coverage_from_votes(pair_index, hyp_index, result.votes);
  return result;
}

std::vector<SwapObservation> measure_swap_consistency(const std::vector<corpus::PaperPair>& pairs,
                                                      const std::vector<Hypothesis>& hyps,
                                                      const JudgeContext& ctx) {
  if (hyps.empty()) throw ValidationError("measure_swap_consistency: no hypotheses");
  std::vector<SwapObservation> out(pairs.size());
  parallel_for(pairs.size(), ctx.threads, [&](std::size_t i) {
    const auto& pair = pairs[i];
    std::size_t agree = 0, flagged = 0;
    for (const auto& h : hyps) {
      auto a = judge_fold(pair, h, 0, PresentationOrder::high_first, ctx);
      auto b = judge_fold(pair, h, 0, PresentationOrder::low_first, ctx);
      agree += a.label == b.label;
      flagged += a.flagged + b.flagged;
    }
    out[i] = {pair.pair_id, pair.gap, fraction(agree, hyps.size()), flagged};
  });
  return out;
}

}  // namespace tacit::search
