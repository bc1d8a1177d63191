#include "tacit/sim.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <set>
#include <stdexcept>

#include "tacit/util.hpp"

namespace tacit::sim {

using json = nlohmann::json;

namespace {

const std::vector<std::string>& default_distractors() {
  static const std::vector<std::string> pool = {
      "uses a smaller set of evaluation datasets",
      "reports fewer baseline comparisons",
      "has a less polished writing style",
      "proposes a method with higher computational cost",
      "provides fewer qualitative examples",
      "relies on older benchmark suites",
      "includes fewer figures illustrating the approach",
      "has a shorter discussion of limitations",
      "targets a narrower application area",
      "offers less open-source code",
      "presents results with wider error bars",
      "uses a less common programming framework",
      "has a longer and denser introduction",
      "reports experiments on smaller hardware budgets",
      "contains more notation in the main text",
      "describes a less novel dataset",
      "includes fewer user studies",
      "has a less descriptive title",
      "relies more on appendix material",
      "uses fewer random seeds in experiments",
      "reports fewer hyperparameter details",
      "focuses on a less popular task",
      "includes a less compelling motivating example",
      "gives fewer real-world deployment details",
  };
  return pool;
}

const std::vector<std::string>& variant_suffixes() {
  static const std::vector<std::string> s = {
      "",
      " overall",
      " in its main claims",
      " in its core argument",
      " throughout the manuscript",
      " in the way it is presented",
      " when examined closely",
      " relative to comparable submissions",
  };
  return s;
}

const std::vector<std::string>& filler_sentences() {
  static const std::vector<std::string> s = {
      "The paper is organized in a standard way.",
      "I have read the author response.",
      "Some typos remain in the appendix.",
      "The submission addresses a timely topic.",
      "The figures could use larger fonts.",
      "I would like to see the discussion expanded.",
  };
  return s;
}

const std::vector<std::string> kNegativeCues = {"weak",   "weakness", "sloppy",      "incomplete",
                                                "lacking", "poor",    "unclear", "insufficient"};
const std::vector<std::string> kPositiveCues = {"strength", "strong",     "excellent",
                                                "clear",    "convincing", "thorough"};

bool contains_ci(const std::string& haystack_lower, const std::string& needle) {
  return haystack_lower.find(to_lower(needle)) != std::string::npos;
}

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

std::string between(const std::string& text, const std::string& open, const std::string& close) {
  std::size_t a = text.find(open);
  if (a == std::string::npos) throw std::invalid_argument("scripted judge: prompt lacks '" + open + "'");
  a += open.size();
  std::size_t b = close.empty() ? text.size() : text.find(close, a);
  if (b == std::string::npos) throw std::invalid_argument("scripted judge: prompt lacks '" + close + "'");
  return text.substr(a, b - a);
}

std::optional<double> read_feature(const std::string& content, const std::string& aspect) {
  const std::string key = "On " + aspect + ", the work is rated ";
  std::size_t pos = content.find(key);
  if (pos == std::string::npos) return std::nullopt;
  const char* start = content.c_str() + pos + key.size();
  char* end = nullptr;
  double v = std::strtod(start, &end);
  if (end == start) return std::nullopt;
  return v;
}

void require_paper(const std::string& content) {
  if (content.find(", the work is rated ") == std::string::npos) {
    throw std::invalid_argument("scripted judge: unknown paper (no feature sentences in content)");
  }
}

// JSON array starting at `pos` (which must be '['), matched with string awareness.
std::optional<json> json_array_at(const std::string& text, std::size_t pos) {
  if (pos >= text.size() || text[pos] != '[') return std::nullopt;
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = pos; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') in_string = true;
    if (c == '[') ++depth;
    if (c == ']' && --depth == 0) {
      try {
        return json::parse(text.substr(pos, i - pos + 1));
      } catch (const json::exception&) {
        return std::nullopt;
      }
    }
  }
  return std::nullopt;
}

std::optional<long long> parse_marker(const std::string& prompt, const std::string& marker) {
  std::size_t pos = prompt.rfind(marker);
  if (pos == std::string::npos) return std::nullopt;
  return std::strtoll(prompt.c_str() + pos + marker.size(), nullptr, 10);
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == '.' || c == '!' || c == '?' || c == '\n') {
      if (!trim(cur).empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) out.push_back(cur);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void WorldConfig::validate_and_normalize() {
  if (criteria.empty()) throw ValidationError("world: at least one criterion required");
  std::set<std::string> ids;
  double weight_sum = 0.0;
  double prevalence_sum = 0.0;
  for (const auto& c : criteria) {
    if (c.crit_id.empty() || !ids.insert(c.crit_id).second) {
      throw ValidationError("world: criterion ids must be non-empty and unique ('" + c.crit_id + "')");
    }
    if (trim(c.description).empty() || trim(c.aspect).empty()) {
      throw ValidationError("world: criterion " + c.crit_id + " needs a description and an aspect");
    }
    if (c.keywords.empty()) throw ValidationError("world: criterion " + c.crit_id + " has no keywords");
    if (!(c.weight > 0.0)) throw ValidationError("world: weight of " + c.crit_id + " must be > 0");
    if (!(c.prevalence > 0.0 && c.prevalence <= 1.0)) {
      throw ValidationError("world: prevalence of " + c.crit_id + " must be in (0, 1]");
    }
    for (double v : {c.explicitness, c.prior_inclusion}) {
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("world: probabilities of " + c.crit_id + " must be in [0, 1]");
    }
    if (!(c.feature_spread > 0.0 && c.feature_spread <= 1.0)) {
      throw ValidationError("world: feature_spread of " + c.crit_id + " must be in (0, 1]");
    }
    weight_sum += c.weight;
    prevalence_sum += c.prevalence;
  }
  if (prevalence_sum > 1.0 + 1e-9) {
    throw ValidationError("world: prevalences are exclusive and must sum to at most 1");
  }
  for (const auto& a : criteria) {
    for (const auto& b : criteria) {
      if (&a != &b && to_lower(b.description).find(to_lower(a.description)) != std::string::npos) {
        throw ValidationError("world: description of " + a.crit_id + " occurs inside " + b.crit_id);
      }
    }
  }
  for (auto& c : criteria) c.weight /= weight_sum;
  if (reveal_order.empty()) {
    for (const auto& c : criteria) reveal_order.push_back(c.crit_id);
  }
  std::set<std::string> order(reveal_order.begin(), reveal_order.end());
  if (order != ids || reveal_order.size() != criteria.size()) {
    throw ValidationError("world: reveal_order must be a permutation of the criterion ids");
  }
  for (double v : {position_bias, label_noise}) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("world: position_bias and label_noise must be in [0, 1]");
  }
  if (confidence_gain < 0.0 || score_noise < 0.0 || bias_threshold < 0.0) {
    throw ValidationError("world: confidence_gain, score_noise and bias_threshold must be >= 0");
  }
  if (reviewers < 1) throw ValidationError("world: reviewers must be >= 1");
  if (first_round_distractors < 0) throw ValidationError("world: first_round_distractors must be >= 0");
  if (distractors.empty()) distractors = default_distractors();
  if (distractors.size() < 20) throw ValidationError("world: need at least 20 distractor clauses");
  for (const auto& d : distractors) {
    if (map_hypothesis(*this, hypothesis_text(d)) >= 0) {
      throw ValidationError("world: distractor '" + d + "' maps onto a criterion");
    }
  }
}

WorldConfig WorldConfig::from_json(const json& j) {
  WorldConfig w;
  try {
    w.world_seed = j.value("world_seed", w.world_seed);
    w.confidence_gain = j.value("confidence_gain", w.confidence_gain);
    w.reveal_order = j.value("reveal_order", w.reveal_order);
    w.position_bias = j.value("position_bias", w.position_bias);
    w.bias_threshold = j.value("bias_threshold", w.bias_threshold);
    w.label_noise = j.value("label_noise", w.label_noise);
    w.score_noise = j.value("score_noise", w.score_noise);
    w.reviewers = j.value("reviewers", w.reviewers);
    w.first_round_distractors = j.value("first_round_distractors", w.first_round_distractors);
    w.distractors = j.value("distractors", w.distractors);
    for (const auto& c : j.at("criteria")) {
      LatentCriterion lc;
      lc.crit_id = c.at("crit_id").get<std::string>();
      lc.description = c.at("description").get<std::string>();
      lc.aspect = c.at("aspect").get<std::string>();
      lc.keywords = c.at("keywords").get<std::vector<std::string>>();
      lc.weight = c.at("weight").get<double>();
      lc.prevalence = c.at("prevalence").get<double>();
      lc.explicitness = c.at("explicitness").get<double>();
      lc.prior_inclusion = c.value("prior_inclusion", lc.prior_inclusion);
      lc.feature_spread = c.value("feature_spread", lc.feature_spread);
      w.criteria.push_back(std::move(lc));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("world config: ") + e.what());
  }
  w.validate_and_normalize();
  return w;
}

WorldConfig WorldConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("world config not found: " + path.string());
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

json WorldConfig::to_json() const {
  json crits = json::array();
  for (const auto& c : criteria) {
    crits.push_back({{"crit_id", c.crit_id},
                     {"description", c.description},
                     {"aspect", c.aspect},
                     {"keywords", c.keywords},
                     {"weight", c.weight},
                     {"prevalence", c.prevalence},
                     {"explicitness", c.explicitness},
                     {"prior_inclusion", c.prior_inclusion},
                     {"feature_spread", c.feature_spread}});
  }
  return {{"world_seed", world_seed},
          {"criteria", crits},
          {"confidence_gain", confidence_gain},
          {"reveal_order", reveal_order},
          {"position_bias", position_bias},
          {"bias_threshold", bias_threshold},
          {"label_noise", label_noise},
          {"score_noise", score_noise},
          {"reviewers", reviewers},
          {"first_round_distractors", first_round_distractors},
          {"distractors", distractors}};
}

WorldConfig default_world() {
  WorldConfig w;
  w.world_seed = 7;
  w.criteria = {
      {"rigor", "is not theoretically rigorous", "theoretical rigor", {"rigor", "rigorous", "proof"},
       1.0, 0.45, 0.8, 0.9, 1.0},
      {"context", "is unclear about its contextualization within the related literature", "contextualization",
       {"related work", "contextualization", "literature"}, 1.0, 0.33, 0.4, 0.3, 1.0},
      {"interdisciplinary", "does not interact well with adjacent domains", "interdisciplinary reach",
       {"interdisciplinary", "adjacent domains"}, 1.0, 0.22, 0.1, 0.06, 1.0},
  };
  w.validate_and_normalize();
  return w;
}

std::string hypothesis_text(const std::string& clause) {
  return std::string(search::kCanonicalPrefix) + " " + clause + ".";
}

std::vector<std::string> criterion_variants(const LatentCriterion& c) {
  std::vector<std::string> out;
  for (const auto& s : variant_suffixes()) out.push_back(hypothesis_text(c.description + s));
  return out;
}

int map_hypothesis(const WorldConfig& config, const std::string& text) {
  const std::string lower = to_lower(text);
  for (std::size_t i = 0; i < config.criteria.size(); ++i) {
    if (contains_ci(lower, config.criteria[i].description)) return static_cast<int>(i);
  }
  return -1;
}

std::string feature_sentence(const std::string& aspect, double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", value);
  return "On " + aspect + ", the work is rated " + buf + " on a unit scale.";
}

// ---------------------------------------------------------------------------
// World

double SyntheticPaper::score() const {
  if (reviewer_scores.empty()) return 0.0;
  return std::accumulate(reviewer_scores.begin(), reviewer_scores.end(), 0.0) /
         static_cast<double>(reviewer_scores.size());
}

std::vector<corpus::PaperRecord> World::records() const {
  std::vector<corpus::PaperRecord> out;
  for (std::size_t i = 0; i < papers.size(); ++i) {
    const auto& p = papers[i];
    corpus::PaperRecord r;
    r.paper_id = p.paper_id;
    r.venue_id = p.venue_id;
    r.year = 2024;
    r.title = "Synthetic submission " + std::to_string(i + 1);
    r.scores = p.reviewer_scores;
    r.comments = p.comments;
    r.has_comments = true;
    std::string features;
    for (std::size_t c = 0; c < config.criteria.size(); ++c) {
      features += (c ? " " : "") + feature_sentence(config.criteria[c].aspect, p.features[c]);
    }
    r.extended_abstract.context = "This submission studies synthetic problem " + std::to_string(i % 17 + 1) + ".";
    r.extended_abstract.key_idea = "The key idea is approach " + p.paper_id + ".";
    r.extended_abstract.method_details = features;
    r.extended_abstract.experiments_results = "Experiments cover " + std::to_string(i % 5 + 2) + " settings.";
    r.extended_abstract.impact = "The authors expect the method to be reused.";
    out.push_back(std::move(r));
  }
  return out;
}

const SyntheticPaper& World::paper(const std::string& paper_id) const {
  if (index_.size() != papers.size()) {
    index_.clear();
    for (std::size_t i = 0; i < papers.size(); ++i) index_[papers[i].paper_id] = i;
  }
  auto it = index_.find(paper_id);
  if (it == index_.end()) throw std::invalid_argument("unknown paper " + paper_id);
  return papers[it->second];
}

World generate_world(WorldConfig config, std::size_t n_papers, std::size_t n_venues) {
  config.validate_and_normalize();
  if (n_venues == 0) throw ValidationError("generate_world: n_venues must be >= 1");
  World world;
  world.config = config;
  SplitMix64 rng(mix64(config.world_seed));
  const auto& fillers = filler_sentences();
  const std::size_t nc = config.criteria.size();
  for (std::size_t i = 0; i < n_papers; ++i) {
    SyntheticPaper p;
    char id[32];
    std::snprintf(id, sizeof id, "sim-%05zu", i + 1);
    p.paper_id = id;
    p.venue_id = "simvenue-" + std::to_string(i % n_venues + 1);
    p.features.assign(nc, 0.5);
    double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
      acc += config.criteria[c].prevalence;
      if (u < acc) {
        p.criterion = static_cast<int>(c);
        break;
      }
    }
    if (p.criterion >= 0) {
      const auto& c = config.criteria[static_cast<std::size_t>(p.criterion)];
      p.features[static_cast<std::size_t>(p.criterion)] = round3(0.5 + c.feature_spread * (rng.uniform() - 0.5));
    }
    double base = 1.0;
    for (std::size_t c = 0; c < nc; ++c) base += 9.0 * config.criteria[c].weight * p.features[c];
    for (int r = 0; r < config.reviewers; ++r) {
      p.reviewer_scores.push_back(round3(base + config.score_noise * (2.0 * rng.uniform() - 1.0)));
      std::string comment;
      for (std::size_t c = 0; c < nc; ++c) {
        const auto& crit = config.criteria[c];
        if (!(rng.uniform() < crit.explicitness)) continue;
        const auto& kw = crit.keywords[rng.below(crit.keywords.size())];
        comment += p.features[c] > 0.5 ? "Regarding " + kw + ", this is a clear strength of the work. "
                                       : "Regarding " + kw + ", this is a weakness of the work. ";
      }
      comment += fillers[rng.below(fillers.size())];
      p.comments.push_back(comment);
    }
    world.papers.push_back(std::move(p));
  }
  return world;
}

// ---------------------------------------------------------------------------
// Scripted judge

ScriptedVote scripted_vote(std::optional<double> margin, const WorldConfig& config, double u_bias, double u_noise,
                           int tie_label) {
  if (!margin) return {0, 2};
  const double m = *margin;
  int label = m > 0.0 ? 1 : m < 0.0 ? 0 : tie_label;
  if (std::fabs(m) < config.bias_threshold && u_bias < config.position_bias) label = 0;
  if (u_noise < config.label_noise) label = 1 - label;
  const long conf = std::lround(config.confidence_gain * std::fabs(m) * 10.0);
  return {label, static_cast<int>(std::clamp<long>(conf, 0, 10))};
}

ScriptedJudge::ScriptedJudge(WorldConfig config) : config_(std::move(config)) { config_.validate_and_normalize(); }

std::string ScriptedJudge::complete(const judge::JudgeRequest& request) { return respond(request.rendered_prompt); }

std::string ScriptedJudge::respond(const std::string& prompt) const {
  if (prompt.find("Task: Evaluate the following hypothesis") != std::string::npos) return evaluate(prompt);
  if (prompt.find("comprehensive_content_1") != std::string::npos &&
      prompt.find("Your task is to generate") != std::string::npos) {
    return generate(prompt);
  }
  if (prompt.find("You will perform") != std::string::npos) return generate_prior(prompt);
  if (prompt.find("Hypothesis B:") != std::string::npos) return match(prompt);
  if (prompt.find("Please annotate the human feedback") != std::string::npos) return annotate(prompt);
  throw std::invalid_argument("scripted judge: unrecognized prompt");
}

double ScriptedJudge::draw(const std::string& prompt, const char* tag) const {
  return unit_interval(mix64(stable_hash64(prompt) ^ mix64(config_.world_seed ^ stable_hash64(tag))));
}

std::string ScriptedJudge::evaluate(const std::string& prompt) const {
  const std::string hyp = between(prompt, "Hypothesis: \"", "\"\nPaper 1 Content: ");
  const std::string c1 = between(prompt, "Paper 1 Content: ", "\nPaper 2 Content: ");
  const std::string c2 = between(prompt, "Paper 2 Content: ", "\nInstructions:");
  require_paper(c1);
  require_paper(c2);
  std::optional<double> margin;
  int crit = map_hypothesis(config_, hyp);
  if (crit >= 0) {
    const auto& aspect = config_.criteria[static_cast<std::size_t>(crit)].aspect;
    auto f1 = read_feature(c1, aspect);
    auto f2 = read_feature(c2, aspect);
    if (!f1 || !f2) throw std::invalid_argument("scripted judge: unknown paper (missing " + aspect + ")");
    margin = *f2 - *f1;
  }
  int tie_label = 0;
  if (margin && *margin == 0.0) {
    double q1 = 0.0, q2 = 0.0;
    for (const auto& c : config_.criteria) {
      q1 += c.weight * read_feature(c1, c.aspect).value_or(0.5);
      q2 += c.weight * read_feature(c2, c.aspect).value_or(0.5);
    }
    tie_label = q1 > q2 ? 1 : 0;
  }
  auto vote = scripted_vote(margin, config_, draw(prompt, "bias"), draw(prompt, "noise"), tie_label);
  return judge::format_judge_response(vote.label, vote.confidence);
}

std::string ScriptedJudge::generate(const std::string& prompt) const {
  const std::size_t nc = config_.criteria.size();
  // Support: criteria on which some sampled pair's higher-scored paper is ahead.
  std::vector<bool> support(nc, false);
  for (std::size_t pos = prompt.find("comprehensive_content_1: "); pos != std::string::npos;
       pos = prompt.find("comprehensive_content_1: ", pos + 1)) {
    std::string block = prompt.substr(pos);
    std::string c1 = between(block, "comprehensive_content_1: ", "\nrating_1: ");
    std::string c2 = between(block, "comprehensive_content_2: ", "\nrating_2: ");
    for (std::size_t c = 0; c < nc; ++c) {
      auto f1 = read_feature(c1, config_.criteria[c].aspect);
      auto f2 = read_feature(c2, config_.criteria[c].aspect);
      if (f1 && f2 && *f2 > *f1) support[c] = true;
    }
  }
  std::set<std::string> existing;
  std::vector<bool> revealed(nc, false);
  const std::string marker = "distinct from those in ";
  if (std::size_t pos = prompt.rfind(marker); pos != std::string::npos) {
    if (auto arr = json_array_at(prompt, pos + marker.size())) {
      for (const auto& v : *arr) {
        if (!v.is_string()) continue;
        std::string t = v.get<std::string>();
        existing.insert(t);
        if (int c = map_hypothesis(config_, t); c >= 0) revealed[static_cast<std::size_t>(c)] = true;
      }
    }
  }
  const std::size_t k = 5;
  std::vector<std::string> out;
  std::size_t criterion_slots = k;
  if (existing.empty()) {
    criterion_slots -= std::min<std::size_t>(k, static_cast<std::size_t>(config_.first_round_distractors));
  }
  for (const auto& id : config_.reveal_order) {
    std::size_t c = 0;
    while (config_.criteria[c].crit_id != id) ++c;
    if (revealed[c] || !support[c]) continue;
    for (const auto& v : criterion_variants(config_.criteria[c])) {
      if (out.size() == criterion_slots) break;
      if (!existing.count(v)) out.push_back(v);
    }
    break;
  }
  std::vector<std::string> pool = config_.distractors;
  SplitMix64 rng(mix64(stable_hash64(prompt) ^ config_.world_seed));
  for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
  for (const auto& d : pool) {
    if (out.size() == k) break;
    std::string t = hypothesis_text(d);
    if (!existing.count(t)) out.push_back(t);
  }
  return json(out).dump();
}

std::string ScriptedJudge::generate_prior(const std::string& prompt) const {
  const long long sim = parse_marker(prompt, "<!-- nonce:").value_or(0);
  std::size_t round = 1, rounds = 4, k = 5;
  if (std::size_t pos = prompt.find("\n\nRound "); pos != std::string::npos) {
    char* end = nullptr;
    round = std::strtoul(prompt.c_str() + pos + 8, &end, 10);
    if (std::string(end).rfind(" of ", 0) == 0) rounds = std::strtoul(end + 4, nullptr, 10);
    if (auto g = parse_marker(prompt, "\nGenerate ")) k = static_cast<std::size_t>(*g);
  }
  SplitMix64 rng(mix64(config_.world_seed ^ mix64(0x9e10ULL + static_cast<std::uint64_t>(sim))));
  std::vector<std::string> list;
  for (const auto& c : config_.criteria) {
    auto variants = criterion_variants(c);
    bool include = rng.uniform() < c.prior_inclusion;
    const auto& v = variants[rng.below(variants.size())];
    if (include) list.push_back(v);
  }
  for (std::size_t i = list.size(); i > 1; --i) std::swap(list[i - 1], list[rng.below(i)]);
  std::vector<std::string> pool = config_.distractors;
  for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
  for (const auto& d : pool) {
    if (list.size() >= rounds * k) break;
    list.push_back(hypothesis_text(d));
  }
  std::vector<std::string> out;
  for (std::size_t i = (round - 1) * k; i < round * k && i < list.size(); ++i) out.push_back(list[i]);
  return json(out).dump();
}

std::string ScriptedJudge::match(const std::string& prompt) const {
  const std::string a = between(prompt, "Hypothesis A: \"", "\"\n");
  const std::string b = between(prompt, "Hypothesis B: \"", "\"\n");
  int ca = map_hypothesis(config_, a);
  int cb = map_hypothesis(config_, b);
  bool same = (ca >= 0 && ca == cb) || normalize_space(a) == normalize_space(b);
  return "<label>" + std::string(same ? "1" : "0") + "</label>";
}

std::string ScriptedJudge::annotate(const std::string& prompt) const {
  const std::string list = between(prompt, "Hypotheses:\n", "\n\nFeedback:\n");
  std::string feedback_raw = between(prompt, "\n\nFeedback:\n", "");
  std::string feedback;
  {
    std::size_t start = 0;
    while (start <= feedback_raw.size()) {
      std::size_t nl = feedback_raw.find('\n', start);
      std::string line = feedback_raw.substr(start, nl == std::string::npos ? std::string::npos : nl - start);
      if (trim(line).rfind("<!--", 0) != 0) feedback += line + "\n";
      if (nl == std::string::npos) break;
      start = nl + 1;
    }
  }
  std::vector<int> crits;
  std::size_t start = 0;
  while (start < list.size()) {
    std::size_t nl = list.find('\n', start);
    std::string line = list.substr(start, nl == std::string::npos ? std::string::npos : nl - start);
    if (line.size() > 1 && line[0] == 'H' && std::isdigit(static_cast<unsigned char>(line[1]))) {
      std::size_t dot = line.find(". ");
      if (dot != std::string::npos) crits.push_back(map_hypothesis(config_, line.substr(dot + 2)));
    }
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  const auto sentences = split_sentences(feedback);
  std::vector<int> scores;
  for (int c : crits) {
    int value = 0;
    if (c >= 0) {
      const auto& crit = config_.criteria[static_cast<std::size_t>(c)];
      for (const auto& s : sentences) {
        std::string lower = to_lower(s);
        bool hit = std::any_of(crit.keywords.begin(), crit.keywords.end(),
                               [&](const std::string& kw) { return contains_ci(lower, kw); });
        if (!hit) continue;
        bool negative = std::any_of(kNegativeCues.begin(), kNegativeCues.end(),
                                    [&](const std::string& w) { return contains_ci(lower, w); });
        bool positive = std::any_of(kPositiveCues.begin(), kPositiveCues.end(),
                                    [&](const std::string& w) { return contains_ci(lower, w); });
        value = negative ? -1 : positive ? 1 : -1;
        break;
      }
    }
    scores.push_back(value);
  }
  return json({{"scores", scores}}).dump();
}

// ---------------------------------------------------------------------------
// Recovery

std::vector<double> expected_coverage(const World& world, const std::vector<corpus::PaperPair>& pairs) {
  const std::size_t nc = world.config.criteria.size();
  std::vector<double> out(nc, 0.0);
  if (pairs.empty()) return out;
  for (const auto& pair : pairs) {
    const auto& low = world.paper(pair.low);
    const auto& high = world.paper(pair.high);
    for (std::size_t c = 0; c < nc; ++c) out[c] += high.features[c] > low.features[c];
  }
  for (auto& v : out) v /= static_cast<double>(pairs.size());
  return out;
}

RecoveryScore recovery_score(const std::vector<search::Hypothesis>& found,
                             const std::map<std::string, double>& posterior_coverage, const World& world,
                             const std::vector<corpus::PaperPair>& pairs) {
  const std::size_t nc = world.config.criteria.size();
  RecoveryScore r;
  r.expected = expected_coverage(world, pairs);
  r.measured.assign(nc, 0.0);
  std::vector<std::size_t> hits(nc, 0);
  std::size_t mapped = 0;
  for (const auto& h : found) {
    auto it = posterior_coverage.find(h.hyp_id);
    if (it == posterior_coverage.end()) {
      throw ValidationError("recovery_score: no posterior coverage for " + h.hyp_id + " (search not run?)");
    }
    int c = map_hypothesis(world.config, h.text);
    if (c < 0) continue;
    ++mapped;
    ++hits[static_cast<std::size_t>(c)];
    r.measured[static_cast<std::size_t>(c)] += it->second;
  }
  std::size_t recalled = 0;
  for (std::size_t c = 0; c < nc; ++c) {
    if (hits[c]) {
      ++recalled;
      r.measured[c] /= static_cast<double>(hits[c]);
    }
    r.per_criterion_error.push_back(std::fabs(r.measured[c] - r.expected[c]));
  }
  r.recall = static_cast<double>(recalled) / static_cast<double>(nc);
  r.precision = found.empty() ? 0.0 : static_cast<double>(mapped) / static_cast<double>(found.size());
  r.coverage_error =
      std::accumulate(r.per_criterion_error.begin(), r.per_criterion_error.end(), 0.0) / static_cast<double>(nc);
  return r;
}

prior::Dictionary dictionary_for(const std::vector<search::Hypothesis>& hyps, const WorldConfig& config) {
  prior::Dictionary d;
  for (const auto& h : hyps) {
    int c = map_hypothesis(config, h.text);
    if (c >= 0) d[h.hyp_id] = config.criteria[static_cast<std::size_t>(c)].keywords;
  }
  return d;
}

}  // namespace tacit::sim
