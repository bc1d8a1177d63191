#include "tacit/corpus.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "tacit/util.hpp"

namespace tacit::corpus {

using json = nlohmann::json;

bool ExtendedAbstract::judgeable() const {
  return !trim(context).empty() && !trim(key_idea).empty() && !trim(method_details).empty() &&
         !trim(experiments_results).empty() && !trim(impact).empty();
}

double PaperRecord::mean_score() const {
  if (scores.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

namespace {

const json& require(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end()) throw ValidationError(std::string("missing field '") + field + "'");
  return *it;
}

std::string require_string(const json& obj, const char* field) {
  const json& v = require(obj, field);
  if (!v.is_string()) throw ValidationError(std::string("field '") + field + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> number_list(const json& v, const char* field) {
  if (!v.is_array()) throw ValidationError(std::string("field '") + field + "' must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) {
      throw ValidationError(std::string("field '") + field + "' must contain only numbers");
    }
    double d = x.get<double>();
    if (!std::isfinite(d)) throw ValidationError(std::string("field '") + field + "' is not finite");
    out.push_back(d);
  }
  return out;
}

json abstract_to_json(const ExtendedAbstract& a) {
  json j = {{"context", a.context},
            {"key_idea", a.key_idea},
            {"method_details", a.method_details},
            {"experiments_results", a.experiments_results},
            {"impact", a.impact}};
  if (a.raw_abstract) j["raw_abstract"] = *a.raw_abstract;
  return j;
}

ExtendedAbstract abstract_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("field 'extended_abstract' must be an object");
  ExtendedAbstract a;
  a.context = require_string(j, "context");
  a.key_idea = require_string(j, "key_idea");
  a.method_details = require_string(j, "method_details");
  a.experiments_results = require_string(j, "experiments_results");
  a.impact = require_string(j, "impact");
  if (auto it = j.find("raw_abstract"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw ValidationError("field 'raw_abstract' must be a string");
    a.raw_abstract = it->get<std::string>();
  }
  return a;
}

json record_to_json(const PaperRecord& r) {
  json j = {{"paper_id", r.paper_id}, {"venue_id", r.venue_id}, {"year", r.year},
            {"title", r.title},       {"scores", r.scores}};
  if (r.has_confidences) j["reviewer_confidences"] = r.reviewer_confidences;
  if (r.has_comments) j["comments"] = r.comments;
  j["extended_abstract"] = abstract_to_json(r.extended_abstract);
  return j;
}

}  // namespace

PaperRecord parse_record(const std::string& json_line) {
  json j;
  try {
    j = json::parse(json_line);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("record must be a JSON object");

  PaperRecord r;
  r.paper_id = require_string(j, "paper_id");
  if (r.paper_id.empty()) throw ValidationError("field 'paper_id' is empty");
  r.venue_id = require_string(j, "venue_id");
  const json& year = require(j, "year");
  if (!year.is_number_integer()) throw ValidationError("field 'year' must be an integer");
  r.year = year.get<int>();
  r.title = require_string(j, "title");
  r.scores = number_list(require(j, "scores"), "scores");
  if (auto it = j.find("reviewer_confidences"); it != j.end() && !it->is_null()) {
    r.reviewer_confidences = number_list(*it, "reviewer_confidences");
    r.has_confidences = true;
  }
  if (auto it = j.find("comments"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw ValidationError("field 'comments' must be an array");
    for (const auto& c : *it) {
      if (!c.is_string()) throw ValidationError("field 'comments' must contain only strings");
      r.comments.push_back(c.get<std::string>());
    }
    r.has_comments = true;
  }
  r.extended_abstract = abstract_from_json(require(j, "extended_abstract"));
  return r;
}

std::string serialize_record(const PaperRecord& record) { return record_to_json(record).dump(); }

LoadResult load_corpus(const std::filesystem::path& path, const std::string& schema_version) {
  if (schema_version != kCorpusSchemaVersion) {
    throw ValidationError("unsupported corpus schema version '" + schema_version + "'");
  }
  if (!std::filesystem::exists(path)) throw ValidationError("corpus file not found: " + path.string());
  LoadResult out;
  std::map<std::string, std::size_t> seen;
  for (auto& line : read_lines(path)) {
    PaperRecord r;
    try {
      r = parse_record(line.text);
    } catch (const ValidationError& e) {
      out.rejects.push_back({line.number, e.what()});
      continue;
    }
    auto [it, inserted] = seen.emplace(r.paper_id, line.number);
    if (!inserted) {
      throw ValidationError("duplicate paper_id '" + r.paper_id + "' on lines " +
                            std::to_string(it->second) + " and " + std::to_string(line.number));
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

std::string serialize_corpus(const std::vector<PaperRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += serialize_record(r);
    out += '\n';
  }
  return out;
}

void save_corpus(const std::filesystem::path& path, const std::vector<PaperRecord>& records) {
  write_file_atomic(path, serialize_corpus(records));
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double population_std(const std::vector<double>& values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

VenueStats venue_stats(const std::vector<PaperRecord>& records, const std::string& venue_id) {
  std::vector<double> means;
  std::vector<double> within;
  std::vector<double> confidences;
  for (const auto& r : records) {
    if (r.venue_id != venue_id || r.scores.empty()) continue;
    means.push_back(r.mean_score());
    within.push_back(population_std(r.scores));
    confidences.insert(confidences.end(), r.reviewer_confidences.begin(),
                       r.reviewer_confidences.end());
  }
  if (means.size() < 2) throw ValidationError("insufficient venue data for '" + venue_id + "'");
  VenueStats s;
  s.venue_id = venue_id;
  s.n_papers = means.size();
  s.mean_score = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());
  s.std_score = population_std(means);
  s.across_paper_std = s.std_score;
  s.within_paper_std_mean =
      std::accumulate(within.begin(), within.end(), 0.0) / static_cast<double>(within.size());
  s.median_reviewer_confidence = median(confidences);
  return s;
}

std::string make_pair_id(const std::string& venue_id, const std::string& low,
                         const std::string& high) {
  return "p" + sha256_fields({venue_id, low, high}).substr(0, 16);
}

std::vector<PaperPair> pairs_above_gap(const std::vector<PaperRecord>& records,
                                       const std::string& venue_id, double min_gap) {
  std::vector<const PaperRecord*> venue;
  for (const auto& r : records) {
    if (r.venue_id == venue_id && !r.scores.empty()) venue.push_back(&r);
  }
  std::vector<PaperPair> out;
  for (const auto* low : venue) {
    double low_mean = low->mean_score();
    for (const auto* high : venue) {
      if (low == high) continue;
      double gap = high->mean_score() - low_mean;
      if (gap > min_gap) {
        out.push_back({make_pair_id(venue_id, low->paper_id, high->paper_id), venue_id,
                       low->paper_id, high->paper_id, gap});
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const PaperPair& a, const PaperPair& b) { return a.pair_id < b.pair_id; });
  return out;
}

std::vector<PaperPair> build_pairs(const std::vector<PaperRecord>& records,
                                   const std::string& venue_id, double threshold_sigma) {
  if (!(threshold_sigma > 0.0)) throw ValidationError("threshold_sigma must be positive");
  VenueStats stats = venue_stats(records, venue_id);
  if (stats.std_score == 0.0) {
    throw ValidationError("degenerate venue score distribution for '" + venue_id + "'");
  }
  return pairs_above_gap(records, venue_id, threshold_sigma * stats.std_score);
}

std::vector<PaperPair> build_all_pairs(const std::vector<PaperRecord>& records,
                                       double threshold_sigma, std::vector<std::string>* skipped) {
  std::set<std::string> venues;
  for (const auto& r : records) venues.insert(r.venue_id);
  std::vector<PaperPair> out;
  for (const auto& v : venues) {
    try {
      auto pairs = build_pairs(records, v, threshold_sigma);
      out.insert(out.end(), pairs.begin(), pairs.end());
    } catch (const ValidationError&) {
      if (skipped) skipped->push_back(v);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const PaperPair& a, const PaperPair& b) { return a.pair_id < b.pair_id; });
  return out;
}

std::vector<PaperPair> sample_pairs(const std::vector<PaperPair>& pairs, std::size_t n,
                                    std::uint64_t seed) {
  if (n > pairs.size()) {
    throw ValidationError("cannot sample " + std::to_string(n) + " pairs from a pool of " +
                          std::to_string(pairs.size()));
  }
  std::vector<PaperPair> pool = pairs;
  SplitMix64 rng(mix64(seed ^ 0x5a17ULL));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  return pool;
}

std::vector<PaperPair> load_pairs(const std::filesystem::path& path) {
  std::vector<PaperPair> out;
  for (auto& line : read_lines(path)) {
    try {
      json j = json::parse(line.text);
      out.push_back({j.at("pair_id").get<std::string>(), j.at("venue_id").get<std::string>(),
                     j.at("low").get<std::string>(), j.at("high").get<std::string>(),
                     j.at("gap").get<double>()});
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line.number) + ": " + e.what());
    }
  }
  return out;
}

void save_pairs(const std::filesystem::path& path, const std::vector<PaperPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    json j = {{"pair_id", p.pair_id}, {"venue_id", p.venue_id}, {"low", p.low},
              {"high", p.high},       {"gap", p.gap}};
    out += j.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

CorpusIndex::CorpusIndex(const std::vector<PaperRecord>& records) {
  for (const auto& r : records) by_id_[r.paper_id] = &r;
}

const PaperRecord& CorpusIndex::at(const std::string& paper_id) const {
  auto it = by_id_.find(paper_id);
  if (it == by_id_.end()) throw ValidationError("unknown paper id '" + paper_id + "'");
  return *it->second;
}

std::string render_content(const ExtendedAbstract& a) {
  std::ostringstream out;
  out << "Context: " << a.context << "\n"
      << "Key idea: " << a.key_idea << "\n"
      << "Method details: " << a.method_details << "\n"
      << "Experiments and results: " << a.experiments_results << "\n"
      << "Impact: " << a.impact;
  return out.str();
}

}  // namespace tacit::corpus
