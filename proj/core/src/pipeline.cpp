#include "tacit/pipeline.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "tacit/annotate.hpp"
#include "tacit/corpus.hpp"
#include "tacit/ingest.hpp"
#include "tacit/judge.hpp"
#include "tacit/util.hpp"

namespace tacit::pipeline {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// RunConfig

namespace {

std::string_view to_string(MatcherKind m) {
  switch (m) {
    case MatcherKind::judge: return "judge";
    case MatcherKind::dictionary: return "dictionary";
    case MatcherKind::both: return "both";
  }
  return "judge";
}

MatcherKind matcher_from_string(const std::string& s) {
  if (s == "judge") return MatcherKind::judge;
  if (s == "dictionary") return MatcherKind::dictionary;
  if (s == "both") return MatcherKind::both;
  throw ValidationError("matcher must be judge, dictionary or both (got '" + s + "')");
}

std::optional<fs::path> opt_path(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return fs::path(it->get<std::string>());
}

json path_or_null(const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); }

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  try {
    if (!j.is_object()) throw ValidationError("run config must be a JSON object");
    c.corpus_path = j.value("corpus_path", c.corpus_path.string());
    c.provider_path = opt_path(j, "provider");
    c.scripted_world = opt_path(j, "scripted_world");
    c.seed = j.value("seed", c.seed);
    if (auto p = j.find("pairing"); p != j.end()) {
      c.threshold_sigma = p->value("threshold_sigma", c.threshold_sigma);
      c.sample_n = p->value("sample_n", c.sample_n);
    }
    if (auto s = j.find("search"); s != j.end()) {
      c.search.k_per_round = s->value("k_per_round", c.search.k_per_round);
      c.search.sample_size = s->value("sample_size", c.search.sample_size);
      c.search.stop_fraction = s->value("stop_fraction", c.search.stop_fraction);
      c.search.max_rounds = s->value("max_rounds", c.search.max_rounds);
    }
    if (auto p = j.find("prior"); p != j.end()) {
      c.prior.n_sims = p->value("n_sims", c.prior.n_sims);
      c.prior.rounds = p->value("rounds", c.prior.rounds);
      c.prior.k = p->value("k", c.prior.k);
      std::string mode = p->value("count_mode", std::string("binary_window"));
      if (mode == "binary_window") {
        c.count_mode = prior::CountMode::binary_window;
      } else if (mode == "occurrence_rate") {
        c.count_mode = prior::CountMode::occurrence_rate;
      } else {
        throw ValidationError("prior.count_mode must be binary_window or occurrence_rate");
      }
    }
    c.matcher = matcher_from_string(j.value("matcher", std::string("judge")));
    c.dictionary_path = opt_path(j, "dictionary_path");
    c.few_shot_path = opt_path(j, "few_shot_path");
    c.cache_dir = opt_path(j, "cache_dir");
    c.tie_break = stats::tie_break_from_string(j.value("tie_break", std::string("posterior_desc")));
    if (auto s = j.find("simulate"); s != j.end()) {
      c.sim_papers = s->value("n_papers", c.sim_papers);
      c.sim_venues = s->value("n_venues", c.sim_venues);
    }
    c.threads = j.value("threads", c.threads);
    c.output_dir = j.value("output_dir", c.output_dir.string());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("run config: ") + e.what());
  }
  if (!(c.threshold_sigma > 0.0)) throw ValidationError("run config: pairing.threshold_sigma must be > 0");
  if (c.threads == 0) c.threads = 1;
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("run config not found: " + path.string());
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

json RunConfig::to_json() const {
  return {{"corpus_path", corpus_path.string()},
          {"provider", path_or_null(provider_path)},
          {"scripted_world", path_or_null(scripted_world)},
          {"seed", seed},
          {"pairing", {{"threshold_sigma", threshold_sigma}, {"sample_n", sample_n}}},
          {"search",
           {{"k_per_round", search.k_per_round},
            {"sample_size", search.sample_size},
            {"stop_fraction", search.stop_fraction},
            {"max_rounds", search.max_rounds}}},
          {"prior",
           {{"n_sims", prior.n_sims},
            {"rounds", prior.rounds},
            {"k", prior.k},
            {"count_mode", prior::to_string(count_mode)}}},
          {"matcher", to_string(matcher)},
          {"dictionary_path", path_or_null(dictionary_path)},
          {"few_shot_path", path_or_null(few_shot_path)},
          {"cache_dir", path_or_null(cache_dir)},
          {"tie_break", stats::to_string(tie_break)},
          {"simulate", {{"n_papers", sim_papers}, {"n_venues", sim_venues}}},
          {"threads", threads},
          {"output_dir", output_dir.string()}};
}

std::string RunConfig::digest() const {
  json j = to_json();
  j.erase("output_dir");
  j.erase("threads");
  j.erase("cache_dir");
  // Inputs are identified by content, so the same run in another directory digests equally.
  for (const char* key : {"corpus_path", "provider", "scripted_world", "dictionary_path", "few_shot_path"}) {
    if (!j[key].is_string()) continue;
    const fs::path p = j[key].get<std::string>();
    if (fs::is_regular_file(p)) j[key] = "sha256:" + file_digest(p);
  }
  return sha256_hex(j.dump());
}

// ---------------------------------------------------------------------------
// Lock

DirectoryLock::DirectoryLock(const fs::path& dir) : path_(dir / ".tacit.lock") {
  fs::create_directories(dir);
  for (int attempt = 0; attempt < 2; ++attempt) {
    int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
      std::string pid = std::to_string(::getpid()) + "\n";
      [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
      ::close(fd);
      return;
    }
    long owner = 0;
    try {
      owner = std::stol(read_file(path_));
    } catch (const std::exception&) {
    }
    if (owner > 0 && (::kill(static_cast<pid_t>(owner), 0) == 0 || errno == EPERM)) {
      throw ValidationError("output directory " + dir.string() + " is locked by process " + std::to_string(owner));
    }
    fs::remove(path_);  // stale lock
  }
  throw ValidationError("could not lock output directory " + dir.string());
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace {

struct Session {
  std::shared_ptr<judge::Provider> provider;
  std::unique_ptr<judge::JudgeClient> client;
  std::optional<sim::WorldConfig> world;
  std::string provider_identity;
};

Session open_session(const RunConfig& cfg) {
  Session s;
  judge::ProviderConfig pc;
  if (cfg.scripted_world) {
    s.world = sim::WorldConfig::load(*cfg.scripted_world);
    pc.provider_url = "scripted://world";
    pc.model_id = "scripted-" + sha256_hex(s.world->to_json().dump()).substr(0, 16);
    pc.backoff_base = std::chrono::milliseconds(0);
    s.provider = std::make_shared<sim::ScriptedJudge>(*s.world);
  } else if (cfg.provider_path) {
    pc = judge::ProviderConfig::load(*cfg.provider_path);
    s.provider = judge::make_http_provider(pc);
  } else {
    throw ValidationError("no judge configured: pass --provider <config.json> or --scripted-world <world.json>");
  }
  s.provider_identity = pc.provider_url + "|" + pc.model_id;
  auto cache = std::make_shared<judge::ResponseCache>(cfg.cache_dir);
  s.client = std::make_unique<judge::JudgeClient>(s.provider, pc, cache);
  return s;
}

fs::path require_artifact(const RunConfig& cfg, const std::string& name, const std::string& producer) {
  fs::path p = cfg.output_dir / name;
  if (!fs::exists(p)) {
    throw ValidationError("missing artifact " + p.string() + " (produced by `tacit " + producer + "`)");
  }
  return p;
}

class Manifest {
 public:
  Manifest(std::string command, const RunConfig& cfg)
      : command_(std::move(command)), cfg_(cfg), start_(std::chrono::steady_clock::now()) {}
  void input(const fs::path& p) {
    if (fs::exists(p)) inputs_[p.string()] = file_digest(p);
  }
  void output(const fs::path& p) { outputs_.push_back(p); }
  void write() const {
    json outs = json::object();
    for (const auto& p : outputs_) {
      if (fs::exists(p) && fs::is_regular_file(p)) outs[p.string()] = file_digest(p);
    }
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json m = {{"command", command_},
              {"config_digest", cfg_.digest()},
              {"config", cfg_.to_json()},
              {"inputs", inputs_},
              {"outputs", outs},
              {"wall_time_s", wall}};
    fs::create_directories(cfg_.output_dir / "manifests");
    write_file_atomic(cfg_.output_dir / "manifests" / (command_ + ".json"), m.dump(2) + "\n");
  }

 private:
  std::string command_;
  const RunConfig& cfg_;
  std::chrono::steady_clock::time_point start_;
  json inputs_ = json::object();
  std::vector<fs::path> outputs_;
};

std::string fmt(double v, int digits = 4) {
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// hyp_id -> value from our own two-or-more column CSVs (header row, '#' comments skipped).
std::map<std::string, double> read_csv_column(const fs::path& path, std::size_t column) {
  std::map<std::string, double> out;
  bool header = true;
  for (auto& line : read_lines(path)) {
    if (line.text.rfind('#', 0) == 0) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line.text);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() <= column) throw ValidationError(path.string() + ":" + std::to_string(line.number) + ": short row");
    out[cells[0]] = std::stod(cells[column]);
  }
  return out;
}

corpus::LoadResult load_corpus_reporting(const fs::path& path, std::ostream& out) {
  auto loaded = corpus::load_corpus(path);
  if (!loaded.rejects.empty()) {
    out << "corpus: " << loaded.rejects.size() << " rejected line(s); first: line " << loaded.rejects[0].line << ": "
        << loaded.rejects[0].reason << "\n";
  }
  return loaded;
}

std::string search_digest(const RunConfig& cfg, const Session& s) {
  json j = {{"seed", cfg.seed},
            {"k_per_round", cfg.search.k_per_round},
            {"sample_size", cfg.search.sample_size},
            {"stop_fraction", cfg.search.stop_fraction},
            {"max_rounds", cfg.search.max_rounds},
            {"judge", s.provider_identity}};
  return sha256_hex(j.dump());
}

std::vector<search::Hypothesis> hypotheses_for(const RunConfig& cfg, const CommandOptions& opts,
                                               const std::string& consumer) {
  if (opts.hypotheses) return load_hypothesis_file(*opts.hypotheses);
  (void)consumer;
  return load_hypothesis_file(require_artifact(cfg, "hypotheses.json", "search"));
}

std::optional<prior::Dictionary> dictionary_for(const RunConfig& cfg, const Session* session,
                                                const std::vector<search::Hypothesis>& hyps) {
  if (cfg.dictionary_path) return prior::load_dictionary(*cfg.dictionary_path);
  if (session && session->world) return sim::dictionary_for(hyps, *session->world);
  return std::nullopt;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ResumeConflict*>(&e)) return 4;
  if (dynamic_cast<const TransportError*>(&e)) return 3;
  if (dynamic_cast<const ValidationError*>(&e)) return 2;
  return 1;
}

// ---------------------------------------------------------------------------
// Fixture tables

std::vector<search::Hypothesis> load_hypothesis_file(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("hypothesis file not found: " + path.string());
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  if (j.is_array()) return search::load_hypotheses(path);
  if (!j.is_object() || !j.contains("hypotheses")) {
    throw ValidationError(path.string() + ": expected an array or an object with \"hypotheses\"");
  }
  std::vector<search::Hypothesis> out;
  for (const auto& h : j["hypotheses"]) {
    search::Hypothesis x;
    x.text = h.at("text").get<std::string>();
    x.hyp_id = h.value("hyp_id", search::make_hyp_id(search::canonicalize_hypothesis(x.text)));
    x.round = h.value("round", 1);
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<Table1Row> load_table(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("table not found: " + path.string());
  try {
    json j = json::parse(read_file(path));
    std::vector<Table1Row> rows;
    for (const auto& h : j.at("hypotheses")) {
      Table1Row r;
      r.hyp_id = h.at("hyp_id").get<std::string>();
      r.label = h.value("label", r.hyp_id);
      r.text = h.value("text", "");
      r.round = h.value("round", 0);
      r.prior = h.at("prior").get<double>();
      r.posterior = h.at("posterior").get<double>();
      r.rank = h.value("rank", 0);
      r.mention = h.at("mention").get<double>();
      rows.push_back(std::move(r));
    }
    return rows;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

TableAnalysis analyze_table(const std::vector<Table1Row>& rows, stats::TieBreak tie_break) {
  std::vector<double> prior, posterior, mention;
  std::map<std::string, double> pm, qm, mm;
  for (const auto& r : rows) {
    prior.push_back(r.prior);
    posterior.push_back(r.posterior);
    mention.push_back(r.mention);
    pm[r.hyp_id] = r.prior;
    qm[r.hyp_id] = r.posterior;
    mm[r.hyp_id] = r.mention;
  }
  TableAnalysis a;
  a.prior_mention = stats::pearson(prior, mention);
  a.posterior_mention = stats::pearson(posterior, mention);
  a.shifts = stats::shift_table(pm, qm, mm, tie_break);
  std::map<std::string, int> published;
  for (const auto& r : rows) published[r.hyp_id] = r.rank;
  for (const auto& s : a.shifts) a.rank_matches += published[s.hyp_id] == s.shift_rank;
  a.shares = stats::attention_shares(a.shifts, 5);
  return a;
}

// ---------------------------------------------------------------------------
// Commands

void cmd_ingest(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out) {
  DirectoryLock lock(cfg.output_dir);
  Manifest manifest("ingest", cfg);
  if (opts.venue_id.empty()) throw ValidationError("ingest: --venue is required");
  std::unique_ptr<ingest::Transport> transport;
  if (opts.transcript) {
    transport = std::make_unique<ingest::ReplayTransport>(*opts.transcript);
    manifest.input(*opts.transcript);
  } else if (opts.live) {
    transport = ingest::make_http_transport();
  } else {
    throw ValidationError("ingest: pass --transcript <file> to replay, or --live to fetch over the network");
  }
  const fs::path corpus_out = cfg.output_dir / "corpus.jsonl";
  if (!opts.resume_token) {
    fs::remove(corpus_out);
    fs::remove(corpus_out.string() + ".rejects.jsonl");
  }
  ingest::FetchJob job{opts.venue_id, opts.api_base, opts.page_size, opts.resume_token};
  ingest::FetchResult result;
  try {
    result = ingest::fetch_venue(job, *transport, corpus_out);
  } catch (const ingest::FetchInterrupted& e) {
    write_file_atomic(cfg.output_dir / "ingest.resume_token", e.token() + "\n");
    throw;
  }
  fs::remove(cfg.output_dir / "ingest.resume_token");
  if (opts.sidecar) {
    auto records = corpus::load_corpus(corpus_out).records;
    auto report = ingest::merge_sidecar(records, ingest::load_sidecar(*opts.sidecar), opts.force);
    corpus::save_corpus(corpus_out, records);
    manifest.input(*opts.sidecar);
    out << "sidecar: filled " << report.filled_sections << " section(s) in " << report.records_touched
        << " record(s)";
    if (!report.unknown_ids.empty()) out << "; " << report.unknown_ids.size() << " unknown id(s)";
    out << "\n";
  }
  manifest.output(corpus_out);
  manifest.output(corpus_out.string() + ".rejects.jsonl");
  manifest.write();
  out << "ingest: " << result.records.size() << " record(s), " << result.rejects.size() << " reject(s)\n";
}

void cmd_pairs(const RunConfig& cfg, const CommandOptions&, std::ostream& out) {
  DirectoryLock lock(cfg.output_dir);
  Manifest manifest("pairs", cfg);
  manifest.input(cfg.corpus_path);
  auto loaded = load_corpus_reporting(cfg.corpus_path, out);
  std::vector<std::string> skipped;
  auto pairs = corpus::build_all_pairs(loaded.records, cfg.threshold_sigma, &skipped);
  corpus::CorpusIndex index(loaded.records);
  std::size_t above = pairs.size();
  std::erase_if(pairs, [&](const corpus::PaperPair& p) {
    return !index.at(p.low).extended_abstract.judgeable() || !index.at(p.high).extended_abstract.judgeable();
  });
  std::size_t judgeable = pairs.size();
  if (cfg.sample_n > 0 && cfg.sample_n < pairs.size()) {
    pairs = corpus::sample_pairs(pairs, cfg.sample_n, mix64(cfg.seed ^ 0x70a1ULL));
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.pair_id < b.pair_id; });
  }
  corpus::save_pairs(cfg.output_dir / "pairs.jsonl", pairs);

  std::set<std::string> venues;
  for (const auto& r : loaded.records) venues.insert(r.venue_id);
  json vs = json::array();
  for (const auto& v : venues) {
    if (std::find(skipped.begin(), skipped.end(), v) != skipped.end()) continue;
    auto s = corpus::venue_stats(loaded.records, v);
    vs.push_back({{"venue_id", v},
                  {"n_papers", s.n_papers},
                  {"mean_score", s.mean_score},
                  {"std_score", s.std_score},
                  {"within_paper_std_mean", s.within_paper_std_mean},
                  {"across_paper_std", s.across_paper_std},
                  {"median_reviewer_confidence", s.median_reviewer_confidence}});
  }
  json report = {{"config_digest", cfg.digest()},
                 {"venues", vs},
                 {"skipped_venues", skipped},
                 {"pairs_above_threshold", above},
                 {"pairs_judgeable", judgeable},
                 {"pairs_written", pairs.size()}};
  write_file_atomic(cfg.output_dir / "venue_stats.json", report.dump(2) + "\n");
  manifest.output(cfg.output_dir / "pairs.jsonl");
  manifest.output(cfg.output_dir / "venue_stats.json");
  manifest.write();
  out << "pairs: " << pairs.size() << " written (" << above << " above threshold, " << judgeable
      << " judgeable, " << venues.size() - skipped.size() << " venue(s))\n";
}

void cmd_search(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out) {
  DirectoryLock lock(cfg.output_dir);
  Manifest manifest("search", cfg);
  auto pairs_path = require_artifact(cfg, "pairs.jsonl", "pairs");
  manifest.input(pairs_path);
  manifest.input(cfg.corpus_path);
  auto pairs = corpus::load_pairs(pairs_path);
  auto loaded = corpus::load_corpus(cfg.corpus_path);
  corpus::CorpusIndex index(loaded.records);
  Session session = open_session(cfg);
  search::JudgeContext ctx{&index, session.client.get(), cfg.seed, cfg.threads};
  search::RunControl control;
  control.state_dir = cfg.output_dir;
  control.resume = opts.resume;
  control.force = opts.force;
  control.halt_after_round = opts.halt_after_round;
  control.config_digest = search_digest(cfg, session);
  auto result = search::run_search(pairs, ctx, cfg.search, control);
  if (!result.reports.empty() && result.coverage.missing_cells().empty()) {
    write_file_atomic(cfg.output_dir / "coverage.csv", search::coverage_csv(result.coverage));
  }
  std::size_t flagged = 0;
  for (const auto& v : result.votes) flagged += v.flagged;
  for (const char* name : {"votes.jsonl", "hypotheses.json", "rounds.json", "checkpoint.json", "coverage.csv"}) {
    manifest.output(cfg.output_dir / name);
  }
  manifest.write();
  const double unexplained = result.reports.empty() ? 1.0 : result.reports.back().unexplained_fraction_after;
  out << "search: " << result.reports.size() << " round(s), " << result.hypotheses.size()
      << " hypotheses, unexplained " << fmt(unexplained) << ", flagged votes " << flagged
      << (result.stopped_by_threshold ? ", stopped by threshold" : "") << "\n";
}

void cmd_priors(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out) {
  DirectoryLock lock(cfg.output_dir);
  Manifest manifest("priors", cfg);
  Session session = open_session(cfg);
  const fs::path path = cfg.output_dir / "priors.jsonl";
  const fs::path meta = cfg.output_dir / "priors_state.json";
  const std::string digest = sha256_hex(
      json({{"n_sims", cfg.prior.n_sims}, {"rounds", cfg.prior.rounds}, {"k", cfg.prior.k},
            {"judge", session.provider_identity}})
          .dump());
  if (opts.resume && fs::exists(meta) && !opts.force) {
    if (json::parse(read_file(meta)).value("digest", "") != digest) {
      throw ResumeConflict("priors.jsonl was produced under a different prior configuration");
    }
  }
  if (!opts.resume) fs::remove(path);
  write_file_atomic(meta, json({{"digest", digest}}).dump() + "\n");
  auto result = prior::elicit_priors(*session.client, cfg.prior, path, cfg.threads);
  json report = {{"config_digest", cfg.digest()},
                 {"n_samples", result.samples.size()},
                 {"excluded_sims", result.excluded_sims},
                 {"retried_sims", result.retried_sims}};
  write_file_atomic(cfg.output_dir / "priors_report.json", report.dump(2) + "\n");
  manifest.output(path);
  manifest.output(cfg.output_dir / "priors_report.json");
  manifest.write();
  out << "priors: " << result.samples.size() << " samples from " << cfg.prior.n_sims - result.excluded_sims.size()
      << " simulation(s), " << result.excluded_sims.size() << " excluded\n";
}

void cmd_match(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out) {
  DirectoryLock lock(cfg.output_dir);
  Manifest manifest("match", cfg);
  auto hyps = hypotheses_for(cfg, opts, "match");
  auto priors_path = require_artifact(cfg, "priors.jsonl", "priors");
  manifest.input(priors_path);
  auto priors = prior::load_priors(priors_path);
  json report = {{"config_digest", cfg.digest()},
                 {"matcher", to_string(cfg.matcher)},
                 {"count_mode", prior::to_string(cfg.count_mode)}};
  std::optional<Session> session;
  std::vector<prior::PriorFrequency> judge_freq, dict_freq;
  if (cfg.matcher != MatcherKind::dictionary) {
    session = open_session(cfg);
    prior::JudgeMatcher matcher(*session->client);
    judge_freq = prior::prior_frequency(hyps, priors, matcher, cfg.count_mode, cfg.threads);
    report["judge_match_calls"] = matcher.calls();
    report["judge_match_flagged"] = matcher.flagged();
    write_file_atomic(cfg.output_dir / "prior_frequency.csv", prior::prior_frequency_csv(judge_freq));
  }
  if (cfg.matcher != MatcherKind::judge) {
    if (!session && cfg.scripted_world) session = open_session(cfg);
    auto dict = dictionary_for(cfg, session ? &*session : nullptr, hyps);
    if (!dict) throw ValidationError("dictionary matcher needs dictionary_path in the run config");
    prior::DictionaryMatcher matcher(*dict);
    dict_freq = prior::prior_frequency(hyps, priors, matcher, cfg.count_mode, cfg.threads);
    const char* name = cfg.matcher == MatcherKind::both ? "prior_frequency_dictionary.csv" : "prior_frequency.csv";
    write_file_atomic(cfg.output_dir / name, prior::prior_frequency_csv(dict_freq));
    manifest.output(cfg.output_dir / name);
  }
  if (!judge_freq.empty() && !dict_freq.empty()) {
    std::vector<double> a, b;
    for (std::size_t i = 0; i < judge_freq.size(); ++i) {
      a.push_back(judge_freq[i].frequency);
      b.push_back(dict_freq[i].frequency);
    }
    try {
      report["judge_dictionary_correlation"] = stats::pearson(a, b);
    } catch (const ValidationError& e) {
      report["judge_dictionary_correlation"] = nullptr;
      report["judge_dictionary_correlation_note"] = e.what();
    }
  }
  write_file_atomic(cfg.output_dir / "match_report.json", report.dump(2) + "\n");
  manifest.output(cfg.output_dir / "prior_frequency.csv");
  manifest.output(cfg.output_dir / "match_report.json");
  manifest.write();
  out << "match: prior frequency for " << hyps.size() << " hypotheses over "
      << (judge_freq.empty() ? dict_freq : judge_freq).front().n_windows << " window(s)\n";
}

void cmd_annotate(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out) {
  DirectoryLock lock(cfg.output_dir);
  Manifest manifest("annotate", cfg);
  auto hyps = hypotheses_for(cfg, opts, "annotate");
  manifest.input(cfg.corpus_path);
  auto loaded = corpus::load_corpus(cfg.corpus_path);
  auto comments = annotate::collect_comments(loaded.records);
  annotate::FewShotSet few_shot;
  if (cfg.few_shot_path) few_shot = annotate::load_few_shot(*cfg.few_shot_path);
  Session session = open_session(cfg);
  auto run = annotate::annotate_all(comments, hyps, few_shot, *session.client, cfg.threads);
  annotate::save_annotations(cfg.output_dir / "annotations.jsonl", run.vectors);
  auto mention = annotate::mention_stats(run.vectors, hyps);
  write_file_atomic(cfg.output_dir / "mention.csv", annotate::mention_csv(mention));

  std::size_t from_mean = 0;
  for (const auto& v : run.vectors) from_mean += v.score_from_mean;
  json report = {{"config_digest", cfg.digest()},
                 {"n_comments", comments.size()},
                 {"n_annotated", run.vectors.size()},
                 {"unannotated", run.unannotated},
                 {"score_from_paper_mean", from_mean}};
  if (auto dict = dictionary_for(cfg, &session, hyps)) {
    std::map<std::string, const annotate::Comment*> by_id;
    for (const auto& c : comments) by_id[c.comment_id] = &c;
    std::vector<int> judge_labels, dict_labels;
    for (const auto& v : run.vectors) {
      auto d = annotate::dictionary_annotate(by_id.at(v.comment_id)->text, hyps, *dict);
      for (std::size_t i = 0; i < d.size(); ++i) {
        judge_labels.push_back(v.values[i] != 0 ? 1 : 0);
        dict_labels.push_back(d[i]);
      }
    }
    if (!judge_labels.empty()) {
      report["judge_dictionary_overlap"] =
          annotate::agreement(judge_labels, dict_labels, annotate::AgreementMode::overlap);
      try {
        report["judge_dictionary_pearson"] =
            annotate::agreement(judge_labels, dict_labels, annotate::AgreementMode::pearson);
      } catch (const ValidationError&) {
        report["judge_dictionary_pearson"] = nullptr;
      }
    }
  }
  write_file_atomic(cfg.output_dir / "annotate_report.json", report.dump(2) + "\n");
  manifest.output(cfg.output_dir / "annotations.jsonl");
  manifest.output(cfg.output_dir / "mention.csv");
  manifest.output(cfg.output_dir / "annotate_report.json");
  manifest.write();
  out << "annotate: " << run.vectors.size() << " of " << comments.size() << " comment(s) annotated\n";
}

namespace {

json regression_json(const stats::RegressionResult& r) {
  json rows = json::array();
  for (std::size_t i = 0; i < r.coefficients.size(); ++i) {
    rows.push_back({{"name", r.names[i]},
                    {"coef", r.coefficients[i]},
                    {"std_err", r.std_errors[i]},
                    {"t", r.t_values[i]},
                    {"p", r.p_values[i]},
                    {"ci_low", r.conf_intervals_95[i].first},
                    {"ci_high", r.conf_intervals_95[i].second}});
  }
  return {{"terms", rows}, {"r_squared", r.r_squared}, {"n_observations", r.n_observations}};
}

// Reviewer score on the attitude vectors. Constant and duplicate columns are dropped first.
json score_regression(const std::vector<annotate::AnnotationVector>& vectors,
                      const std::vector<search::Hypothesis>& hyps) {
  std::vector<std::size_t> keep;
  std::vector<std::string> dropped;
  std::set<std::vector<int>> seen;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    std::vector<int> col;
    for (const auto& v : vectors) col.push_back(v.values[i]);
    bool constant = std::all_of(col.begin(), col.end(), [&](int x) { return x == col.front(); });
    if (constant || !seen.insert(col).second) {
      dropped.push_back(hyps[i].hyp_id);
      continue;
    }
    keep.push_back(i);
  }
  json out = {{"dropped_columns", dropped}};
  if (keep.empty()) {
    out["error"] = "no varying annotation columns";
    return out;
  }
  std::vector<double> y;
  std::vector<std::vector<double>> X;
  std::vector<std::string> names;
  for (auto i : keep) names.push_back(hyps[i].hyp_id);
  for (const auto& v : vectors) {
    y.push_back(v.reviewer_score);
    std::vector<double> row;
    for (auto i : keep) row.push_back(v.values[i]);
    X.push_back(std::move(row));
  }
  try {
    out["fit"] = regression_json(stats::ols_fit(y, X, true, names));
  } catch (const ValidationError& e) {
    out["error"] = e.what();
  }
  return out;
}

json build_analysis(const RunConfig& cfg, std::ostream& out) {
  auto hyp_path = require_artifact(cfg, "hypotheses.json", "search");
  auto pairs_path = require_artifact(cfg, "pairs.jsonl", "pairs");
  auto votes_path = require_artifact(cfg, "votes.jsonl", "search");
  auto rounds_path = require_artifact(cfg, "rounds.json", "search");
  auto prior_path = require_artifact(cfg, "prior_frequency.csv", "match");
  auto mention_path = require_artifact(cfg, "mention.csv", "annotate");
  auto ann_path = require_artifact(cfg, "annotations.jsonl", "annotate");

  auto hyps = search::load_hypotheses(hyp_path);
  auto pairs = corpus::load_pairs(pairs_path);
  auto votes = search::load_votes(votes_path);
  auto reports = search::load_round_reports(rounds_path);
  std::vector<std::string> pair_ids, hyp_ids;
  for (const auto& p : pairs) pair_ids.push_back(p.pair_id);
  for (const auto& h : hyps) hyp_ids.push_back(h.hyp_id);
  auto coverage = search::coverage_from_votes(pair_ids, hyp_ids, votes);
  coverage.require_complete();
  auto posterior = search::posterior_coverage(coverage);
  auto prior = read_csv_column(prior_path, 1);
  auto mention = read_csv_column(mention_path, 1);
  auto annotations = annotate::load_annotations(ann_path);

  json a;
  a["config_digest"] = cfg.digest();
  a["inputs"] = json::object();
  for (const auto& p : {hyp_path, pairs_path, votes_path, rounds_path, prior_path, mention_path, ann_path}) {
    a["inputs"][p.filename().string()] = file_digest(p);
  }
  a["n_pairs"] = pairs.size();
  a["n_hypotheses"] = hyps.size();
  std::size_t flagged = 0;
  for (const auto& v : votes) flagged += v.flagged;
  a["flagged_votes"] = flagged;
  a["unexplained_fraction"] =
      pairs.empty() ? 0.0 : static_cast<double>(search::unexplained_set(coverage).size()) / pairs.size();
  a["vote_scheme_agreement"] = search::vote_scheme_agreement(votes);

  auto rows = stats::shift_table(prior, posterior, mention, cfg.tie_break);
  a["tie_break"] = stats::to_string(cfg.tie_break);
  a["tie_break_note"] = "equal deltas (compared at 1e-9) are ordered by the tie_break rule; posterior_desc is the default";
  std::map<std::string, const search::Hypothesis*> by_id;
  for (const auto& h : hyps) by_id[h.hyp_id] = &h;
  json table = json::array();
  std::vector<stats::ShiftRow> ordered;
  for (const auto& h : hyps) {
    for (const auto& r : rows) {
      if (r.hyp_id == h.hyp_id) ordered.push_back(r);
    }
  }
  std::string csv = "hyp_id,round,prior,posterior,shift_rank,mention,text\n";
  for (const auto& r : ordered) {
    const auto* h = by_id.at(r.hyp_id);
    table.push_back({{"hyp_id", r.hyp_id},
                     {"text", h->text},
                     {"round", h->round},
                     {"prior", r.prior},
                     {"posterior", r.posterior},
                     {"delta", r.delta},
                     {"shift_rank", r.shift_rank},
                     {"mention", r.mention}});
    csv += r.hyp_id + "," + std::to_string(h->round) + "," + fmt(r.prior) + "," + fmt(r.posterior) + "," +
           std::to_string(r.shift_rank) + "," + fmt(r.mention) + "," + csv_quote(h->text) + "\n";
  }
  a["shift_table"] = table;
  write_file_atomic(cfg.output_dir / "table.csv", csv);

  if (rows.size() >= 10) {
    auto s = stats::attention_shares(rows, 5);
    a["attention_shares"] = {{"gain_posterior_mean", s.gain_posterior_mean},
                             {"gain_prior_mean", s.gain_prior_mean},
                             {"gain_mention_mean", s.gain_mention_mean},
                             {"loss_posterior_mean", s.loss_posterior_mean},
                             {"loss_prior_mean", s.loss_prior_mean},
                             {"loss_mention_mean", s.loss_mention_mean}};
  } else {
    a["attention_shares"] = nullptr;
  }
  std::vector<double> pv, qv, mv;
  for (const auto& r : ordered) {
    pv.push_back(r.prior);
    qv.push_back(r.posterior);
    mv.push_back(r.mention);
  }
  auto safe_pearson = [](const std::vector<double>& x, const std::vector<double>& y) -> json {
    try {
      return stats::pearson(x, y);
    } catch (const ValidationError&) {
      return nullptr;
    }
  };
  a["correlations"] = {{"prior_mention", safe_pearson(pv, mv)},
                       {"posterior_mention", safe_pearson(qv, mv)},
                       {"prior_posterior", safe_pearson(pv, qv)}};

  json trends = json::array();
  for (const auto& t : stats::round_trends(reports, coverage, prior)) {
    trends.push_back({{"round", t.round},
                      {"n_hypotheses", t.n_hypotheses},
                      {"mean_prior_frequency", t.mean_prior_frequency},
                      {"mean_posterior_coverage", t.mean_posterior_coverage},
                      {"mean_confidence_margin", t.mean_confidence_margin},
                      {"consistency_rate", t.consistency_rate}});
  }
  a["round_trends"] = trends;
  try {
    auto c = stats::coverage_cosine(coverage);
    a["coverage_cosine"] = {{"mean", c.mean}, {"std", c.std}, {"n_pairs", c.n_pairs}, {"excluded", c.excluded}};
  } catch (const ValidationError& e) {
    a["coverage_cosine"] = {{"error", e.what()}};
  }
  a["score_regression"] = score_regression(annotations, hyps);
  out << "analyze: " << hyps.size() << " hypotheses over " << pairs.size() << " pairs; unexplained "
      << fmt(a["unexplained_fraction"].get<double>()) << "; vote-scheme agreement "
      << fmt(a["vote_scheme_agreement"].get<double>()) << "\n";
  return a;
}

std::string svg_scatter(const std::vector<stats::ShiftRow>& rows, const std::map<std::string, std::string>& labels) {
  const int size = 420, pad = 50;
  auto sx = [&](double v) { return pad + v * (size - 2 * pad); };
  auto sy = [&](double v) { return size - pad - v * (size - 2 * pad); };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<line x1=\"" << sx(0) << "\" y1=\"" << sy(0) << "\" x2=\"" << sx(1) << "\" y2=\"" << sy(0)
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << sx(0) << "\" y1=\"" << sy(0) << "\" x2=\"" << sx(0) << "\" y2=\"" << sy(1)
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << sx(0) << "\" y1=\"" << sy(0) << "\" x2=\"" << sx(1) << "\" y2=\"" << sy(1)
    << "\" stroke=\"#bbb\" stroke-dasharray=\"4 4\"/>\n"
    << "<text x=\"" << size / 2 << "\" y=\"" << size - 12 << "\" text-anchor=\"middle\" font-size=\"12\">prior</text>\n"
    << "<text x=\"14\" y=\"" << size / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 " << size / 2
    << ")\" text-anchor=\"middle\">posterior</text>\n";
  for (const auto& r : rows) {
    s << "<circle cx=\"" << fmt(sx(r.prior), 1) << "\" cy=\"" << fmt(sy(r.posterior), 1)
      << "\" r=\"4\" fill=\"#3465a4\"/>\n";
    auto it = labels.find(r.hyp_id);
    s << "<text x=\"" << fmt(sx(r.prior) + 6, 1) << "\" y=\"" << fmt(sy(r.posterior) - 4, 1) << "\" font-size=\"9\">"
      << (it == labels.end() ? r.hyp_id : it->second) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string svg_trends(const json& trends) {
  const int w = 520, h = 320, pad = 50;
  const std::size_t n = trends.size();
  double max_margin = 1.0;
  for (const auto& t : trends) max_margin = std::max(max_margin, t["mean_confidence_margin"].get<double>());
  auto sx = [&](std::size_t i) { return pad + (n <= 1 ? 0.5 : static_cast<double>(i) / (n - 1)) * (w - 2 * pad); };
  auto sy = [&](double v) { return h - pad - v * (h - 2 * pad); };
  struct Series {
    const char* key;
    const char* color;
    double scale;
  };
  const Series series[] = {{"mean_prior_frequency", "#cc0000", 1.0},
                           {"mean_posterior_coverage", "#3465a4", 1.0},
                           {"consistency_rate", "#4e9a06", 1.0},
                           {"mean_confidence_margin", "#75507b", 1.0 / max_margin}};
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<line x1=\"" << pad << "\" y1=\"" << sy(0) << "\" x2=\"" << w - pad << "\" y2=\"" << sy(0)
    << "\" stroke=\"black\"/>\n";
  int legend_y = 16;
  for (const auto& ser : series) {
    std::string points;
    for (std::size_t i = 0; i < n; ++i) {
      const json& v = trends[i][ser.key];
      if (!v.is_number()) continue;
      points += fmt(sx(i), 1) + "," + fmt(sy(v.get<double>() * ser.scale), 1) + " ";
    }
    s << "<polyline fill=\"none\" stroke=\"" << ser.color << "\" stroke-width=\"2\" points=\"" << points << "\"/>\n"
      << "<text x=\"" << w - 200 << "\" y=\"" << legend_y << "\" font-size=\"11\" fill=\"" << ser.color << "\">"
      << ser.key << (ser.scale != 1.0 ? " (scaled)" : "") << "</text>\n";
    legend_y += 14;
  }
  for (std::size_t i = 0; i < n; ++i) {
    s << "<text x=\"" << fmt(sx(i), 1) << "\" y=\"" << h - pad + 16 << "\" font-size=\"11\" text-anchor=\"middle\">"
      << "round " << trends[i]["round"].get<int>() << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void print_table_analysis(const TableAnalysis& a, std::ostream& out) {
  out << "prior-mention correlation: " << fmt(a.prior_mention, 2) << " (" << fmt(a.prior_mention) << ")\n"
      << "posterior-mention correlation: " << fmt(a.posterior_mention, 2) << " (" << fmt(a.posterior_mention) << ")\n"
      << "shift ranks matching the table: " << a.rank_matches << "/" << a.shifts.size() << "\n"
      << "top-5 gains: posterior " << fmt(a.shares.gain_posterior_mean, 3) << ", prior "
      << fmt(a.shares.gain_prior_mean, 3) << ", mention " << fmt(a.shares.gain_mention_mean, 3) << "\n"
      << "top-5 losses: posterior " << fmt(a.shares.loss_posterior_mean, 3) << ", prior "
      << fmt(a.shares.loss_prior_mean, 3) << ", mention " << fmt(a.shares.loss_mention_mean, 3) << "\n";
}

}  // namespace

void cmd_analyze(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out) {
  if (opts.table) {
    auto rows = load_table(*opts.table);
    auto a = analyze_table(rows, cfg.tie_break);
    print_table_analysis(a, out);
    return;
  }
  DirectoryLock lock(cfg.output_dir);
  Manifest manifest("analyze", cfg);
  json a = build_analysis(cfg, out);
  for (auto& [name, digest] : a["inputs"].items()) manifest.input(cfg.output_dir / name);
  write_file_atomic(cfg.output_dir / "analysis.json", a.dump(2) + "\n");
  manifest.output(cfg.output_dir / "analysis.json");
  manifest.output(cfg.output_dir / "table.csv");
  manifest.write();
  const auto& c = a["correlations"];
  out << "prior-mention correlation: " << (c["prior_mention"].is_number() ? fmt(c["prior_mention"].get<double>(), 2) : "n/a")
      << "\nposterior-mention correlation: "
      << (c["posterior_mention"].is_number() ? fmt(c["posterior_mention"].get<double>(), 2) : "n/a") << "\n";
}

void cmd_report(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out) {
  if (opts.table) {
    auto rows = load_table(*opts.table);
    auto a = analyze_table(rows, cfg.tie_break);
    print_table_analysis(a, out);
    std::map<std::string, std::string> labels;
    for (const auto& r : rows) labels[r.hyp_id] = r.label;
    fs::create_directories(cfg.output_dir / "figures");
    write_file_atomic(cfg.output_dir / "figures" / "prior_posterior.svg", svg_scatter(a.shifts, labels));
    return;
  }
  cmd_analyze(cfg, opts, out);
  DirectoryLock lock(cfg.output_dir);
  Manifest manifest("report", cfg);
  json a = json::parse(read_file(cfg.output_dir / "analysis.json"));
  manifest.input(cfg.output_dir / "analysis.json");
  std::vector<stats::ShiftRow> rows;
  std::map<std::string, std::string> labels;
  int i = 0;
  for (const auto& r : a["shift_table"]) {
    stats::ShiftRow s;
    s.hyp_id = r["hyp_id"].get<std::string>();
    s.prior = r["prior"].get<double>();
    s.posterior = r["posterior"].get<double>();
    s.shift_rank = r["shift_rank"].get<int>();
    rows.push_back(s);
    labels[s.hyp_id] = "H" + std::to_string(++i);
  }
  fs::create_directories(cfg.output_dir / "figures");
  write_file_atomic(cfg.output_dir / "figures" / "prior_posterior.svg", svg_scatter(rows, labels));
  write_file_atomic(cfg.output_dir / "figures" / "round_trends.svg", svg_trends(a["round_trends"]));
  manifest.output(cfg.output_dir / "figures" / "prior_posterior.svg");
  manifest.output(cfg.output_dir / "figures" / "round_trends.svg");
  manifest.write();
  out << "hyp  round  prior  posterior  rank  mention\n";
  i = 0;
  for (const auto& r : a["shift_table"]) {
    out << std::left << std::setw(5) << ("H" + std::to_string(++i)) << std::setw(7) << r["round"].get<int>()
        << std::setw(7) << fmt(r["prior"].get<double>(), 2) << std::setw(11) << fmt(r["posterior"].get<double>(), 2)
        << std::setw(6) << r["shift_rank"].get<int>() << fmt(r["mention"].get<double>(), 2) << "  "
        << r["text"].get<std::string>() << "\n";
  }
}

SimulationSummary cmd_simulate(RunConfig cfg, const CommandOptions& opts, std::ostream& out) {
  sim::WorldConfig world = cfg.scripted_world ? sim::WorldConfig::load(*cfg.scripted_world) : sim::default_world();
  if (cfg.sample_n == 0) cfg.sample_n = 400;
  fs::create_directories(cfg.output_dir);
  {
    DirectoryLock lock(cfg.output_dir);
    auto generated = sim::generate_world(world, cfg.sim_papers, cfg.sim_venues);
    corpus::save_corpus(cfg.output_dir / "corpus.jsonl", generated.records());
    write_file_atomic(cfg.output_dir / "world.json", world.to_json().dump(2) + "\n");
  }
  cfg.corpus_path = cfg.output_dir / "corpus.jsonl";
  cfg.scripted_world = cfg.output_dir / "world.json";
  cfg.provider_path.reset();

  cmd_pairs(cfg, opts, out);
  cmd_search(cfg, opts, out);
  cmd_priors(cfg, opts, out);
  cmd_match(cfg, opts, out);
  cmd_annotate(cfg, opts, out);
  cmd_report(cfg, opts, out);

  DirectoryLock lock(cfg.output_dir);
  auto generated = sim::generate_world(world, cfg.sim_papers, cfg.sim_venues);
  auto hyps = search::load_hypotheses(cfg.output_dir / "hypotheses.json");
  auto pairs = corpus::load_pairs(cfg.output_dir / "pairs.jsonl");
  auto votes = search::load_votes(cfg.output_dir / "votes.jsonl");
  std::vector<std::string> pair_ids, hyp_ids;
  for (const auto& p : pairs) pair_ids.push_back(p.pair_id);
  for (const auto& h : hyps) hyp_ids.push_back(h.hyp_id);
  auto coverage = search::coverage_from_votes(pair_ids, hyp_ids, votes);
  SimulationSummary summary;
  summary.recovery = sim::recovery_score(hyps, search::posterior_coverage(coverage), generated, pairs);
  summary.n_pairs = pairs.size();
  summary.rounds = search::load_round_reports(cfg.output_dir / "rounds.json").size();
  summary.unexplained_fraction =
      pairs.empty() ? 0.0 : static_cast<double>(search::unexplained_set(coverage).size()) / pairs.size();
  const auto& r = summary.recovery;
  json rec = {{"config_digest", cfg.digest()},
              {"recall", r.recall},
              {"precision", r.precision},
              {"coverage_error", r.coverage_error},
              {"per_criterion_error", r.per_criterion_error},
              {"measured_coverage", r.measured},
              {"expected_coverage", r.expected},
              {"unexplained_fraction", summary.unexplained_fraction},
              {"rounds", summary.rounds}};
  write_file_atomic(cfg.output_dir / "recovery.json", rec.dump(2) + "\n");
  out << "recovery: recall " << fmt(r.recall, 3) << ", precision " << fmt(r.precision, 3) << ", coverage_error "
      << fmt(r.coverage_error, 4) << ", unexplained " << fmt(summary.unexplained_fraction, 4) << " after "
      << summary.rounds << " round(s)\n";
  return summary;
}

}  // namespace tacit::pipeline
