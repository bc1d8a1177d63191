// tacit: command-line front end. Every subcommand reads and writes artifacts under --output-dir.
#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "tacit/ingest.hpp"
#include "tacit/pipeline.hpp"
#include "tacit/util.hpp"

namespace {

using tacit::pipeline::CommandOptions;
using tacit::pipeline::RunConfig;

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::string provider;
  std::string scripted_world;
  std::string corpus;
  std::optional<unsigned> threads;
  std::optional<std::size_t> sample_n;
  std::string matcher;
};

RunConfig resolve(const GlobalFlags& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : RunConfig::load(g.config);
  if (!g.matcher.empty()) {
    auto j = cfg.to_json();
    j["matcher"] = g.matcher;
    cfg = RunConfig::from_json(j);
  }
  if (g.seed) cfg.seed = *g.seed;
  if (!g.output_dir.empty()) cfg.output_dir = g.output_dir;
  if (!g.provider.empty()) cfg.provider_path = g.provider;
  if (!g.scripted_world.empty()) cfg.scripted_world = g.scripted_world;
  if (!g.corpus.empty()) cfg.corpus_path = g.corpus;
  if (g.threads) cfg.threads = *g.threads;
  if (g.sample_n) cfg.sample_n = *g.sample_n;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tacit: pairwise judge-based discovery of implicit review criteria"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  CommandOptions opts;
  std::string table, hypotheses, transcript, resume_token, sidecar;
  int halt_after = 0;

  app.add_option("--config", g.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the run seed");
  app.add_option("--output-dir", g.output_dir, "Artifact directory");
  app.add_option("--provider", g.provider, "Judge provider configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--scripted-world", g.scripted_world, "Use the offline scripted judge for this world")
      ->check(CLI::ExistingFile);
  app.add_option("--corpus", g.corpus, "Corpus JSONL");
  app.add_option("--threads", g.threads, "Worker threads for judge calls");
  app.add_option("--sample-n", g.sample_n, "Pairs kept after filtering (0 keeps all)");
  app.add_option("--matcher", g.matcher, "judge, dictionary or both");
  app.add_flag("--resume", opts.resume, "Continue from the checkpoint in --output-dir");
  app.add_flag("--force", opts.force, "Ignore configuration mismatches on resume; overwrite sidecar sections");

  auto* ingest = app.add_subcommand("ingest", "Fetch a venue's submissions and reviews into corpus.jsonl");
  ingest->add_option("--venue", opts.venue_id, "Venue id, e.g. ICLR.cc/2024/Conference")->required();
  ingest->add_option("--api-base", opts.api_base, "API base URL");
  ingest->add_option("--page-size", opts.page_size, "Notes per page");
  ingest->add_option("--transcript", transcript, "Replay recorded responses instead of the network")
      ->check(CLI::ExistingFile);
  ingest->add_option("--resume-token", resume_token, "Token printed by an interrupted fetch");
  ingest->add_option("--sidecar", sidecar, "Extended-abstract sidecar JSONL to merge")->check(CLI::ExistingFile);
  ingest->add_flag("--live", opts.live, "Fetch over the network");

  auto* pairs = app.add_subcommand("pairs", "Build the pairwise dataset");
  auto* search = app.add_subcommand("search", "Iterative hypothesis search");
  search->add_option("--halt-after-round", halt_after)->group("");
  auto* priors = app.add_subcommand("priors", "Elicit prior hypotheses");
  auto* match = app.add_subcommand("match", "Prior frequency of each posterior hypothesis");
  match->add_option("--hypotheses", hypotheses, "Hypothesis file (defaults to the search output)")
      ->check(CLI::ExistingFile);
  auto* annotate = app.add_subcommand("annotate", "Annotate review comments against the hypotheses");
  annotate->add_option("--hypotheses", hypotheses, "Hypothesis file (defaults to the search output)")
      ->check(CLI::ExistingFile);
  auto* analyze = app.add_subcommand("analyze", "Statistics over the run artifacts");
  analyze->add_option("--table", table, "Analyze a prior/posterior/mention table instead")->check(CLI::ExistingFile);
  auto* report = app.add_subcommand("report", "Analysis plus CSV table and SVG figures");
  report->add_option("--table", table, "Report on a prior/posterior/mention table instead")->check(CLI::ExistingFile);
  auto* simulate = app.add_subcommand("simulate", "Run every stage on a synthetic world with the scripted judge");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version land here too, with a zero exit code.
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = resolve(g);
    if (!table.empty()) opts.table = table;
    if (!hypotheses.empty()) opts.hypotheses = hypotheses;
    if (!transcript.empty()) opts.transcript = transcript;
    if (!resume_token.empty()) opts.resume_token = resume_token;
    if (!sidecar.empty()) opts.sidecar = sidecar;
    if (halt_after > 0) opts.halt_after_round = halt_after;

    namespace p = tacit::pipeline;
    if (*ingest) p::cmd_ingest(cfg, opts, std::cout);
    else if (*pairs) p::cmd_pairs(cfg, opts, std::cout);
    else if (*search) p::cmd_search(cfg, opts, std::cout);
    else if (*priors) p::cmd_priors(cfg, opts, std::cout);
    else if (*match) p::cmd_match(cfg, opts, std::cout);
    else if (*annotate) p::cmd_annotate(cfg, opts, std::cout);
    else if (*analyze) p::cmd_analyze(cfg, opts, std::cout);
    else if (*report) p::cmd_report(cfg, opts, std::cout);
    else if (*simulate) p::cmd_simulate(cfg, opts, std::cout);
  } catch (const tacit::ingest::FetchInterrupted& e) {
    std::cerr << "tacit: " << e.what() << "\nresume with --resume-token " << e.token() << "\n";
    return tacit::pipeline::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "tacit: " << e.what() << "\n";
    return tacit::pipeline::exit_code_for(e);
  }
  return 0;
}
