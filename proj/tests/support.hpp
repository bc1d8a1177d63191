#pragma once
// Shared fixtures for the test binaries.

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <unistd.h>

#include "tacit/corpus.hpp"
#include "tacit/judge.hpp"
#include "tacit/sim.hpp"
#include "tacit/util.hpp"

namespace tacit::testing {

inline std::filesystem::path data_dir() { return TACIT_TEST_DATA_DIR; }
inline std::filesystem::path fixture_dir() { return TACIT_TEST_FIXTURE_DIR; }

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("tacit-test-" + std::to_string(::getpid()) + "-" + std::to_string(++counter));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline corpus::PaperRecord make_record(const std::string& id, const std::string& venue, std::vector<double> scores) {
  corpus::PaperRecord r;
  r.paper_id = id;
  r.venue_id = venue;
  r.year = 2024;
  r.title = "Paper " + id;
  r.scores = std::move(scores);
  r.extended_abstract = {"ctx " + id, "idea " + id, "method " + id, "results " + id, "impact " + id, std::nullopt};
  return r;
}

// Provider answering from a callback and counting calls.
class FunctionProvider : public judge::Provider {
 public:
  using Fn = std::function<std::string(const judge::JudgeRequest&, int call)>;
  explicit FunctionProvider(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(const judge::JudgeRequest& request) override {
    int n;
    {
      std::lock_guard<std::mutex> lock(mu_);
      n = calls_++;
      prompts_.push_back(request.rendered_prompt);
    }
    return fn_(request, n);
  }
  int calls() const { return calls_; }
  std::vector<std::string> prompts() const {
    std::lock_guard<std::mutex> lock(mu_);
    return prompts_;
  }

 private:
  Fn fn_;
  mutable std::mutex mu_;
  int calls_ = 0;
  std::vector<std::string> prompts_;
};

inline judge::ProviderConfig offline_config(const std::string& model = "offline") {
  judge::ProviderConfig pc;
  pc.provider_url = "test://";
  pc.model_id = model;
  pc.backoff_base = std::chrono::milliseconds(0);
  return pc;
}

struct ScriptedSetup {
  sim::World world;
  std::vector<corpus::PaperRecord> records;
  std::unique_ptr<corpus::CorpusIndex> index;
  std::shared_ptr<sim::ScriptedJudge> judge;
  std::unique_ptr<judge::JudgeClient> client;

  ScriptedSetup(sim::WorldConfig config, std::size_t n_papers, std::size_t n_venues = 1)
      : world(sim::generate_world(std::move(config), n_papers, n_venues)), records(world.records()) {
    index = std::make_unique<corpus::CorpusIndex>(records);
    judge = std::make_shared<sim::ScriptedJudge>(world.config);
    client = std::make_unique<judge::JudgeClient>(judge, offline_config("scripted"));
  }
};

}  // namespace tacit::testing
