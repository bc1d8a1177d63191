#pragma once
// Provider-agnostic judge client: response parsing, content-addressed cache, retries and
// rate limiting in front of a pluggable Provider.

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tacit/prompts.hpp"

namespace tacit::judge {

// Which paper is bound to which slot of the evaluation prompt. The stored label always means
// "the hypothesis explains why the higher-scored paper is stronger".
//   high_first: lower-scored paper is Paper 1, higher-scored is Paper 2; label stored as parsed.
//   low_first:  slots swapped (higher-scored is Paper 1); parsed label is inverted.
enum class PresentationOrder { low_first, high_first };

std::string_view to_string(PresentationOrder order);
PresentationOrder order_from_string(std::string_view name);

struct JudgeRequest {
  TemplateId template_id = TemplateId::evaluate;
  std::string rendered_prompt;
  std::string model_id;
  double temperature = 0.0;
  long long fold_nonce = 0;
  PresentationOrder presentation_order = PresentationOrder::high_first;
};

enum class ParseStatus { ok, malformed };

struct JudgeResponse {
  std::string raw_text;
  int label = 0;
  int confidence = 0;
  ParseStatus parse_status = ParseStatus::malformed;
  int attempts = 0;

  bool ok() const { return parse_status == ParseStatus::ok; }
};

// Extracts the first <label> and first <confidence> tags. Label must be 0/1, confidence an
// integer in [0, 10]; anything else yields malformed.
JudgeResponse parse_judge_response(const std::string& raw);

// Label-only parse used by the match prompt.
std::optional<int> parse_label_only(const std::string& raw);

// Tag shape the evaluation prompt asks for.
std::string format_judge_response(int label, int confidence);

struct ProviderConfig {
  std::string provider_url;
  std::string model_id;
  double temperature_generate = 1.0;
  double temperature_evaluate = 0.0;
  int max_retries = 3;
  double requests_per_minute = 0.0;  // 0 disables throttling
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::milliseconds backoff_base{500};
  std::chrono::seconds timeout{120};

  static ProviderConfig from_json_text(const std::string& text);
  static ProviderConfig load(const std::filesystem::path& path);
};

// Performs one remote completion. Implementations throw TransportError for failures the
// client should retry; any other exception propagates immediately.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string complete(const JudgeRequest& request) = 0;
};

// OpenAI-compatible chat-completions endpoint (POST {provider_url}/chat/completions).
std::shared_ptr<Provider> make_http_provider(const ProviderConfig& config);

std::string cache_key(const JudgeRequest& request);

// One file per key under a directory: a metadata header followed by the raw response.
// Without a directory the cache is in-memory only.
class ResponseCache {
 public:
  explicit ResponseCache(std::optional<std::filesystem::path> dir = std::nullopt);

  // Throws std::runtime_error("cache corruption ...") when a stored entry fails validation.
  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const JudgeRequest& request, const std::string& raw);
  std::size_t size() const;

 private:
  std::optional<std::filesystem::path> dir_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> memory_;
};

// Token bucket; capacity one minute's worth of requests.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_minute);
  void acquire();

 private:
  double rate_per_sec_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mu_;
};

struct AttemptLog {
  std::string key;
  int attempt = 0;
  std::string outcome;  // "ok", "malformed", "transport_error"
  std::string detail;
};

struct ClientStats {
  std::size_t remote_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t malformed = 0;
  std::size_t transport_errors = 0;
};

// Returns true when a raw response is usable for the request's purpose.
using Validator = std::function<bool(const std::string&)>;

class JudgeClient {
 public:
  JudgeClient(std::shared_ptr<Provider> provider, ProviderConfig config,
              std::shared_ptr<ResponseCache> cache = std::make_shared<ResponseCache>());

  // Evaluation-style submit: parses label/confidence, retrying malformed output up to
  // max_retries attempts; returns the last malformed response if the budget runs out.
  JudgeResponse submit(const JudgeRequest& request);

  // Raw completion with an optional validator. Invalid responses are retried like malformed
  // ones and never cached. Returns the last raw text and whether it validated.
  std::pair<std::string, bool> complete(const JudgeRequest& request, const Validator& valid = {});

  const ProviderConfig& config() const { return config_; }
  ClientStats stats() const;
  std::vector<AttemptLog> attempts() const;

  JudgeRequest make_request(TemplateId id, std::string rendered_prompt, long long nonce = 0,
                            PresentationOrder order = PresentationOrder::high_first) const;

 private:
  std::string remote_with_retries(const JudgeRequest& request, const std::string& key, int attempt);
  void log(AttemptLog entry);

  std::shared_ptr<Provider> provider_;
  ProviderConfig config_;
  std::shared_ptr<ResponseCache> cache_;
  RateLimiter limiter_;
  mutable std::mutex mu_;
  ClientStats stats_;
  std::vector<AttemptLog> attempts_;
};

}  // namespace tacit::judge
