#include "tacit/judge.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <thread>

#include "tacit/util.hpp"

namespace tacit::judge {

using json = nlohmann::json;

std::string_view to_string(PresentationOrder order) {
  return order == PresentationOrder::low_first ? "low_first" : "high_first";
}

PresentationOrder order_from_string(std::string_view name) {
  if (name == "low_first") return PresentationOrder::low_first;
  if (name == "high_first") return PresentationOrder::high_first;
  throw ValidationError("unknown presentation order '" + std::string(name) + "'");
}

namespace {

// Content of the first structurally closed <tag>...</tag>, if any.
std::optional<std::string> first_tag(const std::string& raw, const std::string& tag) {
  const std::string open = "<" + tag + ">";
  const std::string close = "</" + tag + ">";
  std::size_t start = raw.find(open);
  while (start != std::string::npos) {
    std::size_t body = start + open.size();
    std::size_t end = raw.find(close, body);
    if (end == std::string::npos) return std::nullopt;
    std::size_t nested = raw.find(open, body);
    if (nested == std::string::npos || nested > end) return raw.substr(body, end - body);
    start = nested;
  }
  return std::nullopt;
}

std::optional<int> parse_small_int(std::string text, int lo, int hi) {
  text = trim(text);
  if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
    text = trim(text.substr(1, text.size() - 2));
  }
  if (text.empty() || text.size() > 3) return std::nullopt;
  int value = 0;
  for (char c : text) {
    if (c < '0' || c > '9') return std::nullopt;
    value = value * 10 + (c - '0');
  }
  if (value < lo || value > hi) return std::nullopt;
  return value;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

JudgeResponse parse_judge_response(const std::string& raw) {
  JudgeResponse r;
  r.raw_text = raw;
  auto label_text = first_tag(raw, "label");
  auto conf_text = first_tag(raw, "confidence");
  if (!label_text || !conf_text) return r;
  auto label = parse_small_int(*label_text, 0, 1);
  auto confidence = parse_small_int(*conf_text, 0, 10);
  if (!label || !confidence) return r;
  r.label = *label;
  r.confidence = *confidence;
  r.parse_status = ParseStatus::ok;
  return r;
}

std::optional<int> parse_label_only(const std::string& raw) {
  auto label_text = first_tag(raw, "label");
  if (!label_text) return std::nullopt;
  return parse_small_int(*label_text, 0, 1);
}

std::string format_judge_response(int label, int confidence) {
  return "<label>" + std::to_string(label) + "</label>\n\n<confidence>" +
         std::to_string(confidence) + "</confidence>";
}

ProviderConfig ProviderConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("provider config: ") + e.what());
  }
  ProviderConfig c;
  try {
    c.provider_url = j.at("provider_url").get<std::string>();
    c.model_id = j.at("model_id").get<std::string>();
    c.temperature_generate = j.value("temperature_generate", c.temperature_generate);
    c.temperature_evaluate = j.value("temperature_evaluate", c.temperature_evaluate);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.requests_per_minute = j.value("requests_per_minute", c.requests_per_minute);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    if (j.contains("backoff_ms")) c.backoff_base = std::chrono::milliseconds(j.at("backoff_ms").get<long>());
    if (j.contains("timeout_s")) c.timeout = std::chrono::seconds(j.at("timeout_s").get<long>());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("provider config: ") + e.what());
  }
  if (c.max_retries < 1) throw ValidationError("provider config: max_retries must be >= 1");
  return c;
}

ProviderConfig ProviderConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("provider config not found: " + path.string());
  return from_json_text(read_file(path));
}

std::string cache_key(const JudgeRequest& request) {
  std::string temperature = format_double(request.temperature);
  std::string nonce = std::to_string(request.fold_nonce);
  return sha256_fields({request.model_id, request.rendered_prompt, temperature, nonce});
}

// ---------------------------------------------------------------------------
// ResponseCache

namespace {
constexpr std::string_view kCacheMagic = "tacit-cache/1";
}

ResponseCache::ResponseCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
  if (dir_) std::filesystem::create_directories(*dir_);
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  if (!dir_) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = memory_.find(key);
    if (it == memory_.end()) return std::nullopt;
    return it->second;
  }
  auto path = *dir_ / key;
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  std::string content = read_file(path);
  auto corrupt = [&](const std::string& why) {
    return std::runtime_error("cache corruption in " + path.string() + ": " + why);
  };
  std::size_t header_end = content.find("\n\n");
  if (header_end == std::string::npos) throw corrupt("missing header terminator");
  std::istringstream header(content.substr(0, header_end));
  std::string line;
  std::getline(header, line);
  if (line != kCacheMagic) throw corrupt("bad magic");
  std::optional<std::size_t> length;
  std::string stored_key;
  while (std::getline(header, line)) {
    if (line.rfind("key: ", 0) == 0) stored_key = line.substr(5);
    if (line.rfind("length: ", 0) == 0) length = std::stoull(line.substr(8));
  }
  if (stored_key != key) throw corrupt("key mismatch");
  std::string body = content.substr(header_end + 2);
  if (!length || *length != body.size()) throw corrupt("length mismatch");
  return body;
}

void ResponseCache::put(const std::string& key, const JudgeRequest& request,
                        const std::string& raw) {
  if (!dir_) {
    std::lock_guard<std::mutex> lock(mu_);
    memory_[key] = raw;
    return;
  }
  std::ostringstream out;
  out << kCacheMagic << "\n"
      << "key: " << key << "\n"
      << "template: " << to_string(request.template_id) << "\n"
      << "model: " << request.model_id << "\n"
      << "temperature: " << format_double(request.temperature) << "\n"
      << "fold_nonce: " << request.fold_nonce << "\n"
      << "length: " << raw.size() << "\n\n"
      << raw;
  write_file_atomic(*dir_ / key, out.str());
}

std::size_t ResponseCache::size() const {
  if (!dir_) {
    std::lock_guard<std::mutex> lock(mu_);
    return memory_.size();
  }
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(*dir_)) {
    if (entry.is_regular_file() && entry.path().filename().string().find('.') == std::string::npos) ++n;
  }
  return n;
}

// ---------------------------------------------------------------------------
// RateLimiter

RateLimiter::RateLimiter(double requests_per_minute)
    : rate_per_sec_(requests_per_minute / 60.0),
      capacity_(std::max(1.0, requests_per_minute)),
      tokens_(capacity_),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  if (rate_per_sec_ <= 0.0) return;
  for (;;) {
    std::chrono::duration<double> wait{0.0};
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto now = std::chrono::steady_clock::now();
      tokens_ = std::min(capacity_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_per_sec_);
      last_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      wait = std::chrono::duration<double>((1.0 - tokens_) / rate_per_sec_);
    }
    std::this_thread::sleep_for(wait);
  }
}

// ---------------------------------------------------------------------------
// JudgeClient

JudgeClient::JudgeClient(std::shared_ptr<Provider> provider, ProviderConfig config,
                         std::shared_ptr<ResponseCache> cache)
    : provider_(std::move(provider)),
      config_(std::move(config)),
      cache_(std::move(cache)),
      limiter_(config_.requests_per_minute) {
  if (!provider_) throw std::invalid_argument("JudgeClient: provider is null");
  if (!cache_) cache_ = std::make_shared<ResponseCache>();
}

JudgeRequest JudgeClient::make_request(TemplateId id, std::string rendered_prompt, long long nonce,
                                       PresentationOrder order) const {
  JudgeRequest r;
  r.template_id = id;
  r.rendered_prompt = std::move(rendered_prompt);
  r.model_id = config_.model_id;
  bool generative = id == TemplateId::search || id == TemplateId::prior;
  r.temperature = generative ? config_.temperature_generate : config_.temperature_evaluate;
  r.fold_nonce = nonce;
  r.presentation_order = order;
  return r;
}

void JudgeClient::log(AttemptLog entry) {
  std::lock_guard<std::mutex> lock(mu_);
  attempts_.push_back(std::move(entry));
}

ClientStats JudgeClient::stats() const {
  std::lock_guard<std::mutex> lock(mu_);
  return stats_;
}

std::vector<AttemptLog> JudgeClient::attempts() const {
  std::lock_guard<std::mutex> lock(mu_);
  return attempts_;
}

std::string JudgeClient::remote_with_retries(const JudgeRequest& request, const std::string& key,
                                             int attempt) {
  std::string last_error;
  for (int i = 0; i < config_.max_retries; ++i) {
    limiter_.acquire();
    {
      std::lock_guard<std::mutex> lock(mu_);
      ++stats_.remote_calls;
    }
    try {
      return provider_->complete(request);
    } catch (const TransportError& e) {
      last_error = e.what();
      {
        std::lock_guard<std::mutex> lock(mu_);
        ++stats_.transport_errors;
      }
      log({key, attempt, "transport_error", last_error});
      if (i + 1 < config_.max_retries && config_.backoff_base.count() > 0) {
        std::this_thread::sleep_for(config_.backoff_base * (1 << i));
      }
    }
  }
  throw TransportError("provider failed after " + std::to_string(config_.max_retries) +
                           " attempts: " + last_error,
                       key);
}

std::pair<std::string, bool> JudgeClient::complete(const JudgeRequest& request,
                                                   const Validator& valid) {
  const std::string key = cache_key(request);
  if (auto hit = cache_->get(key)) {
    if (!valid || valid(*hit)) {
      std::lock_guard<std::mutex> lock(mu_);
      ++stats_.cache_hits;
      return {*hit, true};
    }
  }
  std::string raw;
  for (int attempt = 1; attempt <= config_.max_retries; ++attempt) {
    raw = remote_with_retries(request, key, attempt);
    if (!valid || valid(raw)) {
      cache_->put(key, request, raw);
      log({key, attempt, "ok", {}});
      return {raw, true};
    }
    {
      std::lock_guard<std::mutex> lock(mu_);
      ++stats_.malformed;
    }
    log({key, attempt, "malformed", raw.substr(0, 200)});
  }
  return {raw, false};
}

JudgeResponse JudgeClient::submit(const JudgeRequest& request) {
  int attempts = 0;
  auto counting = [&](const std::string& raw) {
    ++attempts;
    return parse_judge_response(raw).ok();
  };
  auto [raw, valid] = complete(request, counting);
  JudgeResponse r = parse_judge_response(raw);
  r.attempts = attempts;
  if (!valid) r.parse_status = ParseStatus::malformed;
  return r;
}

}  // namespace tacit::judge
