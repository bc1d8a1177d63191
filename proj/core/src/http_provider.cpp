#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>

#include "tacit/judge.hpp"
#include "tacit/util.hpp"

namespace tacit::judge {

namespace {

using json = nlohmann::json;

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // no trailing slash
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("provider_url must include a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

class HttpProvider final : public Provider {
 public:
  explicit HttpProvider(ProviderConfig config) : config_(std::move(config)), url_(split_url(config_.provider_url)) {}

  std::string complete(const JudgeRequest& request) override {
    httplib::Client client(url_.origin);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    json body = {{"model", request.model_id},
                 {"temperature", request.temperature},
                 {"messages", json::array({{{"role", "user"}, {"content", request.rendered_prompt}}})}};
    auto res = client.Post(url_.path + "/chat/completions", headers, body.dump(), "application/json");
    if (!res) throw TransportError("HTTP request failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) {
      throw TransportError("HTTP status " + std::to_string(res->status));
    }
    if (res->status != 200) {
      throw std::runtime_error("provider rejected request with HTTP status " + std::to_string(res->status) +
                               ": " + res->body.substr(0, 300));
    }
    try {
      json j = json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      throw TransportError(std::string("unparseable provider reply: ") + e.what());
    }
  }

 private:
  ProviderConfig config_;
  SplitUrl url_;
};

}  // namespace

std::shared_ptr<Provider> make_http_provider(const ProviderConfig& config) {
  return std::make_shared<HttpProvider>(config);
}

}  // namespace tacit::judge
