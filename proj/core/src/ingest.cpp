#include "tacit/ingest.hpp"

#include <httplib.h>

#include <cctype>
#include <fstream>
#include <set>

#include "tacit/judge.hpp"
#include "tacit/util.hpp"

namespace tacit::ingest {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Transports

namespace {

class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(double rpm) : limiter_(rpm) {}

  std::string get(const std::string& url) override {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("URL must include a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    std::string origin = url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
    limiter_.acquire();
    httplib::Client client(origin);
    client.set_connection_timeout(std::chrono::seconds(30));
    client.set_read_timeout(std::chrono::seconds(60));
    auto res = client.Get(path);
    if (!res) throw TransportError("GET " + url + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw TransportError("GET " + url + " returned HTTP " + std::to_string(res->status));
    return res->body;
  }

 private:
  judge::RateLimiter limiter_;
};

}  // namespace

std::unique_ptr<Transport> make_http_transport(double requests_per_minute) {
  return std::make_unique<HttpTransport>(requests_per_minute);
}

ReplayTransport::ReplayTransport(const std::filesystem::path& transcript) {
  if (!std::filesystem::exists(transcript)) throw ValidationError("transcript not found: " + transcript.string());
  for (auto& line : read_lines(transcript)) {
    try {
      json j = json::parse(line.text);
      const json& body = j.at("response_body");
      responses_[j.at("request_url").get<std::string>()] = body.is_string() ? body.get<std::string>() : body.dump();
    } catch (const json::exception& e) {
      throw ValidationError(transcript.string() + ":" + std::to_string(line.number) + ": " + e.what());
    }
  }
}

std::string ReplayTransport::get(const std::string& url) {
  ++requests_;
  auto it = responses_.find(url);
  if (it == responses_.end()) throw TransportError("no recorded response for " + url);
  return it->second;
}

// ---------------------------------------------------------------------------
// Mapping

std::string page_url(const FetchJob& job, std::size_t offset) {
  std::string base = job.api_base_url;
  while (!base.empty() && base.back() == '/') base.pop_back();
  return base + "/notes?invitation=" + job.venue_id + "/-/Submission&details=replies&offset=" +
         std::to_string(offset) + "&limit=" + std::to_string(job.page_size);
}

namespace {

// Platform fields come either bare or wrapped as {"value": ...}.
const json* field(const json& content, const char* name) {
  auto it = content.find(name);
  if (it == content.end() || it->is_null()) return nullptr;
  if (it->is_object()) {
    auto v = it->find("value");
    return v == it->end() ? nullptr : &*v;
  }
  return &*it;
}

std::string text_field(const json& content, const char* name) {
  const json* v = field(content, name);
  return v && v->is_string() ? v->get<std::string>() : std::string();
}

int year_from(const std::string& venue_id, const json& note) {
  for (std::size_t i = 0; i + 4 <= venue_id.size(); ++i) {
    bool digits = true;
    for (std::size_t k = 0; k < 4; ++k) digits = digits && std::isdigit(static_cast<unsigned char>(venue_id[i + k]));
    bool bounded = (i == 0 || !std::isdigit(static_cast<unsigned char>(venue_id[i - 1]))) &&
                   (i + 4 == venue_id.size() || !std::isdigit(static_cast<unsigned char>(venue_id[i + 4])));
    if (digits && bounded) return std::stoi(venue_id.substr(i, 4));
  }
  if (auto it = note.find("cdate"); it != note.end() && it->is_number()) {
    // Milliseconds since the epoch; civil-year arithmetic is close enough for a label.
    return 1970 + static_cast<int>(it->get<double>() / 1000.0 / 31556952.0);
  }
  return 0;
}

const char* const kReviewTextFields[] = {"summary", "summary_of_the_paper", "main_review", "review",
                                         "strengths", "weaknesses", "strength_and_weaknesses", "questions"};

}  // namespace

std::optional<double> parse_rating(const json& value) {
  if (value.is_number()) return value.get<double>();
  if (!value.is_string()) return std::nullopt;
  const std::string s = trim(value.get<std::string>());
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '-' || s[i] == '+')) ++i;
  std::size_t digits_start = i;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  }
  if (i == digits_start || (i == digits_start + 1 && s[digits_start] == '.')) return std::nullopt;
  // The numeric token must end at a separator, not run into letters ("6x").
  if (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) return std::nullopt;
  return std::stod(s.substr(0, i));
}

corpus::PaperRecord note_to_record(const json& note, const std::string& venue_id) {
  if (!note.is_object()) throw ValidationError("note is not an object");
  auto id = note.find("id");
  if (id == note.end() || !id->is_string() || id->get<std::string>().empty()) {
    throw ValidationError("note has no id");
  }
  const json empty = json::object();
  const json& content = note.contains("content") && note["content"].is_object() ? note["content"] : empty;
  corpus::PaperRecord r;
  r.paper_id = id->get<std::string>();
  r.venue_id = venue_id;
  r.year = year_from(venue_id, note);
  r.title = text_field(content, "title");
  if (std::string abstract = text_field(content, "abstract"); !abstract.empty()) {
    r.extended_abstract.raw_abstract = abstract;
  }
  const json* replies = nullptr;
  if (auto d = note.find("details"); d != note.end() && d->is_object()) {
    if (auto rep = d->find("replies"); rep != d->end() && rep->is_array()) replies = &*rep;
  }
  if (replies) {
    for (const auto& reply : *replies) {
      if (!reply.is_object() || !reply.contains("content") || !reply["content"].is_object()) continue;
      const json& rc = reply["content"];
      const json* rating = field(rc, "rating");
      if (!rating) rating = field(rc, "recommendation");
      if (!rating) continue;  // not a review (comment, decision, ...)
      auto score = parse_rating(*rating);
      if (!score) {
        throw ValidationError("unparseable rating " + (rating->is_string() ? "'" + rating->get<std::string>() + "'"
                                                                            : rating->dump()));
      }
      r.scores.push_back(*score);
      if (const json* conf = field(rc, "confidence")) {
        if (auto c = parse_rating(*conf)) {
          r.reviewer_confidences.push_back(*c);
          r.has_confidences = true;
        }
      }
      std::string text;
      for (const char* name : kReviewTextFields) {
        std::string part = text_field(rc, name);
        if (part.empty()) continue;
        text += (text.empty() ? "" : "\n\n") + part;
      }
      r.comments.push_back(text);
      r.has_comments = true;
    }
  }
  if (r.scores.empty()) throw ValidationError("no review scores");
  if (r.has_confidences && r.reviewer_confidences.size() != r.scores.size()) {
    r.reviewer_confidences.clear();  // partial confidences cannot be aligned with reviews
    r.has_confidences = false;
  }
  // Same validator as the corpus loader.
  return corpus::parse_record(corpus::serialize_record(r));
}

FetchResult fetch_venue(const FetchJob& job, Transport& transport, const std::optional<std::filesystem::path>& output) {
  if (job.page_size == 0) throw ValidationError("fetch: page_size must be > 0");
  std::size_t offset = 0;
  if (job.resume_token && !job.resume_token->empty()) {
    const std::string& t = *job.resume_token;
    if (t.find_first_not_of("0123456789") != std::string::npos) throw ValidationError("bad resume token '" + t + "'");
    offset = std::stoull(t);
  }
  std::set<std::string> written;
  if (output && std::filesystem::exists(*output)) {
    for (auto& line : read_lines(*output)) written.insert(corpus::parse_record(line.text).paper_id);
  }
  FetchResult result;
  for (;;) {
    const std::string url = page_url(job, offset);
    std::string body;
    try {
      body = transport.get(url);
    } catch (const TransportError& e) {
      throw FetchInterrupted(std::string(e.what()) + " (resume with token " + std::to_string(offset) + ")",
                             std::to_string(offset));
    }
    json page;
    try {
      page = json::parse(body);
    } catch (const json::parse_error& e) {
      throw FetchInterrupted("unparseable page at offset " + std::to_string(offset) + ": " + e.what(),
                             std::to_string(offset));
    }
    const json* notes = nullptr;
    if (page.is_object() && page.contains("notes") && page["notes"].is_array()) notes = &page["notes"];
    if (!notes) {
      throw FetchInterrupted("page at offset " + std::to_string(offset) + " has no notes array",
                             std::to_string(offset));
    }
    std::string appended, rejected;
    for (std::size_t i = 0; i < notes->size(); ++i) {
      const json& note = (*notes)[i];
      try {
        auto r = note_to_record(note, job.venue_id);
        if (!written.insert(r.paper_id).second) continue;
        appended += corpus::serialize_record(r) + "\n";
        result.records.push_back(std::move(r));
      } catch (const ValidationError& e) {
        corpus::Reject rej{offset + i + 1, e.what()};
        std::string nid = note.is_object() && note.contains("id") && note["id"].is_string()
                              ? note["id"].get<std::string>()
                              : std::string();
        rejected += json({{"position", rej.line}, {"paper_id", nid}, {"reason", rej.reason}}).dump() + "\n";
        result.rejects.push_back(std::move(rej));
      }
    }
    if (output) {
      std::ofstream out(*output, std::ios::binary | std::ios::app);
      out << appended;
      std::ofstream rej(output->string() + ".rejects.jsonl", std::ios::binary | std::ios::app);
      rej << rejected;
      if (!out.flush() || !rej.flush()) throw std::runtime_error("cannot write fetch output");
    }
    offset += notes->size();
    result.next_token = std::to_string(offset);
    bool last = notes->size() < job.page_size;
    if (auto c = page.find("count"); c != page.end() && c->is_number_unsigned()) {
      last = last || offset >= c->get<std::size_t>();
    }
    if (last) {
      result.complete = true;
      return result;
    }
  }
}

// ---------------------------------------------------------------------------
// Sidecar

std::vector<SidecarEntry> load_sidecar(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("sidecar not found: " + path.string());
  std::vector<SidecarEntry> out;
  for (auto& line : read_lines(path)) {
    try {
      json j = json::parse(line.text);
      SidecarEntry e;
      e.paper_id = j.at("paper_id").get<std::string>();
      const json& a = j.at("extended_abstract");
      e.extended_abstract.context = a.value("context", "");
      e.extended_abstract.key_idea = a.value("key_idea", "");
      e.extended_abstract.method_details = a.value("method_details", "");
      e.extended_abstract.experiments_results = a.value("experiments_results", "");
      e.extended_abstract.impact = a.value("impact", "");
      out.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line.number) + ": " + e.what());
    }
  }
  return out;
}

MergeReport merge_sidecar(std::vector<corpus::PaperRecord>& records, const std::vector<SidecarEntry>& sidecar,
                          bool force) {
  std::set<std::string> seen;
  for (const auto& e : sidecar) {
    if (!seen.insert(e.paper_id).second) throw ValidationError("duplicate sidecar paper_id '" + e.paper_id + "'");
  }
  std::map<std::string, corpus::PaperRecord*> by_id;
  for (auto& r : records) by_id[r.paper_id] = &r;
  MergeReport report;
  for (const auto& e : sidecar) {
    auto it = by_id.find(e.paper_id);
    if (it == by_id.end()) {
      report.unknown_ids.push_back(e.paper_id);
      continue;
    }
    auto& a = it->second->extended_abstract;
    std::size_t before = report.filled_sections;
    auto fill = [&](std::string& dst, const std::string& src) {
      if (trim(src).empty()) return;
      if (!force && !trim(dst).empty()) return;
      if (dst == src) return;
      dst = src;
      ++report.filled_sections;
    };
    fill(a.context, e.extended_abstract.context);
    fill(a.key_idea, e.extended_abstract.key_idea);
    fill(a.method_details, e.extended_abstract.method_details);
    fill(a.experiments_results, e.extended_abstract.experiments_results);
    fill(a.impact, e.extended_abstract.impact);
    if (report.filled_sections != before) ++report.records_touched;
  }
  return report;
}

}  // namespace tacit::ingest
