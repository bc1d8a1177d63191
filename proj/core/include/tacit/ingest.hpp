#pragma once
// Review-platform fetch client (paged JSON API) and sidecar merging of extended abstracts.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tacit/corpus.hpp"
#include "tacit/util.hpp"

namespace tacit::ingest {

// GET-only transport. Failures the caller may retry later throw TransportError.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string get(const std::string& url) = 0;
};

// Live HTTP(S) transport with a requests-per-minute throttle (0 disables it).
std::unique_ptr<Transport> make_http_transport(double requests_per_minute = 60.0);

// Replays recorded {request_url, response_body} JSONL transcripts. Unknown URLs throw
// TransportError.
class ReplayTransport : public Transport {
 public:
  explicit ReplayTransport(const std::filesystem::path& transcript);
  explicit ReplayTransport(std::map<std::string, std::string> responses) : responses_(std::move(responses)) {}
  std::string get(const std::string& url) override;
  std::size_t requests() const { return requests_; }

 private:
  std::map<std::string, std::string> responses_;
  std::size_t requests_ = 0;
};

struct FetchJob {
  std::string venue_id;
  std::string api_base_url;
  std::size_t page_size = 100;
  std::optional<std::string> resume_token;  // offset of the next page
};

// URL of the page starting at `offset`.
std::string page_url(const FetchJob& job, std::size_t offset);

// Leading numeric token of a rating string ("6: marginally above" -> 6.0).
std::optional<double> parse_rating(const nlohmann::json& value);

struct FetchResult {
  std::vector<corpus::PaperRecord> records;
  std::vector<corpus::Reject> rejects;  // line = position of the note in the stream (1-based)
  std::string next_token;               // token to resume from after this call
  bool complete = false;
};

// Raised when a page cannot be fetched; carries the token to resume from. Records fetched
// before the failure have already been written when an output path was given.
class FetchInterrupted : public TransportError {
 public:
  FetchInterrupted(const std::string& what, std::string token)
      : TransportError(what), token_(std::move(token)) {}
  const std::string& token() const { return token_; }

 private:
  std::string token_;
};

// Converts one platform note (a submission with its review replies) into a record.
// Throws ValidationError with the reason when the note has no usable scores.
corpus::PaperRecord note_to_record(const nlohmann::json& note, const std::string& venue_id);

// Pages through the venue. With `output` set, each page's records are appended to that corpus
// JSONL (ids already present are skipped) and rejects to `output` + ".rejects.jsonl".
FetchResult fetch_venue(const FetchJob& job, Transport& transport,
                        const std::optional<std::filesystem::path>& output = std::nullopt);

struct SidecarEntry {
  std::string paper_id;
  corpus::ExtendedAbstract extended_abstract;
};

std::vector<SidecarEntry> load_sidecar(const std::filesystem::path& path);

struct MergeReport {
  std::vector<std::string> unknown_ids;  // sidecar ids absent from the corpus
  std::size_t filled_sections = 0;
  std::size_t records_touched = 0;
};

// Fills empty extended-abstract sections (all sections with force). Duplicate sidecar ids are
// a ValidationError.
MergeReport merge_sidecar(std::vector<corpus::PaperRecord>& records, const std::vector<SidecarEntry>& sidecar,
                          bool force = false);

}  // namespace tacit::ingest
