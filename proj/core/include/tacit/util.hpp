#pragma once
// Shared plumbing: error types, hashing, file IO, small parallel loop.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tacit {

// Input or artifact failed validation. Maps to CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Provider could not be reached after the retry budget. Exit code 3.
class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& what, std::string request_key = {})
      : std::runtime_error(what), request_key_(std::move(request_key)) {}
  const std::string& request_key() const { return request_key_; }

 private:
  std::string request_key_;
};

// Resume attempted against state written under a different configuration. Exit code 4.
class ResumeConflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view data);

// SHA-256 over length-prefixed fields, so ("ab","c") and ("a","bc") differ.
std::string sha256_fields(const std::vector<std::string_view>& fields);

// 64-bit FNV-1a followed by a splitmix finalizer. Stable across platforms.
std::uint64_t stable_hash64(std::string_view data);
std::uint64_t mix64(std::uint64_t x);

// Uniform double in [0, 1) from a 64-bit value.
inline double unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

std::string read_file(const std::filesystem::path& path);
// Writes via a sibling temp file and rename, so readers never see partial content.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string file_digest(const std::filesystem::path& path);

// Non-empty lines of a text file; line numbers are 1-based and preserved.
struct NumberedLine {
  std::size_t number;
  std::string text;
};
std::vector<NumberedLine> read_lines(const std::filesystem::path& path);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
// Trims and collapses internal whitespace runs to single spaces.
std::string normalize_space(std::string_view s);

// Runs fn(i) for i in [0, n) on up to `threads` workers. fn must be safe to call concurrently
// for distinct i. The first exception thrown is rethrown after all workers stop.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

// Deterministic RNG helpers independent of std::*_distribution implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  // Uniform integer in [0, bound), bound > 0, by rejection.
  std::uint64_t below(std::uint64_t bound);
  double uniform() { return unit_interval(next()); }

 private:
  std::uint64_t state_;
};

}  // namespace tacit
