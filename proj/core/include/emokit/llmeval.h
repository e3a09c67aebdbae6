#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "emokit/error.h"
#include "emokit/metrics.h"
#include "emokit/taxonomy.h"

namespace emokit::llm {

// The zero-shot instruction, sent verbatim ahead of the sentences.
extern const char* const kInstruction;

struct PromptRecord {
  std::string id;
  std::string sentence;
};

struct PromptBatch {
  long batch_id = 0;
  std::vector<PromptRecord> records;
  std::string rendered_prompt;
};

// Instruction, a blank line, then one "<id>. <sentence>" line per record.
std::string render_prompt(const std::vector<PromptRecord>& records);

// Order-preserving partition into batches of batch_limit (last may be
// shorter). Throws ConfigError when batch_limit is 0.
std::vector<PromptBatch> build_batches(const std::vector<PromptRecord>& records,
                                       std::size_t batch_limit = 30);

// Thrown by clients for failures worth retrying (timeouts, 429, 5xx).
class TransientFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Chat-completion transport. send() takes the JSON request body and returns
// the assistant message text.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // Throws ConfigError when the client cannot be used (e.g. no credential).
  virtual void check_configured() const = 0;
  virtual std::string send(const std::string& request_json) = 0;
  // Transcript metadata, never the credential.
  virtual std::string endpoint() const = 0;
};

// {"model": ..., "messages": [{"role": "user", "content": prompt}]}; no
// sampling parameters are sent.
std::string build_request(const PromptBatch& batch, const std::string& model);

struct TranscriptEntry {
  long batch_id = 0;
  int attempt = 0;
  std::string endpoint;
  std::string request;
  std::string response;  // empty on failure
  std::string error;     // empty on success
  std::int64_t started_ms = 0;
  std::int64_t finished_ms = 0;

  std::string to_json_line() const;
  static TranscriptEntry from_json_line(const std::string& line);
};

// Appends entries as JSON lines; thread-safe.
class TranscriptLog {
 public:
  TranscriptLog() = default;
  explicit TranscriptLog(const std::filesystem::path& path);

  void append(const TranscriptEntry& entry);
  std::vector<TranscriptEntry> entries() const;

  static std::vector<TranscriptEntry> read(const std::filesystem::path& path);

 private:
  mutable std::mutex mutex_;
  std::optional<std::filesystem::path> path_;
  std::vector<TranscriptEntry> entries_;
};

struct RetryPolicy {
  int retries = 3;  // attempts after the first
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;
  std::function<void(std::chrono::milliseconds)> sleep;  // default: real sleep
  std::function<std::int64_t()> clock_ms;               // default: system clock
};

// Sends the batch, retrying TransientFailure with exponential backoff
// (base_delay * multiplier^k). Every attempt is logged before returning.
// Throws ConfigError if the client is unconfigured, TransportError once
// retries are exhausted or on a non-transient failure.
std::string call_model(const PromptBatch& batch, ChatClient& client,
                       const std::string& model, const RetryPolicy& retry,
                       TranscriptLog& log);

// Calls every batch with at most `in_flight` concurrent requests. Results
// are indexed like `batches`.
std::vector<std::string> call_batches(const std::vector<PromptBatch>& batches,
                                      ChatClient& client,
                                      const std::string& model,
                                      const RetryPolicy& retry,
                                      TranscriptLog& log,
                                      std::size_t in_flight = 2);

// Serves responses recorded in a transcript, matched on request body.
// Unknown requests raise a non-transient error.
class ReplayClient : public ChatClient {
 public:
  explicit ReplayClient(const std::vector<TranscriptEntry>& entries);
  void check_configured() const override {}
  std::string send(const std::string& request_json) override;
  std::string endpoint() const override { return "replay"; }

 private:
  std::map<std::string, std::string> responses_;
};

// Calls a user function; for tests and fixtures.
class FunctionClient : public ChatClient {
 public:
  explicit FunctionClient(std::function<std::string(const std::string&)> fn)
      : fn_(std::move(fn)) {}
  void check_configured() const override {}
  std::string send(const std::string& request_json) override {
    return fn_(request_json);
  }
  std::string endpoint() const override { return "function"; }

 private:
  std::function<std::string(const std::string&)> fn_;
};

struct LLMResponseRecord {
  std::string id;
  std::string sentence;
  std::string raw_labels;
  std::set<std::string> parsed;
  LabelSet valid;
  std::set<std::string> hallucinated;
};

struct ParseReport {
  std::vector<std::string> missing_ids;      // expected but absent, sorted
  std::vector<std::string> duplicate_ids;    // later occurrences dropped
  std::vector<std::string> unexpected_ids;   // rows whose id was not asked for
  std::vector<std::size_t> malformed_lines;  // 1-based, after fence stripping
  std::size_t extra_column_rows = 0;         // rows with more than 3 fields
};

struct ParseResult {
  std::vector<LLMResponseRecord> records;  // in response order
  ParseReport report;
};

// Parses the CSV table the instruction asks for. Tolerates code fences,
// prose before/after the table, a header row, quoted fields with doubled
// quotes, and unquoted commas in the sentence column (the last field is
// taken as labels, flagged in extra_column_rows). Labels are split on
// commas, trimmed and lowercased, and matched exactly against the space.
// Never throws on content.
ParseResult parse_response(const std::string& raw,
                           const std::set<std::string>& expected_ids,
                           const LabelSpace& space);

struct ErrorTaxonomyReport {
  std::size_t n_evaluated = 0;
  std::size_t hallucination_examples = 0;  // >= 1 label outside the space
  std::size_t over_labelled = 0;           // |valid| > |gold|
  // Proxy: gold is exactly {neutral} and the valid prediction is nonempty and
  // lacks neutral.
  std::size_t over_interpretation = 0;
  MetricsReport metrics;  // on valid label sets only

  std::string to_json() const;
};

// Throws MissingGold for a record id absent from `gold`. Records with an
// empty valid set count as an empty prediction.
ErrorTaxonomyReport analyze(const std::vector<LLMResponseRecord>& records,
                            const std::map<std::string, LabelSet>& gold,
                            const LabelSpace& space);

}  // namespace emokit::llm
