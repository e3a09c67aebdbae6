#include "emokit/llmeval.h"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "emokit/text.h"

namespace emokit::llm {

const char* const kInstruction =
    "I want see your performance in emotion detection task. The setting aligns "
    "with the GoEmotions paper with title of \"GoEmotions: A Dataset for "
    "Fine-Grained Emotion Classification\". There are in total 28 categories "
    "as emotion labels and every data entry can have one or more of the 28 "
    "categories. I will give you a number of sentences that may or may not "
    "contain certain emotions inside, and your job is to label the input "
    "sentences with the given 28 categories like the setting of GoEmotions "
    "paper. Please organize the labels into a string of words with comma as "
    "separator. The output should be a csv table with 3 columns where every "
    "row contains the id, the given sentence, and your label.";

std::string render_prompt(const std::vector<PromptRecord>& records) {
  std::string out = kInstruction;
  out += "\n\n";
  for (const auto& r : records) {
    out += r.id;
    out += ". ";
    out += r.sentence;
    out += '\n';
  }
  return out;
}

std::vector<PromptBatch> build_batches(const std::vector<PromptRecord>& records,
                                       std::size_t batch_limit) {
  if (batch_limit == 0) throw ConfigError("batch limit must be at least 1");
  std::vector<PromptBatch> out;
  for (std::size_t start = 0; start < records.size(); start += batch_limit) {
    PromptBatch b;
    b.batch_id = static_cast<long>(out.size());
    const std::size_t end = std::min(records.size(), start + batch_limit);
    b.records.assign(records.begin() + static_cast<std::ptrdiff_t>(start),
                     records.begin() + static_cast<std::ptrdiff_t>(end));
    b.rendered_prompt = render_prompt(b.records);
    out.push_back(std::move(b));
  }
  return out;
}

std::string build_request(const PromptBatch& batch, const std::string& model) {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["messages"] = nlohmann::ordered_json::array(
      {{{"role", "user"}, {"content", batch.rendered_prompt}}});
  return j.dump();
}

std::string TranscriptEntry::to_json_line() const {
  nlohmann::ordered_json j;
  j["batch_id"] = batch_id;
  j["attempt"] = attempt;
  j["endpoint"] = endpoint;
  j["request"] = request;
  j["response"] = response;
  j["error"] = error;
  j["started_ms"] = started_ms;
  j["finished_ms"] = finished_ms;
  return j.dump();
}

TranscriptEntry TranscriptEntry::from_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  TranscriptEntry e;
  e.batch_id = j.at("batch_id").get<long>();
  e.attempt = j.at("attempt").get<int>();
  e.endpoint = j.value("endpoint", "");
  e.request = j.at("request").get<std::string>();
  e.response = j.at("response").get<std::string>();
  e.error = j.value("error", "");
  e.started_ms = j.value("started_ms", std::int64_t{0});
  e.finished_ms = j.value("finished_ms", std::int64_t{0});
  return e;
}

TranscriptLog::TranscriptLog(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream touch(path, std::ios::app);
  if (!touch) throw ConfigError("cannot write transcript " + path.string());
}

void TranscriptLog::append(const TranscriptEntry& entry) {
  std::lock_guard lock(mutex_);
  entries_.push_back(entry);
  if (path_) {
    std::ofstream out(*path_, std::ios::app | std::ios::binary);
    out << entry.to_json_line() << '\n';
  }
}

std::vector<TranscriptEntry> TranscriptLog::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::vector<TranscriptEntry> TranscriptLog::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open transcript " + path.string());
  std::vector<TranscriptEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(TranscriptEntry::from_json_line(line));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("transcript: ") + e.what(), line_no);
    }
  }
  return out;
}

std::string call_model(const PromptBatch& batch, ChatClient& client,
                       const std::string& model, const RetryPolicy& retry,
                       TranscriptLog& log) {
  client.check_configured();
  const std::string request = build_request(batch, model);
  auto now = [&]() -> std::int64_t {
    if (retry.clock_ms) return retry.clock_ms();
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
  const int retries = std::max(0, retry.retries);
  for (int attempt = 0;; ++attempt) {
    TranscriptEntry entry;
    entry.batch_id = batch.batch_id;
    entry.attempt = attempt;
    entry.endpoint = client.endpoint();
    entry.request = request;
    entry.started_ms = now();
    try {
      entry.response = client.send(request);
      entry.finished_ms = now();
      log.append(entry);
      return entry.response;
    } catch (const TransientFailure& e) {
      entry.error = e.what();
      entry.finished_ms = now();
      log.append(entry);
      if (attempt >= retries) {
        throw TransportError("retries exhausted after " +
                                 std::to_string(attempt + 1) +
                                 " attempts: " + e.what(),
                             batch.batch_id);
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      entry.error = e.what();
      entry.finished_ms = now();
      log.append(entry);
      throw TransportError(e.what(), batch.batch_id);
    }
    const auto delay = std::chrono::milliseconds(static_cast<std::int64_t>(
        double(retry.base_delay.count()) * std::pow(retry.multiplier, attempt)));
    if (retry.sleep) {
      retry.sleep(delay);
    } else {
      std::this_thread::sleep_for(delay);
    }
  }
}

std::vector<std::string> call_batches(const std::vector<PromptBatch>& batches,
                                      ChatClient& client,
                                      const std::string& model,
                                      const RetryPolicy& retry,
                                      TranscriptLog& log, std::size_t in_flight) {
  client.check_configured();
  std::vector<std::string> out(batches.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= batches.size()) return;
      try {
        out[i] = call_model(batches[i], client, model, retry, log);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(batches.size());
      }
    }
  };
  const std::size_t workers =
      std::max<std::size_t>(1, std::min(in_flight, batches.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

ReplayClient::ReplayClient(const std::vector<TranscriptEntry>& entries) {
  for (const auto& e : entries) {
    if (e.error.empty()) responses_.emplace(e.request, e.response);
  }
}

std::string ReplayClient::send(const std::string& request_json) {
  auto it = responses_.find(request_json);
  if (it == responses_.end()) {
    throw std::runtime_error("request not present in transcript");
  }
  return it->second;
}

namespace {

struct CsvRow {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

// Body of the first fenced block if there is one, else the whole text.
std::vector<std::string> strip_fences(const std::string& raw) {
  std::vector<std::string> lines;
  {
    std::string line;
    std::istringstream in(raw);
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
  }
  std::size_t open = lines.size();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).starts_with("```")) {
      open = i;
      break;
    }
  }
  if (open == lines.size()) return lines;
  std::size_t close = lines.size();
  for (std::size_t i = open + 1; i < lines.size(); ++i) {
    if (text::trim(lines[i]).starts_with("```")) {
      close = i;
      break;
    }
  }
  return {lines.begin() + static_cast<std::ptrdiff_t>(open + 1),
          lines.begin() + static_cast<std::ptrdiff_t>(close)};
}

// RFC 4180-style reader: quoted fields may contain commas, doubled quotes
// and newlines. An unterminated quote runs to the end of the input.
std::vector<CsvRow> read_csv(const std::vector<std::string>& lines) {
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::string& line = lines[li];
    if (!quoted) {
      row = {};
      row.line = li + 1;
      field.clear();
      field_started = false;
    } else {
      field += '\n';
    }
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field += '"';
            ++i;
          } else {
            quoted = false;
          }
        } else {
          field += c;
        }
      } else if (c == '"' && text::trim(field).empty()) {
        field.clear();
        quoted = true;
        field_started = true;
      } else if (c == ',') {
        row.fields.push_back(field);
        field.clear();
        field_started = false;
      } else {
        field += c;
        field_started = true;
      }
    }
    if (!quoted) {
      if (field_started || !field.empty() || !row.fields.empty()) {
        row.fields.push_back(field);
      }
      rows.push_back(std::move(row));
    }
  }
  if (quoted) {
    row.fields.push_back(field);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string normalize_id(std::string_view raw) {
  std::string_view t = text::trim(raw);
  while (!t.empty() && (t.front() == '"' || t.front() == '#')) t.remove_prefix(1);
  while (!t.empty() && (t.back() == '"' || t.back() == '.' || t.back() == ':')) {
    t.remove_suffix(1);
  }
  return std::string(text::trim(t));
}

bool label_like(const std::string& field, const LabelSpace& space) {
  const std::string t = text::to_lower(text::trim(field));
  if (t.empty()) return false;
  if (space.find(t)) return true;
  if (t.size() > 24) return false;
  return std::all_of(t.begin(), t.end(), [](char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  });
}

}  // namespace

ParseResult parse_response(const std::string& raw,
                           const std::set<std::string>& expected_ids,
                           const LabelSpace& space) {
  ParseResult result;
  std::set<std::string> seen;
  std::set<std::string> duplicates;
  for (auto& row : read_csv(strip_fences(raw))) {
    auto& f = row.fields;
    if (f.empty() ||
        std::all_of(f.begin(), f.end(),
                    [](const std::string& s) { return text::trim(s).empty(); })) {
      continue;
    }
    const std::string id = normalize_id(f[0]);
    if (text::to_lower(id) == "id") continue;  // header row
    if (f.size() < 3) {
      result.report.malformed_lines.push_back(row.line);
      continue;
    }
    if (!expected_ids.count(id)) {
      result.report.unexpected_ids.push_back(id);
      continue;
    }
    if (!seen.insert(id).second) {
      duplicates.insert(id);
      continue;
    }

    // With extra columns, labels are the longest label-like suffix, keeping
    // at least one field for the sentence.
    std::size_t label_start = 2;
    if (f.size() > 3) {
      ++result.report.extra_column_rows;
      label_start = f.size() - 1;
      while (label_start > 2 && label_like(f[label_start - 1], space)) --label_start;
    }
    LLMResponseRecord record;
    record.id = id;
    std::vector<std::string> sentence(f.begin() + 1,
                                      f.begin() + static_cast<std::ptrdiff_t>(label_start));
    record.sentence = std::string(text::trim(text::join(sentence, ",")));
    std::vector<std::string> label_fields(
        f.begin() + static_cast<std::ptrdiff_t>(label_start), f.end());
    record.raw_labels = std::string(text::trim(text::join(label_fields, ",")));
    for (const auto& piece : text::split(record.raw_labels, ',')) {
      std::string label = text::to_lower(text::trim(piece));
      while (!label.empty() && (label.front() == '"' || label.front() == '\'')) label.erase(0, 1);
      while (!label.empty() && (label.back() == '"' || label.back() == '\'')) label.pop_back();
      label = std::string(text::trim(label));
      if (label.empty()) continue;
      record.parsed.insert(label);
      if (auto index = space.find(label)) {
        record.valid.insert(*index);
      } else {
        record.hallucinated.insert(label);
      }
    }
    result.records.push_back(std::move(record));
  }
  result.report.duplicate_ids.assign(duplicates.begin(), duplicates.end());
  for (const auto& id : expected_ids) {
    if (!seen.count(id)) result.report.missing_ids.push_back(id);
  }
  return result;
}

std::string ErrorTaxonomyReport::to_json() const {
  nlohmann::ordered_json j;
  j["n_evaluated"] = n_evaluated;
  j["hallucination_examples"] = hallucination_examples;
  j["over_labelled"] = over_labelled;
  j["over_interpretation"] = over_interpretation;
  j["definitions"] = {
      {"hallucination_examples", "records with at least one label outside the space"},
      {"over_labelled", "records with more valid predicted labels than gold labels"},
      {"over_interpretation",
       "proxy: gold is exactly {neutral} and the valid prediction is nonempty "
       "and lacks neutral"},
      {"metrics", "computed on valid labels only; hallucinated labels ignored"}};
  j["metrics"] = nlohmann::ordered_json::parse(report_to_json(metrics));
  return j.dump(2);
}

ErrorTaxonomyReport analyze(const std::vector<LLMResponseRecord>& records,
                            const std::map<std::string, LabelSet>& gold,
                            const LabelSpace& space) {
  std::size_t hallucination = 0;
  std::size_t over_labelled = 0;
  std::size_t over_interpretation = 0;
  std::vector<LabelSet> gold_sets;
  std::vector<LabelSet> pred_sets;
  const auto neutral = space.neutral_index();
  for (const auto& r : records) {
    auto it = gold.find(r.id);
    if (it == gold.end()) throw MissingGold(r.id);
    const LabelSet& g = it->second;
    if (!r.hallucinated.empty()) ++hallucination;
    if (r.valid.size() > g.size()) ++over_labelled;
    if (neutral && g == LabelSet{*neutral} && !r.valid.empty() &&
        !r.valid.count(*neutral)) {
      ++over_interpretation;
    }
    gold_sets.push_back(g);
    pred_sets.push_back(r.valid);
  }
  return ErrorTaxonomyReport{
      records.size(), hallucination, over_labelled, over_interpretation,
      records.empty() ? report_from_rows(space, std::vector<PRF>(space.size()))
                      : score(gold_sets, pred_sets, space)};
}

}  // namespace emokit::llm
