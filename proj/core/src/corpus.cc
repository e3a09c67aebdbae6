#include "emokit/corpus.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "emokit/error.h"
#include "emokit/rng.h"
#include "emokit/text.h"

namespace emokit {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split '" + std::string(s) + "'");
}

std::string_view to_string(AugmentMethod method) {
  switch (method) {
    case AugmentMethod::kDda: return "dda";
    case AugmentMethod::kContextual: return "contextual";
    case AugmentMethod::kParaphrase: return "paraphrase";
  }
  return "dda";
}

AugmentMethod parse_augment_method(std::string_view s) {
  if (s == "dda") return AugmentMethod::kDda;
  if (s == "contextual") return AugmentMethod::kContextual;
  if (s == "paraphrase") return AugmentMethod::kParaphrase;
  throw ConfigError("unknown augmentation method '" + std::string(s) + "'");
}

void Dataset::add(ExampleRecord record) {
  if (record.id.empty()) throw ShapeError("record with empty id");
  if (text::trim(record.text).empty()) {
    throw ShapeError("record " + record.id + " has empty text");
  }
  if (record.label_ids.empty()) {
    throw InvalidLabel("record " + record.id + " has no labels");
  }
  if (*record.label_ids.rbegin() >= space_.size()) {
    throw InvalidLabel("record " + record.id + ": label id " +
                       std::to_string(*record.label_ids.rbegin()) +
                       " out of range");
  }
  if (record.provenance.augmented) {
    auto parent = by_id_.find(record.provenance.parent_id);
    if (parent == by_id_.end() ||
        records_[parent->second].provenance.augmented) {
      throw ShapeError("augmented record " + record.id +
                       " does not point at an original record");
    }
  }
  if (!by_id_.emplace(record.id, records_.size()).second) {
    throw ShapeError("duplicate record id " + record.id);
  }
  records_.push_back(std::move(record));
}

bool Dataset::contains(const std::string& id) const {
  return by_id_.count(id) != 0;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out(space_, split_);
  for (std::size_t i : indices) {
    ExampleRecord r = records_.at(i);
    // A subset may drop the parent; keep the child as a standalone record.
    if (r.provenance.augmented && !out.contains(r.provenance.parent_id)) {
      r.provenance = Provenance::original();
    }
    out.add(std::move(r));
  }
  return out;
}

Dataset read_tsv(std::istream& in, const LabelSpace& space, Split split) {
  Dataset dataset(space, split);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line, '\t');
    if (fields.size() != 3) {
      throw ParseError("expected 3 tab-separated fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    ExampleRecord record;
    record.text = fields[0];
    record.id = std::string(text::trim(fields[2]));
    if (text::trim(record.text).empty()) throw ParseError("empty text", line_no);
    if (record.id.empty()) throw ParseError("empty source id", line_no);
    if (text::trim(fields[1]).empty()) throw ParseError("empty label field", line_no);
    for (const std::string& raw : text::split(fields[1], ',')) {
      const std::string_view t = text::trim(raw);
      std::size_t value = 0;
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
      if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
        throw ParseError("bad label id '" + raw + "'", line_no);
      }
      if (value >= space.size()) {
        throw InvalidLabel("label id " + std::to_string(value) +
                               " out of range for space '" + space.name() + "'",
                           line_no);
      }
      record.label_ids.insert(value);
    }
    if (dataset.contains(record.id)) {
      throw ParseError("duplicate id " + record.id, line_no);
    }
    dataset.add(std::move(record));
  }
  return dataset;
}

Dataset load_tsv(const std::filesystem::path& path, const LabelSpace& space,
                 Split split) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return read_tsv(in, space, split);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

void write_tsv(std::ostream& out, const Dataset& dataset) {
  for (const auto& r : dataset.records()) {
    out << r.text << '\t';
    bool first = true;
    for (std::size_t l : r.label_ids) {
      if (!first) out << ',';
      out << l;
      first = false;
    }
    out << '\t' << r.id << '\n';
  }
}

std::vector<std::uint8_t> to_multi_hot(const ExampleRecord& record,
                                       const LabelSpace& space) {
  std::vector<std::uint8_t> bits(space.size(), 0);
  for (std::size_t l : record.label_ids) bits.at(l) = 1;
  return bits;
}

LabelSet from_multi_hot(const std::vector<std::uint8_t>& bits) {
  LabelSet out;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out.insert(out.end(), i);
  }
  return out;
}

std::vector<std::size_t> DistributionStats::included_labels() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < included.size(); ++i) {
    if (included[i]) out.push_back(i);
  }
  return out;
}

DistributionStats distribution(const Dataset& dataset, bool include_neutral) {
  const LabelSpace& space = dataset.space();
  DistributionStats stats{space, std::vector<std::uint64_t>(space.size(), 0),
                          std::vector<bool>(space.size(), true),
                          dataset.size(), 0.0, include_neutral};
  if (!include_neutral) {
    if (auto n = space.neutral_index()) stats.included[*n] = false;
  }
  for (const auto& r : dataset.records()) {
    for (std::size_t l : r.label_ids) ++stats.per_label_count[l];
  }
  const auto labels = stats.included_labels();
  if (!labels.empty()) {
    double mean = 0.0;
    for (std::size_t l : labels) mean += double(stats.per_label_count[l]);
    mean /= double(labels.size());
    double ss = 0.0;
    for (std::size_t l : labels) {
      const double d = double(stats.per_label_count[l]) - mean;
      ss += d * d;
    }
    stats.std = std::sqrt(ss / double(labels.size()));
  }
  return stats;
}

void write_stats(std::ostream& out, const DistributionStats& stats) {
  for (std::size_t l : stats.included_labels()) {
    out << stats.space.label(l) << '\t' << stats.per_label_count[l] << '\n';
  }
  std::ostringstream v;
  v << std::fixed << std::setprecision(6) << stats.std;
  out << "std\t" << v.str() << '\n';
}

LabelSet minority_labels(const DistributionStats& stats, std::size_t k) {
  auto labels = stats.included_labels();
  if (k > labels.size()) {
    throw ConfigError("asked for " + std::to_string(k) +
                      " minority labels but only " +
                      std::to_string(labels.size()) + " are included");
  }
  std::stable_sort(labels.begin(), labels.end(),
                   [&](std::size_t a, std::size_t b) {
                     return stats.per_label_count[a] < stats.per_label_count[b];
                   });
  return LabelSet(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(k));
}

std::size_t SplitSize::resolve(std::size_t dataset_size) const {
  if (kind == Kind::kCount) {
    if (value < 1 || value != std::floor(value)) {
      throw SplitError("train size must be a positive integer");
    }
    const auto n = static_cast<std::size_t>(value);
    if (n >= dataset_size) {
      throw SplitError("train size " + std::to_string(n) +
                       " leaves no test examples in a dataset of " +
                       std::to_string(dataset_size));
    }
    return n;
  }
  if (!(value > 0.0 && value < 1.0)) {
    throw SplitError("train fraction must lie in (0, 1)");
  }
  const auto n = static_cast<std::size_t>(std::llround(value * double(dataset_size)));
  if (n == 0 || n >= dataset_size) {
    throw SplitError("train fraction " + to_string() + " of " +
                     std::to_string(dataset_size) +
                     " examples leaves an empty train or test part");
  }
  return n;
}

std::string SplitSize::to_string() const {
  if (kind == Kind::kCount) return std::to_string(static_cast<std::size_t>(value));
  std::ostringstream out;
  out << value;
  return out.str();
}

SplitSize SplitSize::parse(std::string_view s) {
  const std::string str(text::trim(s));
  if (str.empty()) throw SplitError("empty split size");
  try {
    std::size_t used = 0;
    if (str.find_first_of(".eE") != std::string::npos) {
      const double f = std::stod(str, &used);
      if (used != str.size()) throw SplitError("bad split size '" + str + "'");
      return fraction(f);
    }
    const long long n = std::stoll(str, &used);
    if (used != str.size() || n <= 0) throw SplitError("bad split size '" + str + "'");
    return count(static_cast<std::size_t>(n));
  } catch (const std::logic_error&) {
    throw SplitError("bad split size '" + str + "'");
  }
}

std::vector<Partition> random_splits(std::size_t dataset_size,
                                     const std::vector<SplitSize>& sizes,
                                     std::size_t repeats, std::uint64_t seed) {
  std::vector<std::size_t> train_sizes;
  for (const auto& s : sizes) train_sizes.push_back(s.resolve(dataset_size));

  std::vector<Partition> out;
  out.reserve(sizes.size() * repeats);
  std::vector<std::size_t> perm(dataset_size);
  for (std::size_t si = 0; si < sizes.size(); ++si) {
    for (std::size_t r = 0; r < repeats; ++r) {
      Rng rng(derive_seed(derive_seed(seed, si), r));
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      for (std::size_t i = dataset_size; i > 1; --i) {
        std::swap(perm[i - 1], perm[rng.next_below(i)]);
      }
      Partition p;
      p.size_index = si;
      p.repeat = r;
      const auto cut = perm.begin() + static_cast<std::ptrdiff_t>(train_sizes[si]);
      p.train.assign(perm.begin(), cut);
      p.test.assign(cut, perm.end());
      std::sort(p.train.begin(), p.train.end());
      std::sort(p.test.begin(), p.test.end());
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<Partition> random_splits(const Dataset& dataset,
                                     const std::vector<SplitSize>& sizes,
                                     std::size_t repeats, std::uint64_t seed) {
  return random_splits(dataset.size(), sizes, repeats, seed);
}

}  // namespace emokit
