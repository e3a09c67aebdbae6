#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "emokit/taxonomy.h"

namespace emokit {

enum class Split { kTrain, kDev, kTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view s);

enum class AugmentMethod { kDda, kContextual, kParaphrase };

std::string_view to_string(AugmentMethod method);
AugmentMethod parse_augment_method(std::string_view s);

struct Provenance {
  bool augmented = false;
  AugmentMethod method = AugmentMethod::kDda;  // meaningful when augmented
  std::string parent_id;                       // empty for originals
  std::vector<std::string> flags;              // e.g. "identity", "degenerate"

  static Provenance original() { return {}; }
};

struct ExampleRecord {
  std::string id;
  std::string text;
  LabelSet label_ids;
  Provenance provenance;
};

class Dataset {
 public:
  Dataset(LabelSpace space, Split split) : space_(std::move(space)), split_(split) {}

  const LabelSpace& space() const noexcept { return space_; }
  Split split() const noexcept { return split_; }
  const std::vector<ExampleRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const ExampleRecord& operator[](std::size_t i) const { return records_[i]; }

  // Validates the record against the space and the dataset's invariants
  // (nonempty trimmed text, nonempty in-range labels, unique id, augmented
  // records point at an original already present). Throws on violation.
  void add(ExampleRecord record);

  bool contains(const std::string& id) const;

  // Dataset restricted to the given record positions, in the given order.
  Dataset subset(const std::vector<std::size_t>& indices) const;

 private:
  LabelSpace space_;
  Split split_;
  std::vector<ExampleRecord> records_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
};

// Each line: text<TAB>comma-separated label ids<TAB>source id. Blank lines
// are skipped. Malformed lines raise ParseError, out-of-range ids
// InvalidLabel, both with the line number.
Dataset load_tsv(const std::filesystem::path& path, const LabelSpace& space,
                 Split split);
Dataset read_tsv(std::istream& in, const LabelSpace& space, Split split);

// Writes the same three-column format load_tsv reads.
void write_tsv(std::ostream& out, const Dataset& dataset);

std::vector<std::uint8_t> to_multi_hot(const ExampleRecord& record,
                                       const LabelSpace& space);
LabelSet from_multi_hot(const std::vector<std::uint8_t>& bits);

struct DistributionStats {
  LabelSpace space;
  std::vector<std::uint64_t> per_label_count;  // indexed by label, all labels
  std::vector<bool> included;                  // labels entering std
  std::uint64_t total_records = 0;
  double std = 0.0;  // population std over included counts
  bool include_neutral = false;

  std::vector<std::size_t> included_labels() const;
};

// Counts a k-label record once toward each of its labels. Neutral is left out
// of the std unless include_neutral is set.
DistributionStats distribution(const Dataset& dataset,
                               bool include_neutral = false);

// `label<TAB>count` lines followed by a `std<TAB>value` footer.
void write_stats(std::ostream& out, const DistributionStats& stats);

// The k included labels with the smallest counts; ties go to the earlier
// label. Throws ConfigError when k exceeds the number of included labels.
LabelSet minority_labels(const DistributionStats& stats, std::size_t k);

// Absolute training-set size or a fraction of the dataset.
struct SplitSize {
  enum class Kind { kCount, kFraction };
  Kind kind = Kind::kCount;
  double value = 0.0;

  static SplitSize count(std::size_t n) { return {Kind::kCount, double(n)}; }
  static SplitSize fraction(double f) { return {Kind::kFraction, f}; }

  std::size_t resolve(std::size_t dataset_size) const;
  std::string to_string() const;
  static SplitSize parse(std::string_view s);
};

struct Partition {
  std::size_t size_index = 0;  // position in the requested sizes list
  std::size_t repeat = 0;
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

// For each size, `repeats` seeded random train/test partitions of
// [0, dataset_size). Ordered by size, then repeat.
std::vector<Partition> random_splits(const Dataset& dataset,
                                     const std::vector<SplitSize>& sizes,
                                     std::size_t repeats, std::uint64_t seed);
std::vector<Partition> random_splits(std::size_t dataset_size,
                                     const std::vector<SplitSize>& sizes,
                                     std::size_t repeats, std::uint64_t seed);

}  // namespace emokit
