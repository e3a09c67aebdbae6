#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace emokit {

// Indices into a LabelSpace.
using LabelSet = std::set<std::size_t>;

// An ordered emotion taxonomy. Label order is canonical: multi-hot vectors,
// head rows and metric tables all index labels by position.
class LabelSpace {
 public:
  // Throws ConfigError if labels are empty, duplicated or not lowercase.
  LabelSpace(std::string name, std::vector<std::string> labels);

  const std::string& name() const noexcept { return name_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& label(std::size_t index) const;

  // Index of the literal label "neutral", if present.
  std::optional<std::size_t> neutral_index() const noexcept {
    return neutral_index_;
  }

  std::optional<std::size_t> find(std::string_view label) const;

  // Throws InvalidLabel on unknown names.
  std::size_t index_of(std::string_view label) const;

  LabelSet all() const;

  friend bool operator==(const LabelSpace& a, const LabelSpace& b) {
    return a.name_ == b.name_ && a.labels_ == b.labels_;
  }

 private:
  std::string name_;
  std::vector<std::string> labels_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::optional<std::size_t> neutral_index_;
};

// Reads one label per line; blank lines and '#' comments are skipped.
LabelSpace load_label_space(const std::filesystem::path& path,
                            std::string name);

// Root of the packaged data files. Resolution order: $EMOKIT_DATA_DIR, the
// install prefix, the source tree.
std::filesystem::path data_dir();

// Canonical spaces: goemotions, ekman, sentiment, carer, isear.
// Throws UnknownTaxonomy for anything else.
LabelSpace builtin_space(std::string_view name);

std::vector<std::string> builtin_space_names();

// A source-label -> target-label assignment. Construction does not require
// validity; run validate_mapping() before trusting it.
struct LabelMapping {
  LabelSpace source;
  LabelSpace target;
  // assignment[i] is the target index for source label i, or nullopt.
  std::vector<std::optional<std::size_t>> assignment;
};

// Reads `source_label<TAB>target_label` lines. Unknown label names raise
// InvalidLabel with the line number; a source label given twice raises
// ParseError.
LabelMapping load_mapping(const std::filesystem::path& path,
                          const LabelSpace& source, const LabelSpace& target);

// Packaged mappings: goemotions->ekman, goemotions->sentiment,
// ekman->sentiment.
LabelMapping builtin_mapping(std::string_view source, std::string_view target);

// Image of `labels` under the mapping. Throws InvalidLabel for an index
// outside the source space or a source label the mapping leaves unassigned.
LabelSet project_labels(const LabelSet& labels, const LabelMapping& mapping);

struct MappingViolation {
  enum class Kind { kNotTotal, kNotSurjective, kNeutralNotPreserved, kShape };
  Kind kind;
  std::string label;
  std::string detail;
};

struct MappingReport {
  std::vector<MappingViolation> violations;
  bool ok() const noexcept { return violations.empty(); }
  std::string to_string() const;
};

MappingReport validate_mapping(const LabelMapping& mapping);

}  // namespace emokit
