#include "emokit/taxonomy.h"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "emokit/error.h"
#include "emokit/text.h"

namespace emokit {
namespace {

constexpr const char* kSpaceNames[] = {"goemotions", "ekman", "sentiment",
                                       "carer", "isear"};

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return in;
}

bool is_lowercase(const std::string& s) {
  return text::to_lower(s) == s;
}

}  // namespace

LabelSpace::LabelSpace(std::string name, std::vector<std::string> labels)
    : name_(std::move(name)), labels_(std::move(labels)) {
  if (labels_.empty()) throw ConfigError("label space '" + name_ + "' is empty");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const std::string& label = labels_[i];
    if (label.empty() || text::trim(label).size() != label.size()) {
      throw ConfigError("label space '" + name_ + "': blank or padded label at " +
                        std::to_string(i));
    }
    if (!is_lowercase(label)) {
      throw ConfigError("label space '" + name_ + "': label '" + label +
                        "' is not lowercase");
    }
    if (!index_.emplace(label, i).second) {
      throw ConfigError("label space '" + name_ + "': duplicate label '" +
                        label + "'");
    }
    if (label == "neutral") neutral_index_ = i;
  }
}

const std::string& LabelSpace::label(std::size_t index) const {
  if (index >= labels_.size()) {
    throw InvalidLabel("label index " + std::to_string(index) +
                       " out of range for space '" + name_ + "'");
  }
  return labels_[index];
}

std::optional<std::size_t> LabelSpace::find(std::string_view label) const {
  auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t LabelSpace::index_of(std::string_view label) const {
  if (auto i = find(label)) return *i;
  throw InvalidLabel("label '" + std::string(label) + "' not in space '" +
                     name_ + "'");
}

LabelSet LabelSpace::all() const {
  LabelSet out;
  for (std::size_t i = 0; i < labels_.size(); ++i) out.insert(out.end(), i);
  return out;
}

LabelSpace load_label_space(const std::filesystem::path& path,
                            std::string name) {
  std::ifstream in = open_input(path);
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    labels.emplace_back(t);
  }
  return LabelSpace(std::move(name), std::move(labels));
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("EMOKIT_DATA_DIR"); env && *env) {
    return env;
  }
#ifdef EMOKIT_INSTALL_DATA_DIR
  if (std::filesystem::exists(EMOKIT_INSTALL_DATA_DIR "/taxonomy")) {
    return EMOKIT_INSTALL_DATA_DIR;
  }
#endif
#ifdef EMOKIT_SOURCE_DATA_DIR
  return EMOKIT_SOURCE_DATA_DIR;
#else
  throw ConfigError("EMOKIT_DATA_DIR is not set");
#endif
}

std::vector<std::string> builtin_space_names() {
  return {std::begin(kSpaceNames), std::end(kSpaceNames)};
}

LabelSpace builtin_space(std::string_view name) {
  for (const char* known : kSpaceNames) {
    if (name == known) {
      return load_label_space(
          data_dir() / "taxonomy" / (std::string(name) + ".labels"),
          std::string(name));
    }
  }
  throw UnknownTaxonomy(std::string(name));
}

LabelMapping load_mapping(const std::filesystem::path& path,
                          const LabelSpace& source, const LabelSpace& target) {
  std::ifstream in = open_input(path);
  LabelMapping mapping{source, target, {}};
  mapping.assignment.assign(source.size(), std::nullopt);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = text::split(t, '\t');
    if (fields.size() != 2) {
      throw ParseError("expected source<TAB>target", line_no);
    }
    const auto s = source.find(text::trim(fields[0]));
    if (!s) throw InvalidLabel("unknown source label '" + fields[0] + "'", line_no);
    const auto d = target.find(text::trim(fields[1]));
    if (!d) throw InvalidLabel("unknown target label '" + fields[1] + "'", line_no);
    if (mapping.assignment[*s]) {
      throw ParseError("source label '" + fields[0] + "' assigned twice", line_no);
    }
    mapping.assignment[*s] = *d;
  }
  return mapping;
}

LabelMapping builtin_mapping(std::string_view source, std::string_view target) {
  const LabelSpace src = builtin_space(source);
  const LabelSpace dst = builtin_space(target);
  const auto path = data_dir() / "taxonomy" /
                    (std::string(source) + "-" + std::string(target) + ".tsv");
  if (!std::filesystem::exists(path)) {
    throw UnknownTaxonomy("mapping " + std::string(source) + "->" +
                          std::string(target));
  }
  return load_mapping(path, src, dst);
}

LabelSet project_labels(const LabelSet& labels, const LabelMapping& mapping) {
  LabelSet out;
  for (std::size_t i : labels) {
    if (i >= mapping.assignment.size()) {
      throw InvalidLabel("label index " + std::to_string(i) +
                         " out of range for space '" + mapping.source.name() +
                         "'");
    }
    const auto& target = mapping.assignment[i];
    if (!target) {
      throw InvalidLabel("label '" + mapping.source.label(i) +
                         "' has no assignment");
    }
    out.insert(*target);
  }
  return out;
}

MappingReport validate_mapping(const LabelMapping& mapping) {
  using Kind = MappingViolation::Kind;
  MappingReport report;
  if (mapping.assignment.size() != mapping.source.size()) {
    report.violations.push_back(
        {Kind::kShape, "",
         "assignment has " + std::to_string(mapping.assignment.size()) +
             " entries for " + std::to_string(mapping.source.size()) +
             " source labels"});
  }
  std::vector<bool> hit(mapping.target.size(), false);
  for (std::size_t i = 0; i < mapping.source.size(); ++i) {
    const std::string& label = mapping.source.label(i);
    if (i >= mapping.assignment.size() || !mapping.assignment[i]) {
      report.violations.push_back({Kind::kNotTotal, label, "unassigned"});
      continue;
    }
    const std::size_t t = *mapping.assignment[i];
    if (t >= mapping.target.size()) {
      report.violations.push_back(
          {Kind::kNotTotal, label, "target index out of range"});
      continue;
    }
    hit[t] = true;
  }
  for (std::size_t t = 0; t < hit.size(); ++t) {
    if (!hit[t]) {
      report.violations.push_back(
          {Kind::kNotSurjective, mapping.target.label(t), "no source label"});
    }
  }
  const auto sn = mapping.source.neutral_index();
  const auto tn = mapping.target.neutral_index();
  if (sn && tn && *sn < mapping.assignment.size()) {
    const auto& t = mapping.assignment[*sn];
    if (t && *t != *tn) {
      report.violations.push_back(
          {Kind::kNeutralNotPreserved, "neutral",
           "mapped to '" + mapping.target.label(*t) + "'"});
    }
  }
  return report;
}

std::string MappingReport::to_string() const {
  std::ostringstream out;
  for (const auto& v : violations) {
    switch (v.kind) {
      case MappingViolation::Kind::kNotTotal: out << "not-total"; break;
      case MappingViolation::Kind::kNotSurjective: out << "not-surjective"; break;
      case MappingViolation::Kind::kNeutralNotPreserved: out << "neutral-not-preserved"; break;
      case MappingViolation::Kind::kShape: out << "shape"; break;
    }
    out << '\t' << v.label << '\t' << v.detail << '\n';
  }
  return out.str();
}

}  // namespace emokit
