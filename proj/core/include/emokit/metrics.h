#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "emokit/taxonomy.h"

namespace emokit {

struct ClassCounts {
  std::vector<std::uint64_t> true_positive;
  std::vector<std::uint64_t> false_positive;
  std::vector<std::uint64_t> false_negative;

  explicit ClassCounts(std::size_t labels = 0)
      : true_positive(labels), false_positive(labels), false_negative(labels) {}

  void add(const LabelSet& gold, const LabelSet& pred);
  void merge(const ClassCounts& other);
};

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Zero denominators give 0.
PRF prf_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn);

struct MetricsReport {
  LabelSpace space;
  std::vector<PRF> per_class;  // indexed by label
  PRF macro;                   // unweighted mean over every class
  PRF micro;                   // pooled counts
  PRF std;                     // population std of each per-class column
  double subset_accuracy = 0.0;
  std::size_t examples = 0;
};

// Throws ShapeError when |gold| != |pred| or both are empty, InvalidLabel on
// indices outside the space.
MetricsReport score(const std::vector<LabelSet>& gold,
                    const std::vector<LabelSet>& pred, const LabelSpace& space);

// Builds a report from per-class P/R/F1 rows (e.g. published tables). Micro
// and subset accuracy are unknown and left at 0.
MetricsReport report_from_rows(const LabelSpace& space,
                               const std::vector<PRF>& rows);

// Aligned columns: label, precision, recall, f1, then macro/std/micro rows.
void write_report_text(std::ostream& out, const MetricsReport& report);

// Machine-readable JSON.
std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& json);

enum class MetricField { kPrecision, kRecall, kF1 };
std::string_view to_string(MetricField field);
MetricField parse_metric_field(std::string_view s);

struct ComparisonRow {
  std::string label;
  std::vector<double> values;  // one per report
  // Every report reaching the row maximum is flagged; for the std row the
  // minimum is flagged instead.
  std::vector<bool> is_best;
};

struct ComparisonTable {
  std::vector<std::string> names;
  MetricField field = MetricField::kF1;
  std::vector<ComparisonRow> rows;  // per class, then "macro-average", "std"
};

// Throws SpaceMismatch when the reports do not share a label space, ConfigError
// when the list is empty.
ComparisonTable compare(
    const std::vector<std::pair<std::string, MetricsReport>>& reports,
    MetricField field = MetricField::kF1);

void write_comparison(std::ostream& out, const ComparisonTable& table);

}  // namespace emokit
