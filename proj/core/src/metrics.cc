#include "emokit/metrics.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "emokit/error.h"

namespace emokit {
namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : double(num) / double(den);
}

double population_std(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= double(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / double(xs.size()));
}

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double total = 0.0;
  for (double x : xs) total += x;
  return total / double(xs.size());
}

double field_of(const PRF& prf, MetricField field) {
  switch (field) {
    case MetricField::kPrecision: return prf.precision;
    case MetricField::kRecall: return prf.recall;
    case MetricField::kF1: return prf.f1;
  }
  return prf.f1;
}

void fill_aggregates(MetricsReport& report) {
  std::vector<double> p, r, f;
  for (const auto& c : report.per_class) {
    p.push_back(c.precision);
    r.push_back(c.recall);
    f.push_back(c.f1);
  }
  report.macro = {mean(p), mean(r), mean(f)};
  report.std = {population_std(p), population_std(r), population_std(f)};
}

nlohmann::ordered_json prf_json(const PRF& prf) {
  return {{"precision", prf.precision}, {"recall", prf.recall}, {"f1", prf.f1}};
}

PRF prf_from(const nlohmann::json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(),
          j.at("f1").get<double>()};
}

}  // namespace

void ClassCounts::add(const LabelSet& gold, const LabelSet& pred) {
  for (std::size_t l : pred) {
    if (gold.count(l)) {
      ++true_positive.at(l);
    } else {
      ++false_positive.at(l);
    }
  }
  for (std::size_t l : gold) {
    if (!pred.count(l)) ++false_negative.at(l);
  }
}

void ClassCounts::merge(const ClassCounts& other) {
  for (std::size_t i = 0; i < true_positive.size(); ++i) {
    true_positive[i] += other.true_positive[i];
    false_positive[i] += other.false_positive[i];
    false_negative[i] += other.false_negative[i];
  }
}

PRF prf_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  PRF out;
  out.precision = ratio(tp, tp + fp);
  out.recall = ratio(tp, tp + fn);
  const double denom = out.precision + out.recall;
  out.f1 = denom == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / denom;
  return out;
}

MetricsReport score(const std::vector<LabelSet>& gold,
                    const std::vector<LabelSet>& pred, const LabelSpace& space) {
  if (gold.size() != pred.size()) {
    throw ShapeError("gold has " + std::to_string(gold.size()) +
                     " examples, pred has " + std::to_string(pred.size()));
  }
  if (gold.empty()) throw ShapeError("cannot score zero examples");
  ClassCounts counts(space.size());
  std::size_t exact = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (const LabelSet* s : {&gold[i], &pred[i]}) {
      if (!s->empty() && *s->rbegin() >= space.size()) {
        throw InvalidLabel("label index " + std::to_string(*s->rbegin()) +
                           " out of range for space '" + space.name() + "'");
      }
    }
    counts.add(gold[i], pred[i]);
    if (gold[i] == pred[i]) ++exact;
  }
  MetricsReport report{space, {}, {}, {}, {}, 0.0, gold.size()};
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t l = 0; l < space.size(); ++l) {
    report.per_class.push_back(prf_from_counts(counts.true_positive[l],
                                               counts.false_positive[l],
                                               counts.false_negative[l]));
    tp += counts.true_positive[l];
    fp += counts.false_positive[l];
    fn += counts.false_negative[l];
  }
  fill_aggregates(report);
  report.micro = prf_from_counts(tp, fp, fn);
  report.subset_accuracy = double(exact) / double(gold.size());
  return report;
}

MetricsReport report_from_rows(const LabelSpace& space,
                               const std::vector<PRF>& rows) {
  if (rows.size() != space.size()) {
    throw ShapeError("expected " + std::to_string(space.size()) +
                     " rows, got " + std::to_string(rows.size()));
  }
  MetricsReport report{space, rows, {}, {}, {}, 0.0, 0};
  fill_aggregates(report);
  return report;
}

void write_report_text(std::ostream& out, const MetricsReport& report) {
  std::size_t width = std::string("macro-average").size();
  for (const auto& l : report.space.labels()) width = std::max(width, l.size());
  auto row = [&](const std::string& name, const PRF& prf) {
    out << std::left << std::setw(int(width) + 2) << name << std::right
        << std::fixed << std::setprecision(4) << std::setw(10) << prf.precision
        << std::setw(10) << prf.recall << std::setw(10) << prf.f1 << '\n';
  };
  out << std::left << std::setw(int(width) + 2) << "label" << std::right
      << std::setw(10) << "precision" << std::setw(10) << "recall"
      << std::setw(10) << "f1" << '\n';
  for (std::size_t l = 0; l < report.per_class.size(); ++l) {
    row(report.space.label(l), report.per_class[l]);
  }
  row("macro-average", report.macro);
  row("std", report.std);
  row("micro-average", report.micro);
  out << std::left << std::setw(int(width) + 2) << "subset_accuracy"
      << std::right << std::setw(10) << std::fixed << std::setprecision(4)
      << report.subset_accuracy << '\n';
  out.unsetf(std::ios::floatfield);
}

std::string report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["space"] = report.space.name();
  j["labels"] = report.space.labels();
  j["examples"] = report.examples;
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (std::size_t l = 0; l < report.per_class.size(); ++l) {
    per_class[report.space.label(l)] = prf_json(report.per_class[l]);
  }
  j["per_class"] = per_class;
  j["macro"] = prf_json(report.macro);
  j["micro"] = prf_json(report.micro);
  j["std"] = prf_json(report.std);
  j["subset_accuracy"] = report.subset_accuracy;
  return j.dump(2);
}

MetricsReport report_from_json(const std::string& json) {
  const auto j = nlohmann::json::parse(json);
  LabelSpace space(j.at("space").get<std::string>(),
                   j.at("labels").get<std::vector<std::string>>());
  MetricsReport report{space, {}, {}, {}, {}, 0.0, 0};
  for (const auto& label : space.labels()) {
    report.per_class.push_back(prf_from(j.at("per_class").at(label)));
  }
  report.macro = prf_from(j.at("macro"));
  report.micro = prf_from(j.at("micro"));
  report.std = prf_from(j.at("std"));
  report.subset_accuracy = j.at("subset_accuracy").get<double>();
  report.examples = j.at("examples").get<std::size_t>();
  return report;
}

std::string_view to_string(MetricField field) {
  switch (field) {
    case MetricField::kPrecision: return "precision";
    case MetricField::kRecall: return "recall";
    case MetricField::kF1: return "f1";
  }
  return "f1";
}

MetricField parse_metric_field(std::string_view s) {
  if (s == "precision") return MetricField::kPrecision;
  if (s == "recall") return MetricField::kRecall;
  if (s == "f1") return MetricField::kF1;
  throw ConfigError("unknown metric '" + std::string(s) + "'");
}

ComparisonTable compare(
    const std::vector<std::pair<std::string, MetricsReport>>& reports,
    MetricField field) {
  if (reports.empty()) throw ConfigError("nothing to compare");
  const LabelSpace& space = reports.front().second.space;
  for (const auto& [name, r] : reports) {
    if (!(r.space == space)) {
      throw SpaceMismatch("report '" + name + "' uses space '" + r.space.name() +
                          "', expected '" + space.name() + "'");
    }
  }
  ComparisonTable table;
  table.field = field;
  for (const auto& [name, r] : reports) table.names.push_back(name);

  auto make_row = [&](std::string label, auto value_of, bool lower_is_better) {
    ComparisonRow row;
    row.label = std::move(label);
    for (const auto& [name, r] : reports) row.values.push_back(value_of(r));
    const double best = lower_is_better
                            ? *std::min_element(row.values.begin(), row.values.end())
                            : *std::max_element(row.values.begin(), row.values.end());
    for (double v : row.values) row.is_best.push_back(v == best);
    return row;
  };
  for (std::size_t l = 0; l < space.size(); ++l) {
    table.rows.push_back(make_row(
        space.label(l),
        [&](const MetricsReport& r) { return field_of(r.per_class[l], field); },
        false));
  }
  table.rows.push_back(make_row(
      "macro-average",
      [&](const MetricsReport& r) { return field_of(r.macro, field); }, false));
  table.rows.push_back(make_row(
      "std", [&](const MetricsReport& r) { return field_of(r.std, field); },
      true));
  return table;
}

void write_comparison(std::ostream& out, const ComparisonTable& table) {
  std::size_t width = 5;
  for (const auto& row : table.rows) width = std::max(width, row.label.size());
  std::size_t col = 8;
  for (const auto& n : table.names) col = std::max(col, n.size() + 2);
  out << "# " << to_string(table.field) << "; * marks the best value per row\n";
  out << std::left << std::setw(int(width) + 2) << "label";
  for (const auto& n : table.names) {
    out << std::right << std::setw(int(col)) << n;
  }
  out << '\n';
  for (const auto& row : table.rows) {
    out << std::left << std::setw(int(width) + 2) << row.label << std::right;
    for (std::size_t i = 0; i < row.values.size(); ++i) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(2) << row.values[i]
           << (row.is_best[i] ? "*" : " ");
      out << std::setw(int(col)) << cell.str();
    }
    out << '\n';
  }
}

}  // namespace emokit
