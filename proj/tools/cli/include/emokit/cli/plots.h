#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emokit/corpus.h"

namespace emokit::cli {

// Bars ordered by count (descending, ties in label order). Highlighted
// labels get class="bar highlighted"; every bar carries data-label.
void write_histogram_svg(const std::filesystem::path& path,
                         const DistributionStats& stats,
                         const LabelSet& highlighted, const std::string& title);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> error;  // optional symmetric error bars
};

void write_line_svg(const std::filesystem::path& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<Series>& series,
                    const std::vector<std::string>& x_ticks = {});

}  // namespace emokit::cli
