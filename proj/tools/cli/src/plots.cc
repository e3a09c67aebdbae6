#include "emokit/cli/plots.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "emokit/error.h"

namespace emokit::cli {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd",
                                    "#8c564b", "#e377c2"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << v;
  return out.str();
}

std::string tick_label(double v) {
  std::ostringstream out;
  if (std::fabs(v) >= 1000 || v == std::floor(v)) {
    out << std::fixed << std::setprecision(0) << v;
  } else {
    out << std::setprecision(3) << v;
  }
  return out.str();
}

void save(const std::filesystem::path& path, const std::string& svg) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << svg;
}

}  // namespace

void write_histogram_svg(const std::filesystem::path& path,
                         const DistributionStats& stats,
                         const LabelSet& highlighted, const std::string& title) {
  const std::size_t n = stats.per_label_count.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return stats.per_label_count[a] > stats.per_label_count[b];
  });
  const double max_count = n == 0 ? 1.0
                                  : std::max<double>(1.0, double(stats.per_label_count[order[0]]));

  const double left = 70, top = 40, plot_h = 320, bar_w = 22, gap = 6;
  const double plot_w = std::max(200.0, n * (bar_w + gap));
  const double width = left + plot_w + 30, height = top + plot_h + 130;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width)
      << "\" height=\"" << num(height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << num(width / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(title) << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = max_count * t / 4.0;
    const double y = top + plot_h - plot_h * t / 4.0;
    svg << "<line x1=\"" << num(left) << "\" x2=\"" << num(left + plot_w) << "\" y1=\""
        << num(y) << "\" y2=\"" << num(y) << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y + 4)
        << "\" text-anchor=\"end\">" << tick_label(std::round(v)) << "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = order[i];
    const double count = double(stats.per_label_count[label]);
    const double h = plot_h * count / max_count;
    const double x = left + gap / 2 + i * (bar_w + gap);
    const bool hot = highlighted.count(label) > 0;
    svg << "<rect class=\"bar" << (hot ? " highlighted" : "") << "\" data-label=\""
        << escape(stats.space.label(label)) << "\" data-count=\""
        << stats.per_label_count[label] << "\" x=\"" << num(x) << "\" y=\""
        << num(top + plot_h - h) << "\" width=\"" << num(bar_w) << "\" height=\""
        << num(h) << "\" fill=\"" << (hot ? "#d62728" : "#1f77b4") << "\"/>\n";
    const double lx = x + bar_w / 2, ly = top + plot_h + 10;
    svg << "<text x=\"" << num(lx) << "\" y=\"" << num(ly)
        << "\" text-anchor=\"end\" transform=\"rotate(-60 " << num(lx) << ' ' << num(ly)
        << ")\">" << escape(stats.space.label(label)) << "</text>\n";
  }
  svg << "<line x1=\"" << num(left) << "\" x2=\"" << num(left + plot_w) << "\" y1=\""
      << num(top + plot_h) << "\" y2=\"" << num(top + plot_h) << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << num(left) << "\" y=\"" << num(height - 8) << "\">std "
      << num(stats.std) << ", records " << stats.total_records << "</text>\n";
  svg << "</svg>\n";
  save(path, svg.str());
}

void write_line_svg(const std::filesystem::path& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<Series>& series,
                    const std::vector<std::string>& x_ticks) {
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      const double e = i < s.error.size() ? s.error[i] : 0.0;
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (first) {
        x_min = x_max = s.x[i];
        y_min = s.y[i] - e;
        y_max = s.y[i] + e;
        first = false;
      }
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min(y_min, s.y[i] - e);
      y_max = std::max(y_max, s.y[i] + e);
    }
  }
  if (x_max <= x_min) x_max = x_min + 1;
  if (y_max <= y_min) {
    y_max += 0.5;
    y_min -= 0.5;
  }
  const double pad = 0.05 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;

  const double left = 70, top = 40, plot_w = 520, plot_h = 300;
  const double width = left + plot_w + 150, height = top + plot_h + 60;
  auto px = [&](double x) { return left + plot_w * (x - x_min) / (x_max - x_min); };
  auto py = [&](double y) { return top + plot_h - plot_h * (y - y_min) / (y_max - y_min); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width)
      << "\" height=\"" << num(height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"22\" text-anchor=\"middle\" "
      << "font-size=\"14\">" << escape(title) << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = y_min + (y_max - y_min) * t / 4.0;
    svg << "<line x1=\"" << num(left) << "\" x2=\"" << num(left + plot_w) << "\" y1=\""
        << num(py(v)) << "\" y2=\"" << num(py(v)) << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(v) + 4)
        << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
  }
  if (!x_ticks.empty()) {
    for (std::size_t i = 0; i < x_ticks.size(); ++i) {
      svg << "<text x=\"" << num(px(double(i))) << "\" y=\"" << num(top + plot_h + 16)
          << "\" text-anchor=\"middle\">" << escape(x_ticks[i]) << "</text>\n";
    }
  } else {
    for (int t = 0; t <= 4; ++t) {
      const double v = x_min + (x_max - x_min) * t / 4.0;
      svg << "<text x=\"" << num(px(v)) << "\" y=\"" << num(top + plot_h + 16)
          << "\" text-anchor=\"middle\">" << tick_label(v) << "</text>\n";
    }
  }
  svg << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(plot_w)
      << "\" height=\"" << num(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"" << num(height - 10)
      << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << num(top + plot_h / 2) << "\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 16 " << num(top + plot_h / 2) << ")\">" << escape(y_label)
      << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    svg << "<polyline class=\"series\" data-name=\"" << escape(s.name)
        << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      svg << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
    }
    svg << "\"/>\n";
    for (std::size_t i = 0; i < s.error.size() && i < s.x.size(); ++i) {
      if (s.error[i] <= 0) continue;
      svg << "<line x1=\"" << num(px(s.x[i])) << "\" x2=\"" << num(px(s.x[i]))
          << "\" y1=\"" << num(py(s.y[i] - s.error[i])) << "\" y2=\""
          << num(py(s.y[i] + s.error[i])) << "\" stroke=\"" << color << "\"/>\n";
    }
    const double ly = top + 14 + 16 * double(k);
    svg << "<line x1=\"" << num(left + plot_w + 12) << "\" x2=\"" << num(left + plot_w + 32)
        << "\" y1=\"" << num(ly) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << num(left + plot_w + 36) << "\" y=\"" << num(ly + 4) << "\">"
        << escape(s.name) << "</text>\n";
  }
  svg << "</svg>\n";
  save(path, svg.str());
}

}  // namespace emokit::cli
