#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "emokit/text.h"

namespace emokit::testing {

inline std::filesystem::path fixture_path(const std::string& name) {
  return std::filesystem::path(EMOKIT_FIXTURE_DIR) / name;
}

// Rows of a `label<TAB>v1<TAB>v2...` fixture; lines starting with '#' skipped.
inline std::vector<std::pair<std::string, std::vector<double>>> read_table(
    const std::string& name) {
  std::ifstream in(fixture_path(name));
  if (!in) throw std::runtime_error("missing fixture " + name);
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto fields = text::split(line, '\t');
    std::vector<double> values;
    for (std::size_t i = 1; i < fields.size(); ++i) values.push_back(std::stod(fields[i]));
    rows.emplace_back(fields[0], std::move(values));
  }
  return rows;
}

}  // namespace emokit::testing
