#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace emokit::text {

// Splits on ASCII whitespace; punctuation stays attached to its token.
std::vector<std::string> tokenize(std::string_view s);

std::string join(const std::vector<std::string>& tokens,
                 std::string_view sep = " ");

std::string_view trim(std::string_view s);

std::string to_lower(std::string_view s);

// Splits on a single-character delimiter, keeping empty fields.
std::vector<std::string> split(std::string_view s, char delim);

// Token with leading/trailing ASCII punctuation removed.
struct TokenCore {
  std::string prefix;
  std::string core;
  std::string suffix;
};
TokenCore split_core(std::string_view token);

}  // namespace emokit::text
