#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace emokit {

// Coarse error classes; the CLI maps each to a distinct exit status.
enum class ErrorCategory {
  kUsage,
  kConfig,
  kData,
  kBackend,
  kTransport,
  kInternal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class UnknownTaxonomy : public Error {
 public:
  explicit UnknownTaxonomy(const std::string& name)
      : Error(ErrorCategory::kConfig, "unknown taxonomy: " + name) {}
};

// A label index or name that is not part of the label space in use. When the
// error comes from a file, `line()` carries the 1-based line number.
class InvalidLabel : public Error {
 public:
  explicit InvalidLabel(const std::string& what,
                        std::optional<std::size_t> line = std::nullopt)
      : Error(ErrorCategory::kData,
              line ? what + " (line " + std::to_string(*line) + ")" : what),
        line_(line) {}

  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  std::optional<std::size_t> line_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(ErrorCategory::kData,
              what + " (line " + std::to_string(line) + ")"),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SplitError : public Error {
 public:
  explicit SplitError(const std::string& what)
      : Error(ErrorCategory::kConfig, what) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what)
      : Error(ErrorCategory::kUsage, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorCategory::kConfig, what) {}
};

class SpaceMismatch : public Error {
 public:
  explicit SpaceMismatch(const std::string& what)
      : Error(ErrorCategory::kConfig, what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what)
      : Error(ErrorCategory::kData, what) {}
};

class BackendError : public Error {
 public:
  BackendError(const std::string& what, std::string record_id = {})
      : Error(ErrorCategory::kBackend,
              record_id.empty() ? what : what + " [record " + record_id + "]"),
        record_id_(std::move(record_id)) {}

  const std::string& record_id() const noexcept { return record_id_; }

 private:
  std::string record_id_;
};

class TransportError : public Error {
 public:
  TransportError(const std::string& what, long batch_id)
      : Error(ErrorCategory::kTransport,
              what + " [batch " + std::to_string(batch_id) + "]"),
        batch_id_(batch_id) {}

  long batch_id() const noexcept { return batch_id_; }

 private:
  long batch_id_;
};

class MissingGold : public Error {
 public:
  explicit MissingGold(const std::string& id)
      : Error(ErrorCategory::kData, "no gold labels for id " + id), id_(id) {}

  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

}  // namespace emokit
