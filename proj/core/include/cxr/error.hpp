#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace cxr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed tabular input (metadata CSV, embeddings CSV, JSON manifests).
/// `row()` is the 1-based data row index, when the failure is tied to a row.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what, std::optional<std::size_t> row = std::nullopt,
                      std::string column = {})
      : Error(what), row_(row), column_(std::move(column)) {}

  std::optional<std::size_t> row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::optional<std::size_t> row_;
  std::string column_;
};

/// PNG decoding failure; `offset()` is the number of input bytes consumed
/// when the decoder gave up.
class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        reason_(what),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
  std::size_t offset_;
};

/// Inference graph could not be read or executed.
class GraphLoadError : public Error {
 public:
  using Error::Error;
};

/// Inference graph declares tensors that disagree with the expected contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace cxr
