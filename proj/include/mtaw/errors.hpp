#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace mtaw {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible with the requested operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A softmax row had every entry masked out.
class DegenerateRowError : public Error {
 public:
  using Error::Error;
};

/// A row norm fell below the normalization floor.
class NormalizationError : public Error {
 public:
  using Error::Error;
};

/// A tensor contained NaN or Inf where finite values are required.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data. Carries the 1-based line number
/// when the problem is tied to a text line.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what, std::optional<std::size_t> line = std::nullopt)
      : Error(line ? what + " (line " + std::to_string(*line) + ")" : what), line_(line) {}

  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  std::optional<std::size_t> line_;
};

/// Training produced a non-finite loss.
class NumericDivergence : public Error {
 public:
  NumericDivergence(std::size_t batch_index, double loss)
      : Error("non-finite loss " + std::to_string(loss) + " at batch " +
              std::to_string(batch_index)),
        batch_index_(batch_index),
        loss_(loss) {}

  std::size_t batch_index() const noexcept { return batch_index_; }
  double loss() const noexcept { return loss_; }

 private:
  std::size_t batch_index_;
  double loss_;
};

class CheckpointError : public Error {
 public:
  enum class Kind { kIo, kCorrupt, kChecksum, kVersion, kShapeMismatch };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace mtaw
