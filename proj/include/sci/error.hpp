#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sci {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument or violated precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed archive. Carries the byte offset and, when known, the block name
// whose record was being read.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset, std::string block = {})
      : Error(what + " (offset " + std::to_string(offset) +
              (block.empty() ? std::string() : ", block " + block) + ")"),
        offset_(offset),
        block_(std::move(block)) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::string& block() const noexcept { return block_; }

 private:
  std::size_t offset_;
  std::string block_;
};

// Block records that do not tile the volume, or do not fit its shape.
class StructureError : public Error {
 public:
  using Error::Error;
};

// The requested rate cannot be met.
class BudgetError : public Error {
 public:
  BudgetError(const std::string& what, double min_ratio)
      : Error(what), min_ratio_(min_ratio) {}
  double min_ratio() const noexcept { return min_ratio_; }

 private:
  double min_ratio_;
};

// Training diverged.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace sci
