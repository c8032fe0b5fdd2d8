#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oodshape {

// Three error families map onto the CLI exit codes (2 config, 3 data, 4 numerical).
enum class ErrorCategory { Config, Data, Numerical };

class Error : public std::runtime_error {
public:
  Error(ErrorCategory category, const std::string &what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

private:
  ErrorCategory category_;
};

#define OODSHAPE_DEFINE_ERROR(Name, Category)                                  \
  class Name : public Error {                                                  \
  public:                                                                      \
    explicit Name(const std::string &what)                                     \
        : Error(ErrorCategory::Category, #Name ": " + what) {}                 \
  };

OODSHAPE_DEFINE_ERROR(ConfigError, Config)
OODSHAPE_DEFINE_ERROR(InvalidArgument, Config)
OODSHAPE_DEFINE_ERROR(InvalidMethod, Config)
OODSHAPE_DEFINE_ERROR(InvalidPercentile, Config)
OODSHAPE_DEFINE_ERROR(NotElementwise, Config)

OODSHAPE_DEFINE_ERROR(IoFailure, Data)
OODSHAPE_DEFINE_ERROR(UnsupportedFormat, Data)
OODSHAPE_DEFINE_ERROR(RankMismatch, Data)
OODSHAPE_DEFINE_ERROR(LengthMismatch, Data)
OODSHAPE_DEFINE_ERROR(EmptyInput, Data)

OODSHAPE_DEFINE_ERROR(DegeneratePartition, Numerical)
OODSHAPE_DEFINE_ERROR(EmptyKeepSet, Numerical)
OODSHAPE_DEFINE_ERROR(ZeroExpectation, Numerical)
OODSHAPE_DEFINE_ERROR(NonFiniteScore, Numerical)

#undef OODSHAPE_DEFINE_ERROR

class NonFiniteValue : public Error {
public:
  explicit NonFiniteValue(std::size_t index)
      : Error(ErrorCategory::Data,
              "NonFiniteValue: NaN or Inf at flat index " + std::to_string(index)),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

private:
  std::size_t index_;
};

} // namespace oodshape
