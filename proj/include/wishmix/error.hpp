#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wishmix {

enum class ErrorKind {
  DimensionMismatch,
  NotPositiveDefinite,
  NotSymmetric,
  DomainError,
  AllMinusInfinity,
  MissingCovariates,
  ConfigError,
  DegenerateData,
  TooShort,
  RankDeficientDesign,
  EmptyComponent,
  AllRestartsFailed,
  ChainTooShort,
  UnknownDesign,
  LengthMismatch,
  NoItemsRetained,
  MalformedTable,
  MalformedDataset,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it to an exit code without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace wishmix
