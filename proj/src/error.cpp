#include "wishmix/error.hpp"

namespace wishmix {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::AllMinusInfinity: return "AllMinusInfinity";
    case ErrorKind::MissingCovariates: return "MissingCovariates";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::RankDeficientDesign: return "RankDeficientDesign";
    case ErrorKind::EmptyComponent: return "EmptyComponent";
    case ErrorKind::AllRestartsFailed: return "AllRestartsFailed";
    case ErrorKind::ChainTooShort: return "ChainTooShort";
    case ErrorKind::UnknownDesign: return "UnknownDesign";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::NoItemsRetained: return "NoItemsRetained";
    case ErrorKind::MalformedTable: return "MalformedTable";
    case ErrorKind::MalformedDataset: return "MalformedDataset";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace wishmix
