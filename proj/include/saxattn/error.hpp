#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace saxattn {

enum class ErrorCode {
  EmptyTrainSet,
  NonFiniteValue,
  BadSymbolCount,
  LengthMismatch,
  DimensionMismatch,
  OddDimension,
  BadCombo,
  NonStochasticRows,
  BadBundle,
  ZeroDivisor,
  EmptyBatch,
  EmptyTrain,
  UnknownClass,
  EntropyDegenerate,
  UnfinalizedModel,
  VocabularyMismatch,
  BadVariant,
  EmptyResults,
  BadFraction,
  TooShort,
  UndefinedSampEn,
  Empty,
  InsufficientSamples,
  BadParams,
  BadDataset,
  BadConfig,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// that the CLI and the HTTP service can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace saxattn
