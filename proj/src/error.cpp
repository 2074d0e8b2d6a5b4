#include "saxattn/error.hpp"

namespace saxattn {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyTrainSet: return "EmptyTrainSet";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::BadSymbolCount: return "BadSymbolCount";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::OddDimension: return "OddDimension";
    case ErrorCode::BadCombo: return "BadCombo";
    case ErrorCode::NonStochasticRows: return "NonStochasticRows";
    case ErrorCode::BadBundle: return "BadBundle";
    case ErrorCode::ZeroDivisor: return "ZeroDivisor";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::EmptyTrain: return "EmptyTrain";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::EntropyDegenerate: return "EntropyDegenerate";
    case ErrorCode::UnfinalizedModel: return "UnfinalizedModel";
    case ErrorCode::VocabularyMismatch: return "VocabularyMismatch";
    case ErrorCode::BadVariant: return "BadVariant";
    case ErrorCode::EmptyResults: return "EmptyResults";
    case ErrorCode::BadFraction: return "BadFraction";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::UndefinedSampEn: return "UndefinedSampEn";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::BadParams: return "BadParams";
    case ErrorCode::BadDataset: return "BadDataset";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace saxattn
