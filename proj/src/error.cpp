#include "mmtm/error.hpp"

namespace mmtm {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnbalancedParens: return "UnbalancedParens";
    case ErrorKind::UnknownToken: return "UnknownToken";
    case ErrorKind::PlaceholderOutOfRange: return "PlaceholderOutOfRange";
    case ErrorKind::EmptyExpression: return "EmptyExpression";
    case ErrorKind::TruncatedSequence: return "TruncatedSequence";
    case ErrorKind::TrailingTokens: return "TrailingTokens";
    case ErrorKind::DivisionByZero: return "DivisionByZero";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::AnswerMismatch: return "AnswerMismatch";
    case ErrorKind::Io: return "Io";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::SequenceTooLong: return "SequenceTooLong";
    case ErrorKind::IdOutOfRange: return "IdOutOfRange";
    case ErrorKind::EmptySource: return "EmptySource";
    case ErrorKind::EmptyTarget: return "EmptyTarget";
    case ErrorKind::UnknownTask: return "UnknownTask";
    case ErrorKind::BadConfig: return "BadConfig";
    case ErrorKind::BadDim: return "BadDim";
    case ErrorKind::NoOverlap: return "NoOverlap";
    case ErrorKind::EmptyTaskDataset: return "EmptyTaskDataset";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorKind::BadCheckpoint: return "BadCheckpoint";
  }
  return "Unknown";
}

}  // namespace mmtm
