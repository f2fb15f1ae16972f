#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmtm {

enum class ErrorKind {
  // expression grammar and traversal labels
  UnbalancedParens,
  UnknownToken,
  PlaceholderOutOfRange,
  EmptyExpression,
  TruncatedSequence,
  TrailingTokens,
  // arithmetic
  DivisionByZero,
  Overflow,
  // corpus and files
  MalformedRecord,
  AnswerMismatch,
  Io,
  // model
  ShapeMismatch,
  SequenceTooLong,
  IdOutOfRange,
  EmptySource,
  EmptyTarget,
  UnknownTask,
  BadConfig,
  // embedding init
  BadDim,
  NoOverlap,
  // training
  EmptyTaskDataset,
  NonFiniteLoss,
  // checkpoints
  CheckpointMismatch,
  BadCheckpoint,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mmtm
