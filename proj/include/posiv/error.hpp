#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace posiv {

enum class ErrorCode {
  // input errors
  MissingColumn,
  EmptyDataset,
  MixedArmsWithinUser,
  IoFailure,
  InvalidConfig,
  UnknownItem,
  ParseError,
  InvalidSpec,
  EmptyInput,
  // estimation errors
  Underdetermined,
  Underidentified,
  ConstantColumn,
  Collinear,
  NotJustIdentified,
  ZeroFirstStage,
  TooFewClusters,
};

std::string_view to_string(ErrorCode code);

// Input errors map to CLI exit code 2, estimation errors to exit code 1.
bool is_input_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace posiv
