#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xcal {

enum class ErrorCode {
  kPointAtInfinity,
  kDegenerateScale,
  kNotInvertible,
  kInsufficientData,
  kNoConsensus,
  kInvalidFrame,
  kDegenerateGeometry,
  kInvalidCamera,
  kInvalidSample,
  kDegenerateData,
  kRayParallelToPlane,
  kPlaneBehindCamera,
  kDegenerateConfiguration,
  kInvalidInitialization,
  kDisconnectedNetwork,
  kMissingPlane,
  kTransferEstimation,
  kEmptyReport,
  kEmptyScene,
  kBehindCamera,
  kInvalidArgument,
  kInputError,
  kContamination,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can dispatch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace xcal
