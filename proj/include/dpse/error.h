// SPDX-License-Identifier: Apache-2.0

#ifndef DPSE_ERROR_H_
#define DPSE_ERROR_H_

#include <stdexcept>
#include <string>

namespace dpse {

enum class ErrorCode {
  kInvalidArgument,
  kSingularMatrix,
  kChannelLengthMismatch,
  kBlockTooShort,
  kNumericalDivergence,
  kSingularInitialization,
  kLikelihoodDiverged,
  kDegenerateStatistics,
  kSilentReference,
  kIo,
};

const char* ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dpse

#endif  // DPSE_ERROR_H_
