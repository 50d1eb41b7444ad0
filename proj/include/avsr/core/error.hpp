// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace avsr {

/// Broad failure families; each maps to one process exit code.
enum class ErrorKind {
  kUsage = 1,     // bad arguments or configuration
  kData = 2,      // ingestion, file formats, checkpoints
  kNumerical = 3  // shapes, divergence, optimizer state
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

#define AVSR_DEFINE_ERROR(Name, Kind)                                   \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

AVSR_DEFINE_ERROR(UsageError, kUsage)
AVSR_DEFINE_ERROR(ConfigError, kUsage)

AVSR_DEFINE_ERROR(IoError, kData)
AVSR_DEFINE_ERROR(FormatError, kData)
AVSR_DEFINE_ERROR(IngestionError, kData)
AVSR_DEFINE_ERROR(EmptyDatasetError, kData)
AVSR_DEFINE_ERROR(BoundsError, kData)
AVSR_DEFINE_ERROR(CheckpointError, kData)

AVSR_DEFINE_ERROR(ShapeError, kNumerical)
AVSR_DEFINE_ERROR(SizeError, kNumerical)
AVSR_DEFINE_ERROR(LabelError, kNumerical)
AVSR_DEFINE_ERROR(ProbabilityError, kNumerical)
AVSR_DEFINE_ERROR(EvaluationError, kNumerical)
AVSR_DEFINE_ERROR(DegenerateBatchError, kNumerical)
AVSR_DEFINE_ERROR(OptimizerError, kNumerical)
AVSR_DEFINE_ERROR(TrainingError, kNumerical)

#undef AVSR_DEFINE_ERROR

}  // namespace avsr
