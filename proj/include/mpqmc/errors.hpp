#pragma once

#include <stdexcept>
#include <string>

namespace mpqmc {

// Machine-readable failure codes. The CLI maps ConfigError to exit code 1 and
// everything else to exit code 2.
enum class Errc {
  SequenceExhausted,
  UnsupportedRegisterSize,
  InvalidWidth,
  TooLarge,
  DegenerateTuple,
  NotSPD,
  DegenerateDesign,
  SolverDiverged,
  MetricNotSPD,
  NonPositiveMetric,
  AllZeroMass,
  InvalidWeights,
  NonSPDAdaptation,
  ResampleBudgetExceeded,
  NoReference,
  WrongMode,
  TooFewSamples,
  ConfigError,
  IoError,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace mpqmc
