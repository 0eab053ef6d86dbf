#include "mpqmc/errors.hpp"

namespace mpqmc {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::SequenceExhausted: return "SequenceExhausted";
    case Errc::UnsupportedRegisterSize: return "UnsupportedRegisterSize";
    case Errc::InvalidWidth: return "InvalidWidth";
    case Errc::TooLarge: return "TooLarge";
    case Errc::DegenerateTuple: return "DegenerateTuple";
    case Errc::NotSPD: return "NotSPD";
    case Errc::DegenerateDesign: return "DegenerateDesign";
    case Errc::SolverDiverged: return "SolverDiverged";
    case Errc::MetricNotSPD: return "MetricNotSPD";
    case Errc::NonPositiveMetric: return "NonPositiveMetric";
    case Errc::AllZeroMass: return "AllZeroMass";
    case Errc::InvalidWeights: return "InvalidWeights";
    case Errc::NonSPDAdaptation: return "NonSPDAdaptation";
    case Errc::ResampleBudgetExceeded: return "ResampleBudgetExceeded";
    case Errc::NoReference: return "NoReference";
    case Errc::WrongMode: return "WrongMode";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace mpqmc
