#include "lmeval/error.hpp"

namespace lmeval {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::CorpusTooSmall: return "CorpusTooSmall";
    case Errc::BadOrder: return "BadOrder";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::ConfigError: return "ConfigError";
    case Errc::AlignmentError: return "AlignmentError";
    case Errc::NoSupervision: return "NoSupervision";
    case Errc::InsufficientSamples: return "InsufficientSamples";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::DegenerateFit: return "DegenerateFit";
    case Errc::UnknownToken: return "UnknownToken";
    case Errc::FormatError: return "FormatError";
    case Errc::IoError: return "IoError";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace lmeval
