#pragma once

#include <stdexcept>
#include <string>

namespace lmeval {

enum class Errc {
  EmptyInput,
  CorpusTooSmall,
  BadOrder,
  InsufficientData,
  ConfigError,
  AlignmentError,
  NoSupervision,
  InsufficientSamples,
  EmptyDataset,
  DegenerateFit,
  UnknownToken,
  FormatError,
  IoError,
  InvalidArgument,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

  // Configuration problems map to CLI exit code 2, everything else to 3.
  bool is_config_error() const noexcept {
    return code_ == Errc::ConfigError || code_ == Errc::InvalidArgument;
  }

 private:
  Errc code_;
};

}  // namespace lmeval
