#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pnpf {

/// Failure categories raised by the library. Every throw site uses one of
/// these so callers (and the CLI exit-code mapping) can dispatch on kind.
enum class Errc {
  ZeroResolution,
  DegenerateGeometry,
  DivisionDegenerate,
  MissingBoundaryData,
  MeshMismatch,
  AntisymmetryViolation,
  AllNeumann,
  NotConverged,
  SingularMatrix,
  NonpositiveConcentration,
  NewtonDiverged,
  PositivityLineSearchFailed,
  TimestepTooLarge,
  PositivityLost,
  NonpositiveState,
  SectionMissesMesh,
  NonpositiveConstant,
  ConfigError,
};

inline std::string_view to_string(Errc e) {
  switch (e) {
    case Errc::ZeroResolution: return "ZeroResolution";
    case Errc::DegenerateGeometry: return "DegenerateGeometry";
    case Errc::DivisionDegenerate: return "DivisionDegenerate";
    case Errc::MissingBoundaryData: return "MissingBoundaryData";
    case Errc::MeshMismatch: return "MeshMismatch";
    case Errc::AntisymmetryViolation: return "AntisymmetryViolation";
    case Errc::AllNeumann: return "AllNeumann";
    case Errc::NotConverged: return "NotConverged";
    case Errc::SingularMatrix: return "SingularMatrix";
    case Errc::NonpositiveConcentration: return "NonpositiveConcentration";
    case Errc::NewtonDiverged: return "NewtonDiverged";
    case Errc::PositivityLineSearchFailed: return "PositivityLineSearchFailed";
    case Errc::TimestepTooLarge: return "TimestepTooLarge";
    case Errc::PositivityLost: return "PositivityLost";
    case Errc::NonpositiveState: return "NonpositiveState";
    case Errc::SectionMissesMesh: return "SectionMissesMesh";
    case Errc::NonpositiveConstant: return "NonpositiveConstant";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

  /// Config problems map to exit status 1, everything else is a solver failure.
  bool is_config_error() const noexcept { return code_ == Errc::ConfigError; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace pnpf
