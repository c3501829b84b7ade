#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace msreg {

/// Coarse error classes. The CLI maps each class to its own exit code.
enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  Io,
  Format,
  Numeric,
  Registration,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

/// A failure inside a named pipeline stage. what() is prefixed with the stage.
class StageError : public Error {
 public:
  StageError(std::string stage, ErrorKind kind, const std::string& message)
      : Error(kind, stage + ": " + message), stage_(std::move(stage)) {}

  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

using Rgb8 = std::array<std::uint8_t, 3>;

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace msreg
