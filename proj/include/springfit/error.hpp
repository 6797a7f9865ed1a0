#pragma once

#include <stdexcept>
#include <string>

namespace springfit {

/// Base class for all recoverable failures raised by the library. `kind()` is a
/// short machine-readable tag used by the CLI error record.
class Error : public std::runtime_error
{
public:
  Error(std::string kind, const std::string& message)
    : std::runtime_error(message), kind_(std::move(kind))
  {}

  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

class InsufficientPoints : public Error
{
public:
  explicit InsufficientPoints(const std::string& message) : Error("insufficient_points", message) {}
};

class NoContact : public Error
{
public:
  NoContact() : Error("no_contact", "no contact detected") {}
};

/// Thrown when a rollout produces a non-finite state component.
class SimulationDiverged : public Error
{
public:
  SimulationDiverged(long substep, long frame)
    : Error("diverged", "simulation diverged at substep " + std::to_string(substep) +
                          " (frame " + std::to_string(frame) + ")"),
      substep_(substep), frame_(frame)
  {}

  long substep() const noexcept { return substep_; }
  long frame() const noexcept { return frame_; }

private:
  long substep_;
  long frame_;
};

class FormatError : public Error
{
public:
  explicit FormatError(const std::string& message) : Error("format", message) {}
};

} // namespace springfit
