#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace h2grid {

enum class ErrorKind {
  topology,
  unit,
  singular_network,
  voltage_collapse,
  frequency_trip,
  parse,
  validation,
  io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::topology: return "TopologyError";
    case ErrorKind::unit: return "UnitError";
    case ErrorKind::singular_network: return "SingularNetwork";
    case ErrorKind::voltage_collapse: return "VoltageCollapse";
    case ErrorKind::frequency_trip: return "FrequencyTrip";
    case ErrorKind::parse: return "ParseError";
    case ErrorKind::validation: return "ValidationError";
    case ErrorKind::io: return "IoError";
  }
  return "Error";
}

// Common base for every failure raised by the library. Simulation errors carry
// the simulated time at which they happened once the engine has seen them.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }
  std::optional<double> sim_time() const noexcept { return sim_time_; }

  void set_sim_time(double t) { sim_time_ = t; }

  bool is_config_error() const noexcept {
    return kind_ == ErrorKind::parse || kind_ == ErrorKind::validation || kind_ == ErrorKind::topology ||
           kind_ == ErrorKind::unit;
  }

 private:
  ErrorKind kind_;
  std::string detail_;
  std::optional<double> sim_time_;
};

#define H2GRID_DEFINE_ERROR(Name, Kind)                                       \
  class Name : public Error {                                                 \
   public:                                                                    \
    explicit Name(const std::string& message) : Error(ErrorKind::Kind, message) {} \
  };

H2GRID_DEFINE_ERROR(TopologyError, topology)
H2GRID_DEFINE_ERROR(UnitError, unit)
H2GRID_DEFINE_ERROR(SingularNetwork, singular_network)
H2GRID_DEFINE_ERROR(VoltageCollapse, voltage_collapse)
H2GRID_DEFINE_ERROR(FrequencyTrip, frequency_trip)
H2GRID_DEFINE_ERROR(ValidationError, validation)
H2GRID_DEFINE_ERROR(IoError, io)

#undef H2GRID_DEFINE_ERROR

// Parse failures always point at a location in the source document (1-based).
class ParseError : public Error {
 public:
  ParseError(const std::string& message, int line, int column)
      : Error(ErrorKind::parse, "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace h2grid
