#ifndef THERMOLAB_ERRORS_HPP
#define THERMOLAB_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace thermolab {

/// Failure classes map onto the CLI exit codes: configuration problems exit
/// with 1, numerical failures with 2.
enum class ErrorClass { config, numerical };

class LabError : public std::runtime_error {
 public:
  LabError(ErrorClass cls, const std::string& what) : std::runtime_error(what), class_(cls) {}
  ErrorClass error_class() const noexcept { return class_; }

 private:
  ErrorClass class_;
};

#define THERMOLAB_DEFINE_ERROR(Name, Class)                                   \
  class Name : public LabError {                                              \
   public:                                                                    \
    explicit Name(const std::string& what) : LabError(Class, #Name ": " + what) {} \
  };

THERMOLAB_DEFINE_ERROR(ValidationFailed, ErrorClass::config)
THERMOLAB_DEFINE_ERROR(DomainError, ErrorClass::config)
THERMOLAB_DEFINE_ERROR(ConfigError, ErrorClass::config)
THERMOLAB_DEFINE_ERROR(IoError, ErrorClass::config)
THERMOLAB_DEFINE_ERROR(StepFailure, ErrorClass::numerical)
THERMOLAB_DEFINE_ERROR(TrappedOrbit, ErrorClass::numerical)
THERMOLAB_DEFINE_ERROR(BlowupInsideWindow, ErrorClass::numerical)
THERMOLAB_DEFINE_ERROR(NoConvergence, ErrorClass::numerical)
THERMOLAB_DEFINE_ERROR(BoundViolated, ErrorClass::numerical)
THERMOLAB_DEFINE_ERROR(RiccatiUnavailable, ErrorClass::numerical)
THERMOLAB_DEFINE_ERROR(IllConditioned, ErrorClass::numerical)
THERMOLAB_DEFINE_ERROR(SolverDiverged, ErrorClass::numerical)

#undef THERMOLAB_DEFINE_ERROR

/// Expression syntax error; `offset` is the byte offset into the source text.
class ParseError : public LabError {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : LabError(ErrorClass::config, "ParseError at offset " + std::to_string(offset) + ": " + what),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnknownIdentifier : public ParseError {
 public:
  UnknownIdentifier(const std::string& name, std::size_t offset)
      : ParseError("unknown identifier '" + name + "'", offset), name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

}  // namespace thermolab

#endif
