#pragma once

#include <stdexcept>
#include <string>

namespace massdirac {

enum class ErrorKind {
  InvalidArgument,   // precondition / dimension violations
  NotPositiveDefinite,
  NotInvertible,
  AnnulusUnresolved,
  SupportViolation,  // a metric or cutoff leaves R_{U, g_flat}
  NonConvergence,
  Config,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace massdirac
