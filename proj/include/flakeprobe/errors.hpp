#pragma once

#include <stdexcept>
#include <string>

namespace flakeprobe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// App or test program failed structural validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Every live thread is blocked and no clock advance can unblock any of them.
class DeadlockError : public Error {
 public:
  using Error::Error;
};

class UnknownThread : public Error {
 public:
  using Error::Error;
};

class AlreadyTerminated : public Error {
 public:
  using Error::Error;
};

/// Operation on a runtime that has already been shut down.
class NoOpError : public Error {
 public:
  using Error::Error;
};

/// Name not present in the scenario catalogue.
class UnknownName : public Error {
 public:
  using Error::Error;
};

/// The input test does not pass under the tracing schedule.
class NotPassingError : public Error {
 public:
  using Error::Error;
};

/// The program observes more events than the exhaustive oracle accepts.
class CapExceeded : public Error {
 public:
  using Error::Error;
};

/// A directed run never observed the event its directive names.
class DirectiveUnrealizable : public Error {
 public:
  using Error::Error;
};

/// One or more catalogue scenarios disagree with the oracle.
class CatalogueInvalid : public Error {
 public:
  using Error::Error;
};

/// Thrown by app handlers and test hooks to fail the running test.
class AppFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flakeprobe
