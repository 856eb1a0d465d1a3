#pragma once

#include <stdexcept>
#include <string>

namespace forge {

// Every error carries the module that raised it so the CLI can print
// "module: cause" lines.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

// Malformed input data: bad files, invariant violations, unusable arguments.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A remote backend could not be reached or answered with a non-2xx status.
class TransportError : public Error {
 public:
  TransportError(std::string module, const std::string& what, int status = 0,
                 std::string body = {}, bool retryable = true)
      : Error(std::move(module), what),
        status_(status),
        body_(std::move(body)),
        retryable_(retryable) {}

  int status() const noexcept { return status_; }
  const std::string& body() const noexcept { return body_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  int status_;
  std::string body_;
  bool retryable_;
};

// A backend answered 2xx but the payload breaks the wire contract.
class MalformedResponseError : public Error {
 public:
  MalformedResponseError(std::string module, const std::string& what,
                         std::string payload)
      : Error(std::move(module), what), payload_(std::move(payload)) {}

  const std::string& payload() const noexcept { return payload_; }

 private:
  std::string payload_;
};

// Domain failures that are not input-format problems.
class NoDetectionError : public Error {
 public:
  using Error::Error;
};

class PlacementExhaustedError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class UnmatchedTemplateError : public Error {
 public:
  using Error::Error;
};

class CannotMixError : public Error {
 public:
  using Error::Error;
};

}  // namespace forge
