// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#ifndef LEAN_ERROR_HPP
#define LEAN_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace lean {

/// Failure categories. The CLI maps these onto its exit-code contract.
enum class ErrorCode {
  format,       // malformed manifest or unsupported field
  truncation,   // blob shorter than the manifest claims
  validation,   // network invariant violated
  config,       // bad configuration (ratios, sizes, divisibility)
  domain,       // parameter outside its mathematical domain
  contract,     // caller broke a documented precondition
  size,         // input too large/small for the requested routine
  convergence,  // iterative oracle did not converge
  build,        // pruning graph could not be built
  structure,    // required structural metadata is missing
  io,           // filesystem failure
  internal,     // invariant violated inside the library
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lean

#endif  // LEAN_ERROR_HPP
