// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#include "lean/error.hpp"

namespace lean {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::format: return "format";
    case ErrorCode::truncation: return "truncation";
    case ErrorCode::validation: return "validation";
    case ErrorCode::config: return "config";
    case ErrorCode::domain: return "domain";
    case ErrorCode::contract: return "contract";
    case ErrorCode::size: return "size";
    case ErrorCode::convergence: return "convergence";
    case ErrorCode::build: return "build";
    case ErrorCode::structure: return "structure";
    case ErrorCode::io: return "io";
    case ErrorCode::internal: return "internal";
  }
  return "unknown";
}

}  // namespace lean
