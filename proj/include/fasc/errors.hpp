#pragma once

#include <stdexcept>
#include <string>

namespace fasc {

// Base for everything this library throws on purpose.
struct error : std::runtime_error {
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem-level failures (missing file, short write). CLI exit code 3.
struct io_error : error {
  explicit io_error(const std::string& msg) : error(msg) {}
};

// Structurally broken input: bad magic, truncated payload, inconsistent
// manifest, dimension mismatches, out-of-range ranks.
struct validation_error : error {
  explicit validation_error(const std::string& msg) : error(msg) {}
};

// Numerically unusable but well-formed input: near-zero gradient covariance,
// deficient rank after truncation, zero-variance weighted covariance.
// Per-layer occurrences degrade a run (CLI exit code 2) instead of aborting.
struct degenerate_error : error {
  explicit degenerate_error(const std::string& msg) : error(msg) {}
};

}  // namespace fasc
