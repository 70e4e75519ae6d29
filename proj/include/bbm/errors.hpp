#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bbm {

// Error taxonomy shared by the whole library. The CLI maps these onto
// distinct exit codes, so keep the hierarchy flat and stable.

// Bad parameters or configuration rejected before any work is done.
struct validation_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A computation ran but produced something unusable (blow-up, failed fit,
// non-converging quadrature).
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An operation was called on an object in the wrong state (empty population,
// missing front crossing).
struct state_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Required recorded data (path checkpoints) is absent or too short.
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Hard particle cap exceeded. Carries diagnostics for the run report.
struct capacity_error : std::runtime_error {
  capacity_error(std::uint64_t count, std::uint64_t cap, double time)
      : std::runtime_error("particle count " + std::to_string(count) +
                           " exceeds hard cap " + std::to_string(cap) +
                           " at t=" + std::to_string(time)),
        count(count), cap(cap), time(time) {}
  std::uint64_t count;
  std::uint64_t cap;
  double time;
};

}  // namespace bbm
