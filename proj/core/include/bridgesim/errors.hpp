#pragma once

#include <stdexcept>
#include <string>

namespace bridgesim {

/// A scenario, config, or report violates an invariant of its schema.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// A document could not be decoded at all (malformed bytes, wrong version).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// A runtime failure inside generation or simulation.
class SimulationError : public std::runtime_error {
 public:
  explicit SimulationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bridgesim
