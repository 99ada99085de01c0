#ifndef DSPAR_ERRORS_HPP
#define DSPAR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dspar {

/// Malformed input text (expressions, formats, distribution statements,
/// schedules, tensor files).
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Structurally well-formed input that violates a semantic rule (arity
/// mismatches, unknown names, invalid schedules, shape errors).
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A worker touched an index outside the sub-regions assigned to its color.
/// Raised only in instrumented execution; always indicates a planner or
/// runtime bug.
struct ClosureViolation : std::runtime_error {
  ClosureViolation(std::string tensor, std::string region, long long index,
                   long long color)
      : std::runtime_error("closure violation: tensor '" + tensor + "' region '" +
                           region + "' index " + std::to_string(index) +
                           " is outside the sub-region of color " +
                           std::to_string(color)),
        tensor(std::move(tensor)),
        region(std::move(region)),
        index(index),
        color(color) {}

  std::string tensor;
  std::string region;
  long long index;
  long long color;
};

}  // namespace dspar

#endif
