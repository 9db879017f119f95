#pragma once

#include <stdexcept>
#include <string>

namespace gm {

// Shapes of states, datasets, and generator outputs do not line up.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// A (1-kappa) or (1-t) denominator has collapsed.
struct SingularityError : std::domain_error {
  using std::domain_error::domain_error;
};

struct StepSizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyPosteriorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CoverageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InstabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Combinator weight constraints violated.
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct UnsupportedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gm
