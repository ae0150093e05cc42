#pragma once

#include <stdexcept>
#include <string>

namespace harsanyi {

// Base of every error raised by the library. Subclasses mark the failure
// category so callers (and the CLI) can react without parsing messages.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A size limit was exceeded (player count, enumeration budget).
class CapacityError : public Error {
 public:
  using Error::Error;
};

// A NaN or infinity showed up where a finite real is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Caller violated a precondition (wrong table kind, bad index, bad shape).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Fewer independent equations than unknowns in a least-squares solve.
class RankError : public Error {
 public:
  using Error::Error;
};

// An estimator was given fewer inferences than one sampling round needs.
class BudgetError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or corrupted file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A file of one model topology was loaded where another was expected.
class TopologyError : public Error {
 public:
  using Error::Error;
};

// Loss or parameters became non-finite during optimization.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace harsanyi
