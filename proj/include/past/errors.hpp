#pragma once

#include <stdexcept>
#include <string>

namespace past {

// Argument outside the mathematical domain of an operation (bad grid
// coordinate, M = 0, b*a < D, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Unknown location / object / key identifier.
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A row key that is not present in the store. Distinct from an empty block.
class NotFoundError : public StoreError {
 public:
  using StoreError::StoreError;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ingestion round aborted because a peer could not be reached.
class RoundAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A peer or worker did not answer within the configured deadline.
class TimeoutError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace past
